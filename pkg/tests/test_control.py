"""PD law and velocity-command integration."""

import numpy as np
import pytest

from pushrec.bipedsim import (ControlTarget, ModelConfig, SimState,
                              integrate_action, pd_control)


@pytest.fixture
def cfg():
    return ModelConfig()


def make_state(q=None, qd=None):
    s = SimState()
    if q is not None:
        s.q[3:] = q
    if qd is not None:
        s.v[3:] = qd
    return s


class TestPdControl:
    def test_zero_error_zero_torque(self, cfg):
        q = np.array([0.2, -0.5, 0.2, 0.2, -0.5, 0.2])
        qd = np.array([0.1, -0.1, 0.0, 0.2, 0.0, -0.3])
        u = pd_control(ControlTarget(q=q.copy(), qd=qd.copy()),
                       make_state(q, qd), cfg)
        assert np.allclose(u, 0.0)

    def test_linear_law(self):
        cfg = ModelConfig(kp=(100.0,) * 6, kd=(10.0,) * 6)
        target = ControlTarget(q=np.full(6, 0.1), qd=np.zeros(6))
        u = pd_control(target, make_state(np.zeros(6), np.zeros(6)), cfg)
        assert np.allclose(u, 10.0)

    def test_saturation_exact(self):
        cfg = ModelConfig(kp=(100.0,) * 6, kd=(10.0,) * 6,
                          torque_limit=(5.0,) * 6)
        target = ControlTarget(q=np.full(6, 1.0), qd=np.zeros(6))
        u = pd_control(target, make_state(np.zeros(6), np.zeros(6)), cfg)
        assert np.all(u == 5.0)

    def test_odd_in_tracking_error(self, cfg):
        gen = np.random.default_rng(0)
        for _ in range(20):
            err = gen.normal(0.0, 0.05, 6)  # small: no saturation
            base = np.array([0.2, -0.5, 0.2, 0.2, -0.5, 0.2])
            up = pd_control(ControlTarget(q=base + err, qd=np.zeros(6)),
                            make_state(base, np.zeros(6)), cfg)
            dn = pd_control(ControlTarget(q=base - err, qd=np.zeros(6)),
                            make_state(base, np.zeros(6)), cfg)
            assert np.allclose(up, -dn, atol=1e-12)

    def test_rejects_nonfinite_target(self, cfg):
        target = ControlTarget(q=np.full(6, np.nan), qd=np.zeros(6))
        with pytest.raises(ValueError):
            pd_control(target, make_state(), cfg)


class TestIntegrateAction:
    def test_zero_command_keeps_position(self, cfg):
        prev = ControlTarget(q=np.full(6, 0.1), qd=np.full(6, 0.5))
        out = integrate_action(prev, np.zeros(6), 0.04, cfg)
        assert np.allclose(out.q, prev.q)
        assert np.allclose(out.qd, 0.0)

    def test_integration_arithmetic(self, cfg):
        prev = ControlTarget(q=np.zeros(6), qd=np.zeros(6))
        out = integrate_action(prev, np.full(6, 0.5), 0.04, cfg)
        assert np.allclose(out.q, 0.02)
        assert np.allclose(out.qd, 0.5)

    def test_position_pinned_at_upper_bound(self, cfg):
        upper = np.asarray(cfg.joint_upper)
        prev = ControlTarget(q=upper - 0.001, qd=np.zeros(6))
        out = integrate_action(prev, np.full(6, 2.0), 0.04, cfg)
        assert np.allclose(out.q, upper)
        assert np.allclose(out.qd, 2.0)  # velocity target preserved

    def test_velocity_command_clamped(self, cfg):
        prev = ControlTarget(q=np.zeros(6), qd=np.zeros(6))
        out = integrate_action(prev, np.full(6, 100.0), 0.04, cfg)
        vlim = np.asarray(cfg.velocity_limit)
        assert np.allclose(out.qd, vlim)
        expected_q = np.minimum(vlim * 0.04, np.asarray(cfg.joint_upper))
        assert np.allclose(out.q, expected_q)
