"""Episode orchestration: references, initialization, the control cascade."""

import numpy as np
import pytest

from pushrec.bipedsim import OBS_DIM, N_JOINTS
from pushrec.bipedsim.model import ConfigError
from pushrec.disturbance import PushEvent
from pushrec.envloop import (EpisodeConfig, PolicySnapshot, make_references,
                             run_episode, sample_initial_state)
from pushrec.features import extract_features
from pushrec.policynet import NormStats, forward_actor, init_params
from pushrec.reward import RewardConfig
from pushrec.termination import TerminationChecker, TerminationConfig


def zero_policy():
    params = init_params(OBS_DIM, N_JOINTS, np.random.default_rng(0))
    params.actor[-1] = (np.zeros_like(params.actor[-1][0]),
                        np.zeros_like(params.actor[-1][1]))
    return PolicySnapshot(params=params, stats=NormStats.create(OBS_DIM))


def random_policy(seed=1):
    params = init_params(OBS_DIM, N_JOINTS, np.random.default_rng(seed))
    return PolicySnapshot(params=params, stats=NormStats.create(OBS_DIM))


class TestReferences:
    def test_standing_feet_flat_and_height(self, sim, references):
        standing = next(r for r in references if r.label == "standing")
        poses = sim.body_poses(standing.state())
        assert poses[5][0] == pytest.approx(0.0, abs=1e-9)  # left foot pitch
        assert poses[8][0] == pytest.approx(0.0, abs=1e-9)
        assert standing.q[1] == pytest.approx(0.95, abs=1e-9)

    def test_feet_on_ground(self, sim, references):
        from pushrec.envloop import _sensor_point_positions
        for ref in references:
            pts = _sensor_point_positions(sim, ref.q)
            assert np.allclose(pts[:, 1], 0.0, atol=1e-9)

    def test_reference_passes_termination_idle(self, sim, quiet_episode,
                                               references, standing):
        roll = run_episode(sim, zero_policy(), quiet_episode, RewardConfig(),
                           TerminationConfig(), np.random.default_rng(0),
                           deterministic=True, references=references)
        assert not roll.terminated
        assert roll.length == quiet_episode.max_steps

    def test_unknown_label_rejected(self, sim):
        with pytest.raises(ConfigError, match="unknown reference"):
            make_references(sim, EpisodeConfig(references=("moonwalk",)))

    def test_ik_failure_reported(self, sim):
        with pytest.raises(ConfigError, match="reach"):
            make_references(sim, EpisodeConfig(references=("standing",),
                                               pelvis_height=2.0))

    def test_squat_is_lower(self, references):
        squat = next(r for r in references if r.label == "squat")
        standing = next(r for r in references if r.label == "standing")
        assert squat.q[1] < standing.q[1]


class TestInitialState:
    def test_zero_noise_exact_reference(self, sim, quiet_episode, references):
        state, ref = sample_initial_state(sim, references, quiet_episode,
                                          TerminationConfig(),
                                          np.random.default_rng(0))
        assert np.allclose(state.q, ref.q)
        assert np.allclose(state.v, 0.0)

    def test_noise_statistics(self, sim, references):
        ep = EpisodeConfig(noise_joint_pos=0.05, noise_joint_vel=0.0,
                           noise_base_pos=0.0, noise_base_pitch=0.0,
                           noise_base_vel=0.0, noise_base_pitch_rate=0.0,
                           references=("standing",))
        refs = [r for r in references if r.label == "standing"]
        gen = np.random.default_rng(1)
        cfg = TerminationConfig()
        deltas = []
        for _ in range(10_000):
            state, ref = sample_initial_state(sim, refs, ep, cfg, gen)
            deltas.append(state.q[3:] - ref.q[3:])
        stds = np.array(deltas).std(axis=0)
        # rejection sampling introduces a small bias; 5% tolerance
        assert np.all(np.abs(stds - 0.05) < 0.05 * 0.05)

    def test_all_samples_pass_instant_check(self, sim, references):
        ep = EpisodeConfig()
        gen = np.random.default_rng(2)
        term = TerminationConfig()
        for _ in range(200):
            state, ref = sample_initial_state(sim, references, ep, term, gen)
            checker = TerminationChecker(term, sim.config)
            feats = extract_features(sim, state)
            from pushrec.envloop import _make_sample
            assert checker.check(_make_sample(sim, state, feats, ref)).alive

    def test_feet_never_spawn_below_ground(self, sim, references):
        ep = EpisodeConfig(noise_base_pos=0.05)
        gen = np.random.default_rng(3)
        from pushrec.envloop import _contact_point_heights
        for _ in range(300):
            state, _ = sample_initial_state(sim, references, ep,
                                            TerminationConfig(), gen)
            heights = _contact_point_heights(sim, sim.body_poses(state))
            assert min(heights) >= -1e-12

    def test_retry_budget_exhaustion_raises(self, sim, references):
        ep = EpisodeConfig(noise_base_pitch=3.0, init_max_tries=5)
        with pytest.raises(ConfigError, match="initial state"):
            sample_initial_state(sim, references, ep, TerminationConfig(),
                                 np.random.default_rng(4))


class TestRunEpisode:
    def test_standing_oracle_full_horizon_reward_near_one(
            self, sim, quiet_episode, references):
        roll = run_episode(sim, zero_policy(), quiet_episode, RewardConfig(),
                           TerminationConfig(), np.random.default_rng(5),
                           deterministic=True, references=references)
        assert roll.length == 1500
        assert not roll.terminated
        assert roll.rewards.mean() > 0.9
        assert roll.rewards.min() > 0.7

    def test_timing_audit(self, sim, quiet_episode, references):
        # exactly 4 PD ticks x 10 substeps per policy step; time advances 40 ms
        ep = EpisodeConfig(**{**quiet_episode.to_dict(), "horizon": 2.0})
        roll = run_episode(sim, zero_policy(), ep, RewardConfig(),
                           TerminationConfig(), np.random.default_rng(6),
                           deterministic=True, references=references)
        assert ep.max_steps == 50
        assert roll.length == 50
        assert ep.dt_policy == pytest.approx(0.04)
        assert ep.pd_per_policy * ep.substeps_per_pd == 40

    def test_overload_push_terminates(self, sim, quiet_episode, references):
        # a scripted constant-magnitude forward push of 5x body weight:
        # no policy can survive it, and the fall is a pelvis-pose event
        mega = PushEvent(start=0.2, duration=5.0,
                         magnitude=5.0 * sim.config.weight, angle=0.0)
        roll = run_episode(sim, zero_policy(), quiet_episode, RewardConfig(),
                           TerminationConfig(), np.random.default_rng(7),
                           deterministic=True, references=references,
                           push_events=[mega])
        assert roll.terminated
        assert roll.cause in ("pelvis_pose", "odometry_drift")

    def test_fixed_seed_bit_identical(self, sim, references):
        ep = EpisodeConfig(horizon=4.0)
        snap = random_policy()
        rolls = [run_episode(sim, snap, ep, RewardConfig(), TerminationConfig(),
                             np.random.default_rng(42), references=references)
                 for _ in range(2)]
        assert rolls[0].rewards.tobytes() == rolls[1].rewards.tobytes()
        assert rolls[0].actions.tobytes() == rolls[1].actions.tobytes()
        assert rolls[0].obs_raw.tobytes() == rolls[1].obs_raw.tobytes()
        assert rolls[0].cause == rolls[1].cause

    def test_recorded_observation_is_policy_input(self, sim, references):
        ep = EpisodeConfig(horizon=2.0)
        snap = random_policy()
        roll = run_episode(sim, snap, ep, RewardConfig(), TerminationConfig(),
                           np.random.default_rng(43), references=references)
        mus = forward_actor(snap.params, roll.obs_norm)
        assert np.allclose(mus, roll.mu, atol=1e-12)
        assert np.allclose(snap.stats.normalize(roll.obs_raw), roll.obs_norm)

    def test_return_capped_by_termination(self, sim, quiet_episode, references):
        # same policy, identical settings: episode cut by a terminating push
        # accumulates strictly less reward than the full-length idle episode
        full = run_episode(sim, zero_policy(), quiet_episode, RewardConfig(),
                           TerminationConfig(), np.random.default_rng(8),
                           deterministic=True, references=references)
        mega = PushEvent(start=1.0, duration=5.0,
                         magnitude=5.0 * sim.config.weight, angle=0.0)
        cut = run_episode(sim, zero_policy(), quiet_episode, RewardConfig(),
                          TerminationConfig(), np.random.default_rng(8),
                          deterministic=True, references=references,
                          push_events=[mega])
        assert cut.terminated
        assert cut.episode_return < full.episode_return

    def test_max_steps_truncates_with_bootstrap(self, sim, quiet_episode,
                                                references):
        roll = run_episode(sim, random_policy(), quiet_episode, RewardConfig(),
                           TerminationConfig(), np.random.default_rng(9),
                           references=references, max_steps=7)
        assert roll.length == 7
        assert not roll.complete
        assert roll.bootstrap_value != 0.0

    def test_pushes_affect_trajectory(self, sim, quiet_episode, references):
        ep_quiet = quiet_episode
        kwargs = dict(reward_cfg=RewardConfig(), term_cfg=TerminationConfig())
        base = run_episode(sim, zero_policy(), ep_quiet, kwargs["reward_cfg"],
                           kwargs["term_cfg"], np.random.default_rng(10),
                           deterministic=True, references=references,
                           max_steps=50)
        pushed = run_episode(sim, zero_policy(), ep_quiet, kwargs["reward_cfg"],
                             kwargs["term_cfg"], np.random.default_rng(10),
                             deterministic=True, references=references,
                             push_events=[PushEvent(start=0.2, duration=0.4,
                                                    magnitude=80.0, angle=0.0)],
                             max_steps=50)
        assert not np.allclose(base.obs_raw, pushed.obs_raw)
