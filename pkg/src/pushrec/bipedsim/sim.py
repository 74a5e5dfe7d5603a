"""Biped simulator facade over the dynamics kernels."""

from __future__ import annotations

import numpy as np

from . import dynamics
from .model import (BODY_NAMES, N_JOINTS, ModelConfig, application_point,
                    build_tree)
from .state import ControlTarget, SimState

_ACT_IDX = np.arange(3, 9, dtype=np.int64)  # actuated dofs: the six joints


class SimError(ValueError):
    """Raised when the simulator is fed invalid inputs."""


class BipedSim:
    """Planar biped with penalty contacts and torque inputs.

    One instance owns no mutable state besides its model; all stepping is
    state-in/state-out, so instances can be shared across episodes but a
    single instance must not be stepped concurrently.
    """

    def __init__(self, config: ModelConfig | None = None):
        self.config = config or ModelConfig()
        self.config.validate()
        self.tree = build_tree(self.config)
        self._no_events = np.zeros((0, 8))
        self._kp = np.asarray(self.config.kp, dtype=float)
        self._kd = np.asarray(self.config.kd, dtype=float)
        self._torque_limit = np.asarray(self.config.torque_limit, dtype=float)

    # -- stepping ---------------------------------------------------------

    def step_physics(self, state: SimState, torques, external=(), dt: float = 1e-3,
                     ) -> SimState:
        """Advance one physics substep under the given motor torques.

        ``external`` is a list of (application point, force) pairs where the
        application point is either a configured name or a (body, (ox, oz))
        tuple, and the force is a world-frame (fx, fz) vector.
        """
        if not 0.0 < dt <= 5e-3:
            raise SimError(f"dt must lie in (0, 5ms], got {dt}")
        bad = state.finite_check()
        if bad is not None:
            raise SimError(f"non-finite state entry {bad}")
        torques = np.asarray(torques, dtype=float)
        if torques.shape != (N_JOINTS,):
            raise SimError(f"torques must have shape ({N_JOINTS},), got {torques.shape}")
        nonfinite = np.flatnonzero(~np.isfinite(torques))
        if nonfinite.size:
            raise SimError(f"non-finite torque entry torques[{int(nonfinite[0])}]")

        point_forces = np.zeros((len(external), 5))
        for r, (where, force) in enumerate(external):
            if isinstance(where, str):
                body, off = application_point(self.config, where)
            else:
                body_name, off = where
                body = BODY_NAMES.index(body_name) if isinstance(body_name, str) else int(body_name)
            fx, fz = float(force[0]), float(force[1])
            if not (np.isfinite(fx) and np.isfinite(fz)):
                raise SimError(f"non-finite external force at entry {r}")
            point_forces[r] = (body, off[0], off[1], fx, fz)

        out = state.copy()
        tree = self.tree
        new_t = dynamics._substep(
            tree.parent, tree.jtype, tree.joint_off, tree.mass, tree.inertia,
            tree.com, tree.q_lower, tree.q_upper, tree.stop_kp, tree.stop_kd,
            tree.contact_body, tree.contact_off, tree.kn, tree.dn, tree.kt,
            tree.dt_fric, tree.mu, tree.gravity,
            state.t, out.q, out.v, torques, _ACT_IDX, self._no_events, point_forces,
            out.contact_flag, out.contact_anchor, out.contact_fx, out.contact_fz, dt)
        out.t = new_t
        out.u = torques.copy()
        return out

    def pd_tick(self, state: SimState, target: ControlTarget, events: np.ndarray,
                dt: float = 1e-3, n_sub: int = 10, n_ticks: int = 1,
                vel_accum: np.ndarray | None = None) -> SimState:
        """Run n_ticks 100 Hz PD ticks: torques recomputed per tick and held
        for n_sub physics substeps each."""
        out = state.copy()
        if vel_accum is None:
            vel_accum = np.zeros(4)
        tree = self.tree
        new_t = dynamics._pd_ticks(
            tree.parent, tree.jtype, tree.joint_off, tree.mass, tree.inertia,
            tree.com, tree.q_lower, tree.q_upper, tree.stop_kp, tree.stop_kd,
            tree.contact_body, tree.contact_off, tree.kn, tree.dn, tree.kt,
            tree.dt_fric, tree.mu, tree.gravity,
            state.t, out.q, out.v, out.u, _ACT_IDX,
            self._kp, self._kd, self._torque_limit,
            target.q, target.qd, events,
            out.contact_flag, out.contact_anchor, out.contact_fx, out.contact_fz,
            dt, n_sub, n_ticks, vel_accum)
        out.t = new_t
        return out

    # -- derived quantities ------------------------------------------------

    def total_energy(self, state: SimState) -> float:
        return dynamics.total_energy(self.tree, state.q, state.v)

    def com_state(self, state: SimState) -> tuple[float, float, float, float]:
        """(com_x, com_z, com_vx, com_vz) of the whole body."""
        return dynamics.com_state(self.tree, state.q, state.v)

    def body_poses(self, state: SimState) -> np.ndarray:
        """World (theta, x, z) per body frame."""
        return dynamics.fk_world_poses(self.tree, state.q)

    def power(self, state: SimState) -> float:
        """Instantaneous actuation power <u, qd_m>."""
        return float(np.dot(state.u, state.joint_vel))
