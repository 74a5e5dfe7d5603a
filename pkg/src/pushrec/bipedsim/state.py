"""Simulation state containers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import N_CONTACTS, N_DOF, N_JOINTS


@dataclass
class SimState:
    """Full generalized state of the planar biped plus contact bookkeeping.

    Layout of ``q``/``v``: base x, base z, base pitch, then the six joints in
    :data:`~pushrec.bipedsim.model.JOINT_NAMES` order.  ``u`` holds the motor
    torques applied during the last controller tick.  Contact anchors are part
    of the state so that stepping is a pure function of (state, inputs).
    """

    t: float = 0.0
    q: np.ndarray = field(default_factory=lambda: np.zeros(N_DOF))
    v: np.ndarray = field(default_factory=lambda: np.zeros(N_DOF))
    u: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))
    contact_flag: np.ndarray = field(default_factory=lambda: np.zeros(N_CONTACTS))
    contact_anchor: np.ndarray = field(default_factory=lambda: np.zeros(N_CONTACTS))
    contact_fx: np.ndarray = field(default_factory=lambda: np.zeros(N_CONTACTS))
    contact_fz: np.ndarray = field(default_factory=lambda: np.zeros(N_CONTACTS))

    @property
    def base_pos(self) -> np.ndarray:
        return self.q[0:2]

    @property
    def base_pitch(self) -> float:
        return float(self.q[2])

    @property
    def joint_pos(self) -> np.ndarray:
        return self.q[3:]

    @property
    def base_vel(self) -> np.ndarray:
        return self.v[0:2]

    @property
    def base_pitch_rate(self) -> float:
        return float(self.v[2])

    @property
    def joint_vel(self) -> np.ndarray:
        return self.v[3:]

    def copy(self) -> "SimState":
        return SimState(
            t=self.t, q=self.q.copy(), v=self.v.copy(), u=self.u.copy(),
            contact_flag=self.contact_flag.copy(),
            contact_anchor=self.contact_anchor.copy(),
            contact_fx=self.contact_fx.copy(),
            contact_fz=self.contact_fz.copy(),
        )

    def finite_check(self) -> str | None:
        """Name of the first non-finite entry, or None if all finite."""
        groups = (("q", self.q), ("v", self.v), ("u", self.u),
                  ("contact_fx", self.contact_fx), ("contact_fz", self.contact_fz))
        for name, arr in groups:
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                return f"{name}[{int(bad[0])}]"
        if not np.isfinite(self.t):
            return "t"
        return None


@dataclass
class ControlTarget:
    """Joint position/velocity targets forwarded to the PD controllers."""

    q: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))
    qd: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))

    def copy(self) -> "ControlTarget":
        return ControlTarget(q=self.q.copy(), qd=self.qd.copy())
