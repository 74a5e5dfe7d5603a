"""Biped model description and its packed form consumed by the dynamics kernels.

The robot is a sagittal-plane biped: a torso link carrying the floating base,
plus thigh, shank and foot links per leg (6 actuated revolute joints).  The
floating base is decomposed into two prismatic phantom joints (x, z) and one
revolute joint (pitch), so every joint in the kinematic tree has a single
degree of freedom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np

# joint index order for all length-6 per-joint arrays
JOINT_NAMES = ("l_hip", "l_knee", "l_ankle", "r_hip", "r_knee", "r_ankle")
N_JOINTS = 6
# generalized coordinate layout: base x, base z, base pitch, then JOINT_NAMES
N_DOF = 9

# body indices in the kinematic tree
BODY_NAMES = (
    "base_px", "base_pz", "torso",
    "l_thigh", "l_shank", "l_foot",
    "r_thigh", "r_shank", "r_foot",
)
TORSO = 2
L_FOOT, R_FOOT = 5, 8

# joint types for the packed tree
JT_PX, JT_PZ, JT_REV = 0, 1, 2

# contact point order; the first four are the foot force sensors
CONTACT_NAMES = (
    "l_heel", "l_toe", "r_heel", "r_toe",
    "l_knee_guard", "r_knee_guard", "pelvis_guard", "torso_guard",
)
N_CONTACTS = 8
N_SENSED_CONTACTS = 4


class ConfigError(ValueError):
    """Raised when a configuration violates its declared invariants."""


@dataclass
class ModelConfig:
    """Physical parameters of the planar biped.

    Lengths in meters, masses in kg, inertias in kg*m^2 (about each link's own
    center of mass), gains in N*m/rad and N*m*s/rad, forces in N.
    """

    # link geometry
    torso_length: float = 0.70
    thigh_length: float = 0.45
    shank_length: float = 0.45
    ankle_height: float = 0.08
    heel_offset: float = 0.10       # heel behind the ankle
    toe_offset: float = 0.16        # toe ahead of the ankle
    hip_width: float = 0.20         # lateral foot separation in the 3D embedding
    foot_half_width: float = 0.04   # lateral footprint half extent

    # link masses
    torso_mass: float = 34.5
    thigh_mass: float = 7.5
    shank_mass: float = 4.0
    foot_mass: float = 1.25

    # link rotational inertias about their own CoM; these lump the reflected
    # actuator rotor inertia, which dominates for the light distal links
    torso_inertia: float = 1.43
    thigh_inertia: float = 0.15
    shank_inertia: float = 0.09
    foot_inertia: float = 0.05

    # CoM positions in link frames (torso frame sits at the hip axis)
    torso_com: tuple[float, float] = (0.0, 0.35)
    thigh_com: tuple[float, float] = (0.0, -0.225)
    shank_com: tuple[float, float] = (0.0, -0.225)
    foot_com: tuple[float, float] = (0.03, -0.04)

    # per-joint limits, order JOINT_NAMES
    joint_lower: tuple[float, ...] = (-1.3, -2.4, -0.9, -1.3, -2.4, -0.9)
    joint_upper: tuple[float, ...] = (1.3, 0.15, 0.9, 1.3, 0.15, 0.9)
    torque_limit: tuple[float, ...] = (150.0, 150.0, 90.0, 150.0, 150.0, 90.0)
    velocity_limit: tuple[float, ...] = (4.0, 4.0, 4.0, 4.0, 4.0, 4.0)

    # decentralized PD gains
    kp: tuple[float, ...] = (800.0, 800.0, 700.0, 800.0, 800.0, 700.0)
    kd: tuple[float, ...] = (25.0, 15.0, 5.0, 25.0, 15.0, 5.0)

    # penalty ground contact
    contact_stiffness: float = 1.5e5
    contact_damping: float = 800.0
    tangential_stiffness: float = 2.0e4
    tangential_damping: float = 200.0
    friction_coeff: float = 0.9

    # mechanical joint stops (penalty torques beyond the position bounds)
    stop_stiffness: float = 600.0
    stop_damping: float = 15.0

    gravity: float = 9.81

    # sensor noise standard deviations (0 disables a channel's noise)
    noise_imu_angle: float = 0.0
    noise_imu_rate: float = 0.0
    noise_encoder: float = 0.0
    noise_force: float = 0.0

    # named push application points: name -> (body, offset in body frame)
    application_points: dict = field(default_factory=lambda: {
        "pelvis": ("torso", (0.0, 0.10)),
        "torso": ("torso", (0.0, 0.55)),
        "l_knee": ("l_shank", (0.0, 0.0)),
        "r_knee": ("r_shank", (0.0, 0.0)),
    })

    @property
    def total_mass(self) -> float:
        return self.torso_mass + 2.0 * (self.thigh_mass + self.shank_mass + self.foot_mass)

    @property
    def weight(self) -> float:
        return self.total_mass * self.gravity

    def validate(self) -> None:
        positive = {
            "torso_length": self.torso_length, "thigh_length": self.thigh_length,
            "shank_length": self.shank_length, "ankle_height": self.ankle_height,
            "torso_mass": self.torso_mass, "thigh_mass": self.thigh_mass,
            "shank_mass": self.shank_mass, "foot_mass": self.foot_mass,
            "torso_inertia": self.torso_inertia, "thigh_inertia": self.thigh_inertia,
            "shank_inertia": self.shank_inertia, "foot_inertia": self.foot_inertia,
            "contact_stiffness": self.contact_stiffness,
            "contact_damping": self.contact_damping,
            "tangential_stiffness": self.tangential_stiffness,
            "friction_coeff": self.friction_coeff,
            "gravity": self.gravity,
        }
        for name, value in positive.items():
            if not value > 0.0:
                raise ConfigError(f"{name} must be strictly positive, got {value}")
        for arr_name in ("kp", "kd", "torque_limit", "velocity_limit"):
            for i, value in enumerate(getattr(self, arr_name)):
                if not value > 0.0:
                    raise ConfigError(f"{arr_name}[{i}] must be strictly positive, got {value}")
        for i in range(N_JOINTS):
            if not self.joint_lower[i] < self.joint_upper[i]:
                raise ConfigError(
                    f"joint bounds for {JOINT_NAMES[i]} are inverted: "
                    f"[{self.joint_lower[i]}, {self.joint_upper[i]}]")
        derived = (self.torso_mass
                   + 2.0 * (self.thigh_mass + self.shank_mass + self.foot_mass))
        if not math.isclose(derived, self.total_mass, rel_tol=1e-12):
            raise ConfigError("total mass must equal the sum of link masses")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["application_points"] = {
            k: [v[0], list(v[1])] for k, v in self.application_points.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "application_points" in d:
            d["application_points"] = {
                k: (v[0], tuple(v[1])) for k, v in d["application_points"].items()}
        for key in ("torso_com", "thigh_com", "shank_com", "foot_com"):
            if key in d:
                d[key] = tuple(d[key])
        for key in ("joint_lower", "joint_upper", "torque_limit", "velocity_limit",
                    "kp", "kd"):
            if key in d:
                d[key] = tuple(d[key])
        cfg = cls(**d)
        cfg.validate()
        return cfg


class DynTree(NamedTuple):
    """Packed kinematic tree + parameters, the form the numba kernels consume."""

    parent: np.ndarray        # (nb,) int64, -1 for world
    jtype: np.ndarray         # (nb,) int64, JT_*
    joint_off: np.ndarray     # (nb, 2) joint frame origin in parent frame
    mass: np.ndarray          # (nb,)
    inertia: np.ndarray       # (nb,) about own CoM
    com: np.ndarray           # (nb, 2) in body frame
    q_lower: np.ndarray       # (ndof,) -inf for unbounded
    q_upper: np.ndarray       # (ndof,)
    stop_kp: float
    stop_kd: float
    contact_body: np.ndarray  # (nc,) int64
    contact_off: np.ndarray   # (nc, 2)
    kn: float
    dn: float
    kt: float
    dt_fric: float
    mu: float
    gravity: float


def build_tree(cfg: ModelConfig) -> DynTree:
    """Pack a ModelConfig into flat arrays for the dynamics kernels."""
    cfg.validate()
    nb = len(BODY_NAMES)
    parent = np.array([-1, 0, 1, 2, 3, 4, 2, 6, 7], dtype=np.int64)
    jtype = np.array([JT_PX, JT_PZ, JT_REV,
                      JT_REV, JT_REV, JT_REV,
                      JT_REV, JT_REV, JT_REV], dtype=np.int64)
    joint_off = np.zeros((nb, 2))
    # hips at the torso origin; knee/ankle down the leg links
    for thigh, shank, foot in ((3, 4, 5), (6, 7, 8)):
        joint_off[thigh] = (0.0, 0.0)
        joint_off[shank] = (0.0, -cfg.thigh_length)
        joint_off[foot] = (0.0, -cfg.shank_length)

    mass = np.zeros(nb)
    inertia = np.zeros(nb)
    com = np.zeros((nb, 2))
    mass[TORSO], inertia[TORSO], com[TORSO] = cfg.torso_mass, cfg.torso_inertia, cfg.torso_com
    for thigh, shank, foot in ((3, 4, 5), (6, 7, 8)):
        mass[thigh], inertia[thigh], com[thigh] = cfg.thigh_mass, cfg.thigh_inertia, cfg.thigh_com
        mass[shank], inertia[shank], com[shank] = cfg.shank_mass, cfg.shank_inertia, cfg.shank_com
        mass[foot], inertia[foot], com[foot] = cfg.foot_mass, cfg.foot_inertia, cfg.foot_com

    q_lower = np.concatenate([np.full(3, -np.inf), np.asarray(cfg.joint_lower)])
    q_upper = np.concatenate([np.full(3, np.inf), np.asarray(cfg.joint_upper)])

    contact_body = np.array([L_FOOT, L_FOOT, R_FOOT, R_FOOT,
                             4, 7, TORSO, TORSO], dtype=np.int64)
    contact_off = np.array([
        (-cfg.heel_offset, -cfg.ankle_height),
        (cfg.toe_offset, -cfg.ankle_height),
        (-cfg.heel_offset, -cfg.ankle_height),
        (cfg.toe_offset, -cfg.ankle_height),
        (0.0, 0.0),                 # knee guards at the shank origins (knee axes)
        (0.0, 0.0),
        (0.0, 0.0),                 # pelvis guard at the hip axis
        (0.0, cfg.torso_length),    # torso guard at the top of the trunk
    ])

    return DynTree(
        parent=parent, jtype=jtype, joint_off=joint_off,
        mass=mass, inertia=inertia, com=com,
        q_lower=q_lower, q_upper=q_upper,
        stop_kp=cfg.stop_stiffness, stop_kd=cfg.stop_damping,
        contact_body=contact_body, contact_off=contact_off,
        kn=cfg.contact_stiffness, dn=cfg.contact_damping,
        kt=cfg.tangential_stiffness, dt_fric=cfg.tangential_damping,
        mu=cfg.friction_coeff, gravity=cfg.gravity,
    )


def application_point(cfg: ModelConfig, name: str) -> tuple[int, tuple[float, float]]:
    """Resolve a named push application point to (body index, body-frame offset)."""
    if name not in cfg.application_points:
        raise ConfigError(f"unknown application point {name!r}; "
                          f"known: {sorted(cfg.application_points)}")
    body_name, off = cfg.application_points[name]
    if body_name not in BODY_NAMES:
        raise ConfigError(f"application point {name!r} names unknown body {body_name!r}")
    return BODY_NAMES.index(body_name), (float(off[0]), float(off[1]))
