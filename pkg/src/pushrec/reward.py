"""Reward composition: nine balance cost components squashed through RBF kernels.

Each cost is a non-negative scalar in natural units; the reward is the
weighted sum of exp(-kappa_i * c_i^2) terms, so it always lies in (0, 1] and
every component saturates gracefully instead of dominating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .bipedsim import ModelConfig, SimState
from .bipedsim.model import ConfigError
from .features import FeatureBundle, rotation_error

COST_NAMES = (
    "odometry_velocity",
    "reference_configuration",
    "foot_position",
    "foot_orientation",
    "foot_placement_cp",
    "zmp_stability",
    "contact_balance",
    "ground_friction",
    "pelvis_momentum",
)


@dataclass
class CostVector:
    odometry_velocity: float = 0.0
    reference_configuration: float = 0.0
    foot_position: float = 0.0
    foot_orientation: float = 0.0
    foot_placement_cp: float = 0.0
    zmp_stability: float = 0.0
    contact_balance: float = 0.0
    ground_friction: float = 0.0
    pelvis_momentum: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in COST_NAMES])

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"cost {f.name} must be finite and >= 0, got {value}")


def _default_cutoffs() -> dict:
    # kappa = ln(2) / c0^2: the kernel reads 0.5 at a "noticeable deviation"
    # scale c0 per component (units of that component)
    scales = {
        "odometry_velocity": 0.3,        # m/s
        "reference_configuration": 0.5,  # rad (joint-vector norm)
        "foot_position": 0.10,           # m
        "foot_orientation": 0.25,        # rad
        "foot_placement_cp": 0.15,       # m
        "zmp_stability": 0.10,           # m
        "contact_balance": 180.0,        # N (~0.3 of body weight)
        "ground_friction": 100.0,        # N
        "pelvis_momentum": 0.6,          # rad/s
    }
    return {k: math.log(2.0) / v**2 for k, v in scales.items()}


@dataclass
class RewardConfig:
    """Component weights (sum to 1) and RBF cutoffs (1 / component unit^2)."""

    weights: dict = field(default_factory=lambda: {n: 1.0 / len(COST_NAMES)
                                                   for n in COST_NAMES})
    cutoffs: dict = field(default_factory=_default_cutoffs)
    constant_reward: bool = False   # ablation: +1 per step regardless of costs

    def validate(self) -> None:
        if set(self.weights) != set(COST_NAMES) or set(self.cutoffs) != set(COST_NAMES):
            raise ConfigError("weights and cutoffs must cover exactly the cost components")
        w = np.array([self.weights[n] for n in COST_NAMES])
        if np.any(w < 0.0):
            raise ConfigError("weights must be >= 0")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ConfigError(f"weights must sum to 1, got {w.sum()}")
        for n in COST_NAMES:
            if not self.cutoffs[n] > 0.0:
                raise ConfigError(f"cutoff for {n} must be > 0")

    def to_dict(self) -> dict:
        return {"weights": dict(self.weights), "cutoffs": dict(self.cutoffs),
                "constant_reward": self.constant_reward}

    @classmethod
    def from_dict(cls, d: dict) -> "RewardConfig":
        kwargs = {}
        if d.get("weights"):
            kwargs["weights"] = {k: float(v) for k, v in d["weights"].items()}
        if d.get("cutoffs"):
            kwargs["cutoffs"] = {k: float(v) for k, v in d["cutoffs"].items()}
        kwargs["constant_reward"] = bool(d.get("constant_reward", False))
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


@dataclass
class ReferenceFrameData:
    """Per-step reference values for every tracked feature."""

    joint_pos: np.ndarray                 # (6,)
    odom_velocity: np.ndarray             # (3,) d/dt (x, y, yaw)
    cp_rel: np.ndarray                    # (2,) capture point in odometry frame
    foot_rel_pos: np.ndarray              # (3,)
    foot_rel_quat: np.ndarray             # (4,)
    pitch_rate: float = 0.0               # reference mean pelvis angular rate
    contact_r: bool = True
    contact_l: bool = True


def rbf_kernel(c: float, kappa: float) -> float:
    """exp(-kappa c^2), mapping a cost to (0, 1]."""
    if kappa <= 0.0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    return math.exp(-kappa * c * c)


def total_reward(costs: CostVector, config: RewardConfig) -> float:
    """Weighted kernel sum; strictly positive, at most 1.

    The kernels are positive in exact arithmetic but underflow to zero in
    float64 for extreme costs; the tiny floor keeps the always-positive
    contract the termination logic relies on.  The upper clamp absorbs the
    few ulps of float summation noise above 1 when all kernels saturate.
    """
    if config.constant_reward:
        return 1.0
    r = 0.0
    for name in COST_NAMES:
        r += config.weights[name] * rbf_kernel(getattr(costs, name), config.cutoffs[name])
    return min(max(r, 1e-300), 1.0)


@dataclass
class StepAverages:
    """Inner-tick averages accumulated by the environment loop."""

    odom_velocity: np.ndarray   # (3,) mean d/dt (x, y, yaw) since last policy step
    pitch_rate: float           # mean pelvis pitch rate


class RewardComputer:
    """Computes the cost vector per policy step.

    Holds the last grounded ZMP cost so the stability term stays continuous
    across flight phases instead of jumping when contact is lost.
    """

    def __init__(self, model: ModelConfig, config: RewardConfig):
        config.validate()
        self.model = model
        self.config = config
        self._zmp_hold: float | None = None

    def reset(self) -> None:
        self._zmp_hold = None

    def compute_costs(self, state: SimState, feats: FeatureBundle,
                      averages: StepAverages, ref: ReferenceFrameData) -> CostVector:
        c = CostVector()
        c.odometry_velocity = float(np.linalg.norm(
            averages.odom_velocity - ref.odom_velocity))
        c.reference_configuration = float(np.linalg.norm(
            state.joint_pos - ref.joint_pos))

        c.foot_position = float(np.linalg.norm(feats.foot_rel_pos - ref.foot_rel_pos))
        c.foot_orientation = rotation_error(feats.foot_rel_quat, ref.foot_rel_quat)

        odom = feats.odom
        cp_rel = feats.cp - np.array([odom.x, odom.y])
        if odom.yaw != 0.0:
            cy, sy = math.cos(odom.yaw), math.sin(odom.yaw)
            cp_rel = np.array([cy * cp_rel[0] + sy * cp_rel[1],
                               -sy * cp_rel[0] + cy * cp_rel[1]])
        c.foot_placement_cp = float(np.linalg.norm(cp_rel - ref.cp_rel))

        if feats.zmp_point is None:
            c.zmp_stability = self._zmp_hold if self._zmp_hold is not None else 0.0
        else:
            c.zmp_stability = float(np.linalg.norm(feats.zmp_point - feats.support))
            self._zmp_hold = c.zmp_stability

        carried = (feats.fz_r * (1.0 if feats.contact_r else 0.0)
                   + feats.fz_l * (1.0 if feats.contact_l else 0.0))
        c.contact_balance = abs(carried - self.model.weight)
        c.ground_friction = float(np.linalg.norm(feats.tangential))
        c.pelvis_momentum = abs(averages.pitch_rate - ref.pitch_rate)
        c.validate()
        return c
