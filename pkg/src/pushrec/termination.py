"""Episode termination conditions.

Six safety clauses evaluated at every policy step: pelvis pose bounds, foot
collision clearance, joint-stop impact speed, windowed odometry drift,
windowed transient tracking, and instantaneous actuation power.  Windowed
clauses stay inactive until their history window has filled.  The evaluation
order is fixed so the reported cause is deterministic.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .bipedsim import ModelConfig

CAUSES = ("pelvis_pose", "foot_collision", "joint_impact",
          "odometry_drift", "transient_tracking", "power", "none")

_EPS = 1e-9


@dataclass
class TerminationConfig:
    pelvis_height_min: float = 0.3
    roll_bounds: tuple[float, float] = (-0.4, 0.4)
    pitch_bounds: tuple[float, float] = (-0.25, 0.7)
    hull_clearance: float = 0.02
    impact_speed: float = 0.6
    odometry_window: float = 20.0
    odometry_bounds: tuple[float, float, float] = (2.0, 3.0, math.pi / 2.0)
    transient_window: float = 4.0
    transient_bound: float = 0.3
    # full-scale 3 kW rescaled by the desk model's mass ratio (60/135)
    power_limit: float = 3000.0 * 60.0 / 135.0
    fall_only: bool = False   # ablation: keep only the pelvis (fall) clause

    def validate(self) -> None:
        if self.odometry_window <= 0.0 or self.transient_window <= 0.0:
            raise ValueError("history windows must be positive")
        for name in ("pelvis_height_min", "hull_clearance", "impact_speed",
                     "transient_bound", "power_limit"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not all(b > 0.0 for b in self.odometry_bounds):
            raise ValueError("odometry bounds must be positive")

    def to_dict(self) -> dict:
        return {
            "pelvis_height_min": self.pelvis_height_min,
            "roll_bounds": list(self.roll_bounds),
            "pitch_bounds": list(self.pitch_bounds),
            "hull_clearance": self.hull_clearance,
            "impact_speed": self.impact_speed,
            "odometry_window": self.odometry_window,
            "odometry_bounds": list(self.odometry_bounds),
            "transient_window": self.transient_window,
            "transient_bound": self.transient_bound,
            "power_limit": self.power_limit,
            "fall_only": self.fall_only,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TerminationConfig":
        kwargs = dict(d)
        for key in ("roll_bounds", "pitch_bounds", "odometry_bounds"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


@dataclass
class Verdict:
    alive: bool
    cause: str = "none"
    value: float = 0.0

    def __post_init__(self):
        if self.cause not in CAUSES:
            raise ValueError(f"unknown cause {self.cause!r}")
        if (self.cause == "none") != self.alive:
            raise ValueError("cause must be 'none' exactly when alive")


@dataclass
class Sample:
    """Per-step slice of the state history the checker consumes."""

    t: float
    pelvis_height: float
    roll: float
    pitch: float
    hull_dist: float
    joint_pos: np.ndarray
    joint_vel: np.ndarray
    odom: np.ndarray            # (3,) x, y, yaw
    odom_ref: np.ndarray        # (3,) reference odometry at the same time
    tracking_error: float       # ||q_m - q_ref||_2
    power: float


class TerminationChecker:
    """Evaluates the termination clauses over ring-buffered history."""

    def __init__(self, config: TerminationConfig, model: ModelConfig):
        config.validate()
        self.config = config
        self.model = model
        self._odom_hist: deque = deque()
        self._err_hist: deque = deque()
        self._t0: float | None = None

    def reset(self) -> None:
        """Clear all history windows (episode start)."""
        self._odom_hist.clear()
        self._err_hist.clear()
        self._t0 = None

    def check(self, sample: Sample) -> Verdict:
        cfg = self.config
        t = sample.t
        if self._t0 is None:
            self._t0 = t
        self._odom_hist.append((t, sample.odom.copy(), sample.odom_ref.copy()))
        self._err_hist.append((t, sample.tracking_error))
        while self._odom_hist[0][0] < t - cfg.odometry_window - _EPS:
            self._odom_hist.popleft()
        while self._err_hist[0][0] < t - cfg.transient_window - _EPS:
            self._err_hist.popleft()

        # 1. pelvis pose
        if sample.pelvis_height <= cfg.pelvis_height_min:
            return Verdict(False, "pelvis_pose", sample.pelvis_height)
        if not cfg.roll_bounds[0] < sample.roll < cfg.roll_bounds[1]:
            return Verdict(False, "pelvis_pose", sample.roll)
        if not cfg.pitch_bounds[0] < sample.pitch < cfg.pitch_bounds[1]:
            return Verdict(False, "pelvis_pose", sample.pitch)
        if cfg.fall_only:
            return Verdict(True)

        # 2. foot collision clearance
        if sample.hull_dist <= cfg.hull_clearance:
            return Verdict(False, "foot_collision", sample.hull_dist)

        # 3. joint impact: unsafe only at/through a stop while moving fast
        lo = np.asarray(self.model.joint_lower)
        hi = np.asarray(self.model.joint_upper)
        for i in range(len(lo)):
            speed = abs(float(sample.joint_vel[i]))
            inside = lo[i] < sample.joint_pos[i] < hi[i]
            if speed >= cfg.impact_speed and not inside:
                return Verdict(False, "joint_impact", speed)

        # 4. windowed odometry drift (inactive until the window fills)
        if t - self._t0 >= cfg.odometry_window - _EPS:
            t_old, odom_old, ref_old = self._odom_hist[0]
            drift = (sample.odom - odom_old) - (sample.odom_ref - ref_old)
            for i, bound in enumerate(cfg.odometry_bounds):
                if abs(drift[i]) >= bound:
                    return Verdict(False, "odometry_drift", float(abs(drift[i])))

        # 5. windowed transient tracking: the error must have dipped below the
        # bound at least once during the whole window
        if t - self._t0 >= cfg.transient_window - _EPS:
            min_err = min(err for _, err in self._err_hist)
            if min_err >= cfg.transient_bound:
                return Verdict(False, "transient_tracking", min_err)

        # 6. actuation power
        if sample.power >= cfg.power_limit:
            return Verdict(False, "power", sample.power)

        return Verdict(True)
