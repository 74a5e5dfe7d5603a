"""Proprioceptive observation synthesis.

The observation vector mirrors what cheap onboard sensors can deliver: IMU
pitch and pitch rate, motor encoder positions, encoder-differenced velocities,
the previous targets, and the four vertical foot-sensor forces.  Base
position, height and linear velocity are deliberately absent: they are not
observable on the real system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelConfig, N_JOINTS, N_SENSED_CONTACTS
from .state import ControlTarget, SimState

# (name, length) slices, in order
OBS_LAYOUT = (
    ("imu_pitch", 1),
    ("imu_pitch_rate", 1),
    ("joint_pos", N_JOINTS),
    ("joint_vel_fd", N_JOINTS),
    ("prev_target_pos", N_JOINTS),
    ("foot_force_z", N_SENSED_CONTACTS),
)
OBS_DIM = sum(n for _, n in OBS_LAYOUT)


def layout_slices() -> dict[str, slice]:
    out = {}
    start = 0
    for name, n in OBS_LAYOUT:
        out[name] = slice(start, start + n)
        start += n
    return out


_SLICES = layout_slices()


@dataclass
class Observation:
    vec: np.ndarray

    def __getitem__(self, name: str) -> np.ndarray:
        return self.vec[_SLICES[name]]


class Observer:
    """Stateful sensor pipeline.

    Joint velocities are finite differences of successive (noisy) encoder
    readings at the policy rate, zero on the first step after a reset.
    """

    def __init__(self, config: ModelConfig, dt_policy: float):
        self.config = config
        self.dt_policy = dt_policy
        self._prev_encoder: np.ndarray | None = None

    def reset(self) -> None:
        self._prev_encoder = None

    def observe(self, state: SimState, prev_target: ControlTarget,
                rng: np.random.Generator) -> Observation:
        cfg = self.config
        pitch = state.base_pitch
        rate = state.base_pitch_rate
        encoders = state.joint_pos.copy()
        forces = state.contact_fz[:N_SENSED_CONTACTS].copy()
        if cfg.noise_imu_angle > 0.0:
            pitch += cfg.noise_imu_angle * rng.standard_normal()
        if cfg.noise_imu_rate > 0.0:
            rate += cfg.noise_imu_rate * rng.standard_normal()
        if cfg.noise_encoder > 0.0:
            encoders += cfg.noise_encoder * rng.standard_normal(N_JOINTS)
        if cfg.noise_force > 0.0:
            forces += cfg.noise_force * rng.standard_normal(N_SENSED_CONTACTS)

        if self._prev_encoder is None:
            qd_fd = np.zeros(N_JOINTS)
        else:
            qd_fd = (encoders - self._prev_encoder) / self.dt_policy
        self._prev_encoder = encoders

        vec = np.concatenate([
            [pitch], [rate], encoders, qd_fd, prev_target.q, forces])
        return Observation(vec=vec)
