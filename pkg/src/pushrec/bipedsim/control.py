"""Decentralized PD control and velocity-command integration."""

from __future__ import annotations

import logging

import numpy as np

from .model import ModelConfig, N_JOINTS
from .state import ControlTarget, SimState

log = logging.getLogger(__name__)


def pd_control(target: ControlTarget, state: SimState, config: ModelConfig) -> np.ndarray:
    """Per-joint PD torque, saturated at the motor torque limits.

    No cross-joint coupling: u_i depends only on joint i's tracking error.
    """
    kp = np.asarray(config.kp)
    kd = np.asarray(config.kd)
    lim = np.asarray(config.torque_limit)
    if not (np.all(np.isfinite(target.q)) and np.all(np.isfinite(target.qd))):
        raise ValueError("non-finite control target")
    u = kp * (target.q - state.joint_pos) + kd * (target.qd - state.joint_vel)
    return np.clip(u, -lim, lim)


def integrate_action(prev: ControlTarget, velocity_command, dt_policy: float,
                     config: ModelConfig) -> ControlTarget:
    """Integrate a target-velocity command into consistent position targets.

    The position target accumulates clamped velocity commands and is pinned to
    the joint position bounds; the velocity target passes the (clamped)
    command through so the PD tracks a consistent pair.
    """
    cmd = np.asarray(velocity_command, dtype=float)
    if cmd.shape != (N_JOINTS,):
        raise ValueError(f"velocity command must have shape ({N_JOINTS},)")
    vlim = np.asarray(config.velocity_limit)
    clamped = np.clip(cmd, -vlim, vlim)
    if np.any(clamped != cmd):
        log.debug("velocity command clamped to joint limits: %s -> %s", cmd, clamped)
    q = np.clip(prev.q + clamped * dt_policy,
                np.asarray(config.joint_lower), np.asarray(config.joint_upper))
    return ControlTarget(q=q, qd=clamped)
