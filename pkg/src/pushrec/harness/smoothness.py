"""Closed-loop smoothness comparison between two checkpoints."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..bipedsim import BipedSim
from ..disturbance import PushEvent
from ..envloop import make_references
from .config import RunConfig
from .evalrun import eval_episode, load_snapshot
from .logs import REPORT_VERSION


def action_total_variation(mu: np.ndarray) -> float:
    """Mean per-step L1 change of the policy mean over a trajectory."""
    if len(mu) < 2:
        return 0.0
    return float(np.abs(np.diff(mu, axis=0)).sum(axis=1).mean())


def torque_sign_flip_rate(u: np.ndarray, deadband: float = 0.5) -> float:
    """Fraction of consecutive torque samples that flip sign (per joint,
    averaged), ignoring magnitudes inside the deadband."""
    if len(u) < 2:
        return 0.0
    s = np.where(np.abs(u) <= deadband, 0.0, np.sign(u))
    flips = (s[1:] * s[:-1]) < 0.0
    return float(flips.mean())


def default_push_script(cfg: RunConfig) -> list[PushEvent]:
    """Fixed, seed-independent push script shared by both checkpoints."""
    mag = cfg.episode.push_magnitude
    dur = cfg.episode.push_duration
    angles = [0.0, math.pi, 0.25 * math.pi, 1.25 * math.pi, 0.5 * math.pi]
    return [PushEvent(start=3.0 * (i + 1), duration=dur,
                      magnitude=0.6 * mag, angle=a, point=cfg.episode.push_point)
            for i, a in enumerate(angles)]


def smoothness_report(cfg: RunConfig, checkpoint_a, checkpoint_b, out_dir, *,
                      label_a: str = "a", label_b: str = "b",
                      horizon: float | None = None) -> dict:
    """Roll both checkpoints on the identical push script and compare
    action total variation and torque sign-flip rates."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = RunConfig.from_dict(cfg.to_dict())
    probe.episode.pushes_enabled = False
    if horizon is not None:
        probe.episode.horizon = horizon
    for name in ("noise_joint_pos", "noise_joint_vel", "noise_base_pos",
                 "noise_base_pitch", "noise_base_vel", "noise_base_pitch_rate"):
        setattr(probe.episode, name, 0.0)
    script = default_push_script(probe)
    sim = BipedSim(probe.model)
    refs = make_references(sim, probe.episode)

    report = {"type": "smoothness_report", "version": REPORT_VERSION,
              "push_script": [{"start": p.start, "angle": p.angle,
                               "magnitude": p.magnitude, "duration": p.duration}
                              for p in script],
              "checkpoints": {}}
    for label, ck in ((label_a, checkpoint_a), (label_b, checkpoint_b)):
        snapshot, _ = load_snapshot(ck)
        traj_log = out / f"traj_{label}.jsonl"
        roll = eval_episode(probe, snapshot, (probe.seed, 0x5300),
                            deterministic=True, pushes=script, sim=sim,
                            references=refs, log_path=traj_log,
                            checkpoint_ref=str(ck))
        from .logs import TRAJECTORY_VERSION, read_jsonl
        _, records = read_jsonl(traj_log, "trajectory", TRAJECTORY_VERSION)
        u = np.array([r["u"] for r in records if r.get("type") == "step"])
        report["checkpoints"][label] = {
            "checkpoint": str(ck),
            "steps": roll.length,
            "terminated": roll.terminated,
            "action_total_variation": action_total_variation(roll.mu),
            "torque_sign_flip_rate": torque_sign_flip_rate(u),
            "trace": {
                "t": [round(0.04 * (i + 1), 4) for i in range(roll.length)],
                "mu_l_knee": [float(m[1]) for m in roll.mu],
                "q_l_knee": [float(r["q"][4]) for r in records
                             if r.get("type") == "step"],
                "u_l_knee": [float(uu[1]) for uu in u],
            },
        }
    (out / "smoothness_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=1))
    return report
