"""Polar push-recovery envelope: bisection over peak force per direction."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..bipedsim import BipedSim
from ..disturbance import PushEvent
from ..envloop import PolicySnapshot, make_references
from .config import RunConfig
from .evalrun import eval_episode, pd_hold_snapshot
from .logs import REPORT_VERSION

log = logging.getLogger(__name__)


@dataclass
class SweepResult:
    angles: list[float]
    point: str
    policy_envelope: list[float]        # max recoverable peak force per angle
    baseline_envelope: list[float]
    traces: dict = field(default_factory=dict)   # per angle: bisection history
    converged: dict = field(default_factory=dict)

    def validate(self) -> None:
        for env in (self.policy_envelope, self.baseline_envelope):
            if any(f < 0 for f in env):
                raise ValueError("envelope forces must be >= 0")
        for key, trace in self.traces.items():
            lows = [t["low"] for t in trace]
            if lows != sorted(lows):
                raise ValueError(f"bisection trace not monotone for {key}")


def _survives(cfg: RunConfig, sim: BipedSim, refs, snapshot: PolicySnapshot,
              magnitude: float, angle: float, point: str, push_time: float,
              duration: float, settle: float) -> bool:
    probe_cfg = RunConfig.from_dict(cfg.to_dict())
    probe_cfg.episode.horizon = push_time + duration + settle
    probe_cfg.episode.pushes_enabled = False
    # deterministic evaluation: reference spawn, no initial noise
    for name in ("noise_joint_pos", "noise_joint_vel", "noise_base_pos",
                 "noise_base_pitch", "noise_base_vel", "noise_base_pitch_rate"):
        setattr(probe_cfg.episode, name, 0.0)
    push = [PushEvent(start=push_time, duration=duration, magnitude=magnitude,
                      angle=angle, point=point)]
    roll = eval_episode(probe_cfg, snapshot, (cfg.seed, 0xB15EC7),
                        deterministic=True, pushes=push, sim=sim,
                        references=refs)
    return not roll.terminated and not roll.abnormal


def _bisect_angle(cfg, sim, refs, snapshot, angle, point, duration, settle,
                  depth, push_time, force_cap) -> tuple[float, list, bool]:
    trace = []
    if not _survives(cfg, sim, refs, snapshot, 0.0, angle, point, push_time,
                     duration, settle):
        return 0.0, [{"low": 0.0, "high": 0.0}], False
    low = 0.0
    high = 50.0
    while _survives(cfg, sim, refs, snapshot, high, angle, point, push_time,
                    duration, settle):
        low = high
        high *= 2.0
        if high > force_cap:
            trace.append({"low": low, "high": float("inf")})
            return low, trace, False
    trace.append({"low": low, "high": high})
    for _ in range(depth):
        mid = 0.5 * (low + high)
        if _survives(cfg, sim, refs, snapshot, mid, angle, point, push_time,
                     duration, settle):
            low = mid
        else:
            high = mid
        trace.append({"low": low, "high": high})
    return low, trace, True


def sweep_forces(cfg: RunConfig, checkpoint_path, out_dir, *,
                 n_angles: int = 16, points: tuple[str, ...] = ("pelvis",),
                 duration: float | None = None, settle: float = 10.0,
                 depth: int = 8, push_time: float = 2.0,
                 force_cap: float = 6000.0) -> list[SweepResult]:
    """Maximum recoverable bell-push peak force per direction, for the trained
    policy and the PD-hold baseline, with fixed seeds."""
    from .evalrun import load_snapshot

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    duration = duration if duration is not None else cfg.episode.push_duration
    sim = BipedSim(cfg.model)
    refs = make_references(sim, cfg.episode)
    policy, _ = load_snapshot(checkpoint_path)
    baseline = pd_hold_snapshot(cfg)
    angles = [2.0 * math.pi * k / n_angles for k in range(n_angles)]

    results = []
    for point in points:
        res = SweepResult(angles=angles, point=point, policy_envelope=[],
                          baseline_envelope=[])
        for name, snap, env in (("policy", policy, res.policy_envelope),
                                ("baseline", baseline, res.baseline_envelope)):
            for angle in angles:
                force, trace, ok = _bisect_angle(
                    cfg, sim, refs, snap, angle, point, duration, settle,
                    depth, push_time, force_cap)
                env.append(force)
                res.traces[f"{name}_{angle:.4f}"] = trace
                res.converged[f"{name}_{angle:.4f}"] = ok
                if not ok:
                    log.warning("bisection did not converge for %s at angle %.3f",
                                name, angle)
        res.validate()
        results.append(res)

    payload = {
        "type": "sweep_report", "version": REPORT_VERSION,
        "duration": duration, "settle": settle, "depth": depth,
        "results": [{
            "point": r.point, "angles": r.angles,
            "policy_envelope": r.policy_envelope,
            "baseline_envelope": r.baseline_envelope,
            "traces": r.traces, "converged": r.converged,
        } for r in results],
    }
    (out / "sweep_report.json").write_text(json.dumps(payload, sort_keys=True,
                                                      indent=1))
    return results
