"""Scripted evaluation episodes, trajectory logging, and bit-exact replay."""

from __future__ import annotations

import numpy as np

from ..bipedsim import BipedSim
from ..disturbance import PushEvent
from ..envloop import PolicySnapshot, make_references, run_episode
from ..policynet import NormStats, load_checkpoint
from ..ppo import Rollout
from .config import RunConfig
from .logs import TRAJECTORY_VERSION, JsonlWriter, read_jsonl


def pd_hold_snapshot(cfg: RunConfig) -> PolicySnapshot:
    """Zero-action policy: pure PD tracking of the reference pose."""
    from ..bipedsim import OBS_DIM, N_JOINTS
    from ..policynet import init_params

    params = init_params(OBS_DIM, N_JOINTS,
                         np.random.Generator(np.random.PCG64(0)),
                         hidden=cfg.hidden, sigma=cfg.sigma)
    params.actor[-1] = (np.zeros_like(params.actor[-1][0]),
                        np.zeros_like(params.actor[-1][1]))
    return PolicySnapshot(params=params, stats=NormStats.create(OBS_DIM))


def load_snapshot(checkpoint_path) -> tuple[PolicySnapshot, dict]:
    params, stats, meta = load_checkpoint(checkpoint_path)
    return PolicySnapshot(params=params, stats=stats), meta


def pushes_from_script(script: list[dict]) -> list[PushEvent]:
    return [PushEvent(start=float(e["start"]), duration=float(e["duration"]),
                      magnitude=float(e["magnitude"]), angle=float(e["angle"]),
                      point=e.get("point", "pelvis")) for e in script]


def eval_episode(cfg: RunConfig, snapshot: PolicySnapshot, seed_tuple: tuple,
                 *, deterministic: bool = True,
                 pushes: list[PushEvent] | None = None,
                 log_path=None, checkpoint_ref: str = "",
                 references=None, sim: BipedSim | None = None) -> Rollout:
    """Run one evaluation episode, optionally writing a trajectory log."""
    sim = sim or BipedSim(cfg.model)
    references = references or make_references(sim, cfg.episode)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(seed_tuple))))

    writer = None
    if log_path is not None:
        writer = JsonlWriter(
            log_path, kind="trajectory", version=TRAJECTORY_VERSION,
            config=cfg.to_dict(), config_hash=cfg.hash,
            episode_seed=list(seed_tuple), deterministic=deterministic,
            checkpoint=str(checkpoint_ref),
            pushes=None if pushes is None else [
                {"start": p.start, "duration": p.duration, "magnitude": p.magnitude,
                 "angle": p.angle, "point": p.point} for p in pushes])

    def callback(rec):
        if writer is None:
            return
        writer.write({
            "type": "step", "t": rec.t, "reward": rec.reward,
            "costs": list(rec.costs.as_array()),
            "cause": rec.verdict.cause,
            "action": list(rec.action), "mu": list(rec.mu),
            "q": list(rec.state.q), "v": list(rec.state.v),
            "u": list(rec.state.u),
        })

    try:
        roll = run_episode(
            sim, snapshot, cfg.episode, cfg.reward, cfg.termination, rng,
            deterministic=deterministic, push_events=pushes,
            references=references, step_callback=callback,
            episode_seed=tuple(seed_tuple))
    finally:
        if writer is not None:
            writer.close()
    return roll


class ReplayMismatch(AssertionError):
    pass


def replay(log_path, checkpoint_path=None) -> dict:
    """Re-run a logged episode from its header and compare bit-exactly.

    Rewards and verdict causes must match exactly; raises ReplayMismatch
    otherwise.  Returns a small report on success.
    """
    header, records = read_jsonl(log_path, "trajectory", TRAJECTORY_VERSION)
    cfg = RunConfig.from_dict(header["config"])
    if cfg.hash != header["config_hash"]:
        raise ReplayMismatch("config hash mismatch: log header is inconsistent")
    if checkpoint_path is None:
        checkpoint_path = header.get("checkpoint") or None
    if checkpoint_path in ("", "pd-hold", None):
        snapshot = pd_hold_snapshot(cfg)
    else:
        snapshot, meta = load_snapshot(checkpoint_path)
        if meta["config_hash"] != header["config_hash"]:
            raise ReplayMismatch(
                "checkpoint config hash does not match the log header")
    pushes = None
    if header.get("pushes") is not None:
        pushes = pushes_from_script(header["pushes"])
    roll = eval_episode(cfg, snapshot, tuple(header["episode_seed"]),
                        deterministic=header["deterministic"], pushes=pushes)

    steps = [r for r in records if r.get("type") == "step"]
    if len(steps) != roll.length:
        raise ReplayMismatch(
            f"length mismatch: log has {len(steps)} steps, replay {roll.length}")
    logged_rewards = np.array([s["reward"] for s in steps])
    if not np.array_equal(logged_rewards, roll.rewards):
        bad = int(np.flatnonzero(logged_rewards != roll.rewards)[0])
        raise ReplayMismatch(f"reward mismatch at step {bad}")
    logged_causes = [s["cause"] for s in steps]
    replay_causes = ["none"] * roll.length
    if roll.terminated:
        replay_causes[-1] = roll.cause
    if logged_causes != replay_causes:
        raise ReplayMismatch("verdict mismatch")
    return {"steps": roll.length, "terminated": roll.terminated,
            "cause": roll.cause, "return": roll.episode_return,
            "bit_exact": True}
