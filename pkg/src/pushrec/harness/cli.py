"""Command-line entry points: train, ablate, sweep, smoothness, play, replay."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig


def _load_cfg(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "workers", None):
        cfg.train.workers = args.workers
    if getattr(args, "steps", None):
        cfg.total_steps = args.steps
    cfg.validate()
    return cfg


def _add_common(p, out_required: bool = True) -> None:
    p.add_argument("-c", "--config", help="YAML run configuration")
    p.add_argument("--seed", type=int, default=None, help="override run seed")
    p.add_argument("-o", "--out", required=out_required, help="output directory")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pushrec",
        description="Standing push recovery: training, evaluation, playground.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run PPO training")
    _add_common(p)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--steps", type=int, default=None, help="total step budget")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--ablation", default="full",
                   choices=("full", "reward_plus_one", "no_safety_terminations"))

    p = sub.add_parser("ablate", help="run the three ablation variants")
    _add_common(p)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)

    p = sub.add_parser("sweep", help="polar push-recovery force sweep")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--angles", type=int, default=16)
    p.add_argument("--points", default="pelvis",
                   help="comma-separated application points")
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--settle", type=float, default=10.0)

    p = sub.add_parser("smoothness", help="compare two checkpoints' smoothness")
    _add_common(p)
    p.add_argument("--checkpoint-a", required=True)
    p.add_argument("--checkpoint-b", required=True)
    p.add_argument("--horizon", type=float, default=None)

    p = sub.add_parser("play", help="serve the interactive playground")
    _add_common(p, out_required=False)
    p.add_argument("--checkpoint", default=None,
                   help="policy checkpoint (default: PD hold)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--script", default=None,
                   help="JSON push script: run headless and write a trajectory log")
    p.add_argument("--max-seconds", type=float, default=None)

    p = sub.add_parser("replay", help="re-run a trajectory log and verify it")
    p.add_argument("--log", required=True)
    p.add_argument("--checkpoint", default=None)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")

    if args.command == "train":
        from .train import apply_ablation, train
        cfg = apply_ablation(_load_cfg(args), args.ablation)
        final = train(cfg, args.out, resume_from=args.resume)
        print(f"final checkpoint: {final}")
    elif args.command == "ablate":
        from .train import ablate
        report = ablate(_load_cfg(args), args.out)
        print(f"ablation report: {report}")
    elif args.command == "sweep":
        from .sweep import sweep_forces
        cfg = _load_cfg(args)
        results = sweep_forces(
            cfg, args.checkpoint, args.out, n_angles=args.angles,
            points=tuple(args.points.split(",")), duration=args.duration,
            depth=args.depth, settle=args.settle)
        for res in results:
            print(f"point {res.point}: policy envelope "
                  f"{[round(f, 1) for f in res.policy_envelope]}")
    elif args.command == "smoothness":
        from .smoothness import smoothness_report
        cfg = _load_cfg(args)
        report = smoothness_report(cfg, args.checkpoint_a, args.checkpoint_b,
                                   args.out, horizon=args.horizon)
        for label, data in report["checkpoints"].items():
            print(f"{label}: TV={data['action_total_variation']:.4f} "
                  f"flips={data['torque_sign_flip_rate']:.4f}")
    elif args.command == "play":
        cfg = _load_cfg(args)
        if args.script:
            from .evalrun import eval_episode, load_snapshot, pd_hold_snapshot, \
                pushes_from_script
            script = json.loads(Path(args.script).read_text())
            pushes = pushes_from_script(script)
            if args.checkpoint:
                snapshot, _ = load_snapshot(args.checkpoint)
                ref = args.checkpoint
            else:
                snapshot, ref = pd_hold_snapshot(cfg), "pd-hold"
            out = Path(args.out or ".") / "trajectory.jsonl"
            roll = eval_episode(cfg, snapshot, (cfg.seed, 0xA1),
                                pushes=pushes, log_path=out, checkpoint_ref=ref)
            print(f"episode: {roll.length} steps, terminated={roll.terminated} "
                  f"cause={roll.cause}; log: {out}")
        else:
            from .playground import serve_playground
            serve_playground(cfg, args.checkpoint, host=args.host,
                             port=args.port, seed=cfg.seed,
                             max_seconds=args.max_seconds)
    elif args.command == "replay":
        from .evalrun import ReplayMismatch, replay
        try:
            report = replay(args.log, args.checkpoint)
        except ReplayMismatch as exc:
            print(f"REPLAY MISMATCH: {exc}", file=sys.stderr)
            return 1
        print(f"replay OK: {report}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
