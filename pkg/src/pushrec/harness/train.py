"""Training orchestration and the ablation runner."""

from __future__ import annotations

import copy
import logging
import time
from pathlib import Path

import numpy as np

from ..bipedsim import OBS_DIM, N_JOINTS
from ..envloop import PolicySnapshot
from ..policynet import (NormStats, init_params, load_checkpoint, save_checkpoint)
from ..ppo import AdamState, train_iteration
from .config import RunConfig
from .logs import METRICS_VERSION, REPORT_VERSION, JsonlWriter, read_jsonl
from .workers import RolloutCollector

log = logging.getLogger(__name__)

ABLATIONS = ("full", "reward_plus_one", "no_safety_terminations")


def apply_ablation(cfg: RunConfig, ablation: str) -> RunConfig:
    out = RunConfig.from_dict(copy.deepcopy(cfg.to_dict()))
    if ablation == "full":
        pass
    elif ablation == "reward_plus_one":
        out.reward.constant_reward = True
    elif ablation == "no_safety_terminations":
        out.termination.fall_only = True
    else:
        raise ValueError(f"unknown ablation {ablation!r}; known: {ABLATIONS}")
    return out


def _trainer_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, 0x7EA1, iteration])))


def train(cfg: RunConfig, out_dir, resume_from=None) -> Path:
    """Run PPO to the step budget; returns the final checkpoint path.

    Everything is reproducible from (config, seed): worker episodes and the
    trainer's minibatch shuffling derive their generators from them, so a
    resumed run continues the identical metrics stream.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "resolved_config.yaml")
    cfg_hash = cfg.hash

    start_iteration = 0
    steps_total = 0
    if resume_from is not None:
        params, stats, meta = load_checkpoint(resume_from)
        if meta["config_hash"] != cfg_hash:
            raise ValueError("checkpoint was produced under a different config")
        opt = AdamState.create(params)
        extra = meta.get("extra", {})
        start_iteration = int(extra.get("iteration", 0))
        steps_total = int(extra.get("steps_total", 0))
        _load_adam(resume_from, opt)
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed])))
        params = init_params(OBS_DIM, N_JOINTS, rng, hidden=cfg.hidden,
                             sigma=cfg.sigma)
        stats = NormStats.create(OBS_DIM)
        opt = AdamState.create(params)

    n_iterations = -(-cfg.total_steps // cfg.train.batch_steps)
    metrics_path = out / "metrics.jsonl"
    mode = "resume" if resume_from else "fresh"
    with RolloutCollector(cfg) as collector, \
            JsonlWriter(metrics_path if mode == "fresh" else out / "metrics_resume.jsonl",
                        kind="metrics", version=METRICS_VERSION,
                        config_hash=cfg_hash, seed=cfg.seed) as writer:
        for iteration in range(start_iteration, n_iterations):
            t0 = time.time()
            snapshot = PolicySnapshot(params=params, stats=stats)
            rollouts = collector.collect(snapshot, iteration)
            params, stats, opt, metrics = train_iteration(
                rollouts, params, stats, opt, cfg.train,
                _trainer_rng(cfg.seed, iteration))
            steps_total += metrics["steps"]
            record = {"type": "iteration", "iteration": iteration,
                      "steps_total": steps_total, **metrics,
                      "wall_s": round(time.time() - t0, 3)}
            writer.write(record)
            writer.flush()
            log.info("iter %d: len=%.1f ret=%.1f causes=%s", iteration,
                     metrics["mean_episode_length"], metrics["mean_episode_return"],
                     metrics["termination_rates"])
            if (iteration + 1) % cfg.checkpoint_every == 0:
                _save(out / f"ck_{iteration + 1:05d}.npz", params, stats, cfg_hash,
                      iteration + 1, steps_total, opt)
    final = out / "ck_final.npz"
    _save(final, params, stats, cfg_hash, n_iterations, steps_total, opt)
    return final


def _save(path, params, stats, cfg_hash, iteration, steps_total, opt: AdamState):
    save_checkpoint(path, params, stats, cfg_hash,
                    extra={"iteration": iteration, "steps_total": steps_total})
    np.savez(str(path).replace(".npz", "_adam.npz"),
             step=np.array([opt.step]),
             **{f"m_{k}": v for k, v in opt.m.items()},
             **{f"v_{k}": v for k, v in opt.v.items()})


def _load_adam(ck_path, opt: AdamState) -> None:
    adam_path = str(ck_path).replace(".npz", "_adam.npz")
    if not Path(adam_path).exists():
        return
    with np.load(adam_path) as data:
        opt.step = int(data["step"][0])
        for key in data.files:
            if key.startswith("m_"):
                opt.m[key[2:]] = data[key]
            elif key.startswith("v_"):
                opt.v[key[2:]] = data[key]


def ablate(cfg: RunConfig, out_dir) -> Path:
    """Run the three ablation variants with shared seeds; emit a comparison."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"type": "ablation_report", "version": REPORT_VERSION, "variants": {}}
    for name in ABLATIONS:
        variant_cfg = apply_ablation(cfg, name)
        variant_dir = out / name
        train(variant_cfg, variant_dir)
        _, records = read_jsonl(variant_dir / "metrics.jsonl", "metrics",
                                METRICS_VERSION)
        iters = [r for r in records if r.get("type") == "iteration"]
        report["variants"][name] = {
            "iterations": len(iters),
            "steps": [r["steps_total"] for r in iters],
            "mean_episode_length": [r["mean_episode_length"] for r in iters],
            "mean_episode_return": [r["mean_episode_return"] for r in iters],
            "mean_step_reward": [r["mean_step_reward"] for r in iters],
            "termination_rates_final": iters[-1]["termination_rates"] if iters else {},
        }
    report_path = out / "ablation_report.json"
    import json
    report_path.write_text(json.dumps(report, sort_keys=True, indent=1))
    emit_plot_data(report, out / "ablation_plot.json")
    return report_path


def emit_plot_data(report: dict, path) -> dict:
    """Convert an ablation report into plottable curve series (round-trips)."""
    if report.get("version") != REPORT_VERSION:
        raise ValueError(f"unsupported report version {report.get('version')!r}")
    series = []
    for name, data in sorted(report["variants"].items()):
        series.append({"label": name, "x": data["steps"],
                       "y_length": data["mean_episode_length"],
                       "y_return": data["mean_episode_return"]})
    plot_data = {"version": REPORT_VERSION, "series": series,
                 "x_label": "environment steps", "y_label": "episode length / return"}
    import json
    Path(path).write_text(json.dumps(plot_data, sort_keys=True, indent=1))
    try:
        _render_png(plot_data, str(path).replace(".json", ".png"))
    except ImportError:
        log.info("matplotlib unavailable; skipped PNG rendering")
    return plot_data


def _render_png(plot_data: dict, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for s in plot_data["series"]:
        axes[0].plot(s["x"], s["y_length"], label=s["label"])
        axes[1].plot(s["x"], s["y_return"], label=s["label"])
    axes[0].set_ylabel("mean episode length")
    axes[1].set_ylabel("mean episode return")
    for ax in axes:
        ax.set_xlabel(plot_data["x_label"])
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
