"""Rollout collection across workers.

Each worker owns one simulator and a frozen policy snapshot; episode seeds
derive from (run seed, iteration, worker, episode), so the collected batch is
identical regardless of scheduling. Batch assembly downstream sorts fragments
by (worker id, fragment index).
"""

from __future__ import annotations

import multiprocessing as mp

import numpy as np

from ..bipedsim import BipedSim
from ..envloop import PolicySnapshot, make_references, run_episode
from ..policynet import NormStats, PolicyParams
from ..ppo import Rollout
from .config import RunConfig

# per-process environment cache (multiprocessing initializer fills it)
_ENV: dict = {}


def _build_env(cfg_dict: dict) -> dict:
    cfg = RunConfig.from_dict(cfg_dict)
    sim = BipedSim(cfg.model)
    refs = make_references(sim, cfg.episode)
    return {"cfg": cfg, "sim": sim, "refs": refs}


def _init_pool(cfg_dict: dict) -> None:
    _ENV.update(_build_env(cfg_dict))


def episode_rng(seed: int, iteration: int, worker: int, episode: int,
                ) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, iteration, worker, episode])))


def _collect_worker(env: dict, snapshot: PolicySnapshot, iteration: int,
                    worker: int, quota: int, run_seed: int) -> list[Rollout]:
    cfg = env["cfg"]
    sim = env["sim"]
    refs = env["refs"]
    rollouts: list[Rollout] = []
    collected = 0
    episode = 0
    while collected < quota:
        rng = episode_rng(run_seed, iteration, worker, episode)
        roll = run_episode(
            sim, snapshot, cfg.episode, cfg.reward, cfg.termination, rng,
            references=refs, max_steps=quota - collected,
            worker_id=worker, fragment_index=episode,
            episode_seed=(run_seed, iteration, worker, episode))
        rollouts.append(roll)
        collected += roll.length
        episode += 1
        if roll.length == 0:
            break
    return rollouts


def _pool_task(args) -> list[Rollout]:
    snapshot_arrays, iteration, worker, quota, run_seed = args
    snapshot = _unpack_snapshot(snapshot_arrays)
    return _collect_worker(_ENV, snapshot, iteration, worker, quota, run_seed)


def _pack_snapshot(snapshot: PolicySnapshot) -> dict:
    return {
        "actor": snapshot.params.actor,
        "critic": snapshot.params.critic,
        "sigma": snapshot.params.sigma,
        "obs_dim": snapshot.params.obs_dim,
        "act_dim": snapshot.params.act_dim,
        "stats_mean": snapshot.stats.mean,
        "stats_m2": snapshot.stats.m2,
        "stats_count": snapshot.stats.count,
    }


def _unpack_snapshot(d: dict) -> PolicySnapshot:
    params = PolicyParams(actor=d["actor"], critic=d["critic"], sigma=d["sigma"],
                          obs_dim=d["obs_dim"], act_dim=d["act_dim"])
    stats = NormStats(mean=d["stats_mean"], m2=d["stats_m2"], count=d["stats_count"])
    return PolicySnapshot(params=params, stats=stats)


class RolloutCollector:
    """Serial or process-pooled rollout collection with identical results."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.workers = cfg.train.workers
        self._pool = None
        self._env = None
        if self.workers > 1:
            ctx = mp.get_context("fork")
            self._pool = ctx.Pool(self.workers, initializer=_init_pool,
                                  initargs=(cfg.to_dict(),))
        else:
            self._env = _build_env(cfg.to_dict())

    def collect(self, snapshot: PolicySnapshot, iteration: int) -> list[Rollout]:
        quota = -(-self.cfg.train.batch_steps // self.workers)  # ceil division
        if self._pool is None:
            out: list[Rollout] = []
            for w in range(self.workers):
                out.extend(_collect_worker(self._env, snapshot, iteration, w,
                                           quota, self.cfg.seed))
            return out
        packed = _pack_snapshot(snapshot)
        tasks = [(packed, iteration, w, quota, self.cfg.seed)
                 for w in range(self.workers)]
        results = self._pool.map(_pool_task, tasks)
        out = []
        for r in results:
            out.extend(r)
        return out

    def close(self) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    @property
    def references(self):
        if self._env is not None:
            return self._env["refs"]
        return _build_env(self.cfg.to_dict())["refs"]

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
