"""Actor and critic MLPs, diagonal-Gaussian action head, observation normalization.

Both networks are two tanh hidden layers (64 units by default) with separate
parameters.  The actor's output layer is tanh-squashed, so action means live
in (-1, 1) normalized units; the environment scales them by the joint
velocity limits.  The standard deviation is fixed per dimension and is not a
trained parameter.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, const, param

CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


@dataclass
class PolicyParams:
    """Weights for actor and critic plus the fixed action std."""

    actor: list    # [(W, b), ...] with W (in, out)
    critic: list
    sigma: np.ndarray
    obs_dim: int
    act_dim: int

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            actor=[(w.copy(), b.copy()) for w, b in self.actor],
            critic=[(w.copy(), b.copy()) for w, b in self.critic],
            sigma=self.sigma.copy(), obs_dim=self.obs_dim, act_dim=self.act_dim)

    def flat(self) -> dict[str, np.ndarray]:
        out = {}
        for net, layers in (("actor", self.actor), ("critic", self.critic)):
            for i, (w, b) in enumerate(layers):
                out[f"{net}_w{i}"] = w
                out[f"{net}_b{i}"] = b
        return out


def init_params(obs_dim: int, act_dim: int, rng: np.random.Generator,
                hidden: tuple[int, ...] = (64, 64), sigma: float = 0.2,
                ) -> PolicyParams:
    """Orthogonal-style initialization with a small final actor gain.

    The small output gain keeps initial action means near zero, so the very
    first rollouts track the reference instead of flailing.
    """
    def build(out_dim: int, final_gain: float) -> list:
        layers = []
        dims = (obs_dim, *hidden, out_dim)
        for i in range(len(dims) - 1):
            gain = 5.0 / 3.0 if i < len(dims) - 2 else final_gain
            w = _orthogonal(rng, dims[i], dims[i + 1], gain)
            b = np.zeros(dims[i + 1])
            layers.append((w, b))
        return layers

    return PolicyParams(
        actor=build(act_dim, 0.01),
        critic=build(1, 1.0),
        sigma=np.full(act_dim, float(sigma)),
        obs_dim=obs_dim, act_dim=act_dim)


def _check_obs(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-1] != params.obs_dim:
        raise ShapeError(
            f"observation dim {obs.shape[-1]} != expected {params.obs_dim}")
    return obs


def forward_actor(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    """Deterministic action mean in (-1, 1) normalized units."""
    x = _check_obs(params, obs)
    for w, b in params.actor[:-1]:
        x = np.tanh(x @ w + b)
    w, b = params.actor[-1]
    return np.tanh(x @ w + b)


def forward_critic(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    x = _check_obs(params, obs)
    for w, b in params.critic[:-1]:
        x = np.tanh(x @ w + b)
    w, b = params.critic[-1]
    out = x @ w + b
    return out[..., 0]


def log_prob(mu: np.ndarray, sigma: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Diagonal-Gaussian log density, summed over action dimensions."""
    z = (action - mu) / sigma
    return -0.5 * np.sum(z * z, axis=-1) \
        - np.sum(np.log(sigma)) - 0.5 * len(sigma) * math.log(2.0 * math.pi)


# -- graph versions (share weights with the fast path) -------------------------

def params_to_tensors(params: PolicyParams) -> dict[str, Tensor]:
    return {name: param(arr) for name, arr in params.flat().items()}


def actor_graph(tensors: dict[str, Tensor], obs: Tensor, n_layers: int) -> Tensor:
    x = obs
    for i in range(n_layers - 1):
        x = (x @ tensors[f"actor_w{i}"] + tensors[f"actor_b{i}"]).tanh()
    i = n_layers - 1
    return (x @ tensors[f"actor_w{i}"] + tensors[f"actor_b{i}"]).tanh()


def critic_graph(tensors: dict[str, Tensor], obs: Tensor, n_layers: int) -> Tensor:
    x = obs
    for i in range(n_layers - 1):
        x = (x @ tensors[f"critic_w{i}"] + tensors[f"critic_b{i}"]).tanh()
    i = n_layers - 1
    out = x @ tensors[f"critic_w{i}"] + tensors[f"critic_b{i}"]
    return out.reshape(-1)


def log_prob_graph(mu: Tensor, sigma: np.ndarray, actions: np.ndarray) -> Tensor:
    z = (const(actions) - mu) * const(1.0 / sigma)
    core = (z * z).sum(axis=1) * (-0.5)
    offset = -float(np.sum(np.log(sigma)) + 0.5 * len(sigma) * math.log(2.0 * math.pi))
    return core + offset


# -- running observation statistics --------------------------------------------

@dataclass
class NormStats:
    """Streaming per-dimension mean/variance (count, mean, M2 scheme)."""

    mean: np.ndarray
    m2: np.ndarray
    count: float = 0.0
    clip: float = 10.0
    eps: float = 1e-8

    @classmethod
    def create(cls, dim: int) -> "NormStats":
        return cls(mean=np.zeros(dim), m2=np.zeros(dim))

    @property
    def var(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mean)
        return self.m2 / self.count

    def update(self, batch: np.ndarray) -> None:
        """Merge a batch of raw observations (Chan parallel update)."""
        batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
        n = batch.shape[0]
        if n == 0:
            return
        b_mean = batch.mean(axis=0)
        b_m2 = ((batch - b_mean) ** 2).sum(axis=0)
        if self.count == 0.0:
            self.mean = b_mean
            self.m2 = b_m2
            self.count = float(n)
            return
        delta = b_mean - self.mean
        total = self.count + n
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + b_m2 + delta * delta * (self.count * n / total)
        self.count = total

    def normalize(self, obs: np.ndarray) -> np.ndarray:
        z = (np.asarray(obs, dtype=np.float64) - self.mean) / np.sqrt(self.var + self.eps)
        return np.clip(z, -self.clip, self.clip)

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z) * np.sqrt(self.var + self.eps) + self.mean

    def copy(self) -> "NormStats":
        return NormStats(mean=self.mean.copy(), m2=self.m2.copy(),
                         count=self.count, clip=self.clip, eps=self.eps)


# -- checkpoints ----------------------------------------------------------------

def config_hash(config_dict: dict) -> str:
    blob = json.dumps(config_dict, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_checkpoint(path, params: PolicyParams, stats: NormStats,
                    cfg_hash: str, extra: dict | None = None) -> None:
    """Versioned binary container; arrays round-trip bit-exactly."""
    arrays = dict(params.flat())
    arrays["sigma"] = params.sigma
    arrays["stats_mean"] = stats.mean
    arrays["stats_m2"] = stats.m2
    arrays["stats_count"] = np.array([stats.count])
    meta = {
        "version": CHECKPOINT_VERSION,
        "obs_dim": params.obs_dim,
        "act_dim": params.act_dim,
        "n_layers": len(params.actor),
        "config_hash": cfg_hash,
        "extra": extra or {},
    }
    arrays["meta_json"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[PolicyParams, NormStats, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version {meta.get('version')!r}, "
                f"expected {CHECKPOINT_VERSION}")
        n_layers = meta["n_layers"]
        actor = [(data[f"actor_w{i}"], data[f"actor_b{i}"]) for i in range(n_layers)]
        critic = [(data[f"critic_w{i}"], data[f"critic_b{i}"]) for i in range(n_layers)]
        params = PolicyParams(actor=actor, critic=critic, sigma=data["sigma"],
                              obs_dim=meta["obs_dim"], act_dim=meta["act_dim"])
        stats = NormStats(mean=data["stats_mean"], m2=data["stats_m2"],
                          count=float(data["stats_count"][0]))
    return params, stats, meta
