"""Run configuration: one YAML tree covering model, episode, reward,
termination and trainer, plus run-level bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..bipedsim import ModelConfig
from ..bipedsim.model import ConfigError
from ..envloop import EpisodeConfig
from ..policynet import config_hash
from ..ppo import TrainConfig
from ..reward import RewardConfig
from ..termination import TerminationConfig


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    termination: TerminationConfig = field(default_factory=TerminationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    total_steps: int = 200_000
    checkpoint_every: int = 20          # iterations between checkpoints
    hidden: tuple[int, ...] = (64, 64)
    sigma: float = 0.2                  # fixed action std, normalized units

    def validate(self) -> None:
        self.model.validate()
        self.episode.validate()
        self.reward.validate()
        self.termination.validate()
        self.train.validate()
        if self.total_steps <= 0:
            raise ConfigError("total_steps must be positive")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "episode": self.episode.to_dict(),
            "reward": self.reward.to_dict(),
            "termination": self.termination.to_dict(),
            "train": self.train.to_dict(),
            "seed": self.seed,
            "total_steps": self.total_steps,
            "checkpoint_every": self.checkpoint_every,
            "hidden": list(self.hidden),
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        cfg = cls(
            model=ModelConfig.from_dict(d.get("model", {})),
            episode=EpisodeConfig.from_dict(d.get("episode", {})),
            reward=RewardConfig.from_dict(d.get("reward", {})),
            termination=TerminationConfig.from_dict(d.get("termination", {})),
            train=TrainConfig.from_dict(d.get("train", {})),
            seed=int(d.get("seed", 0)),
            total_steps=int(d.get("total_steps", 200_000)),
            checkpoint_every=int(d.get("checkpoint_every", 20)),
            hidden=tuple(d.get("hidden", (64, 64))),
            sigma=float(d.get("sigma", 0.2)),
        )
        cfg.validate()
        return cfg

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)
