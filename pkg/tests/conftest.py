import numpy as np
import pytest

from pushrec.bipedsim import BipedSim, ModelConfig
from pushrec.envloop import EpisodeConfig, make_references


@pytest.fixture(scope="session")
def sim():
    return BipedSim(ModelConfig())


@pytest.fixture(scope="session")
def quiet_episode():
    return EpisodeConfig(
        pushes_enabled=False, noise_joint_pos=0.0, noise_joint_vel=0.0,
        noise_base_pos=0.0, noise_base_pitch=0.0, noise_base_vel=0.0,
        noise_base_pitch_rate=0.0)


@pytest.fixture(scope="session")
def references(sim, quiet_episode):
    return make_references(sim, quiet_episode)


@pytest.fixture(scope="session")
def standing(references):
    return next(r for r in references if r.label == "standing")


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
