"""Actor/critic forwards, Gaussian head, normalization stats, checkpoints."""

import math

import numpy as np
import pytest

from pushrec.autodiff import const
from pushrec.policynet import (NormStats, ShapeError, actor_graph,
                               config_hash, critic_graph, forward_actor,
                               forward_critic, init_params, load_checkpoint,
                               log_prob, log_prob_graph, params_to_tensors,
                               save_checkpoint)


@pytest.fixture
def params():
    return init_params(10, 4, np.random.default_rng(0), hidden=(16, 16))


class TestForward:
    def test_zero_weights_zero_mean(self, params):
        for i, (w, b) in enumerate(params.actor):
            params.actor[i] = (np.zeros_like(w), np.zeros_like(b))
        obs = np.random.default_rng(1).normal(0, 1, 10)
        assert np.allclose(forward_actor(params, obs), 0.0)

    def test_reproducible(self):
        a = init_params(10, 4, np.random.default_rng(5))
        b = init_params(10, 4, np.random.default_rng(5))
        obs = np.random.default_rng(2).normal(0, 1, 10)
        assert np.array_equal(forward_actor(a, obs), forward_actor(b, obs))

    def test_single_linear_layer_matches_matmul(self):
        params = init_params(3, 2, np.random.default_rng(3), hidden=())
        obs = np.array([0.5, -1.0, 2.0])
        w, b = params.actor[0]
        assert np.allclose(forward_actor(params, obs), np.tanh(obs @ w + b))

    def test_output_bounded_by_squashing(self, params):
        gen = np.random.default_rng(4)
        for _ in range(100):
            mu = forward_actor(params, gen.normal(0, 10, 10))
            assert np.all(np.abs(mu) < 1.0)

    def test_shape_mismatch_rejected(self, params):
        with pytest.raises(ShapeError):
            forward_actor(params, np.zeros(11))
        with pytest.raises(ShapeError):
            forward_critic(params, np.zeros((5, 9)))

    def test_batched_matches_single(self, params):
        gen = np.random.default_rng(5)
        batch = gen.normal(0, 1, (7, 10))
        mus = forward_actor(params, batch)
        for i in range(7):
            assert np.allclose(mus[i], forward_actor(params, batch[i]))

    def test_graph_matches_fast_path(self, params):
        gen = np.random.default_rng(6)
        obs = gen.normal(0, 1, (5, 10))
        tensors = params_to_tensors(params)
        mu_graph = actor_graph(tensors, const(obs), len(params.actor))
        v_graph = critic_graph(tensors, const(obs), len(params.critic))
        assert np.allclose(mu_graph.data, forward_actor(params, obs), atol=1e-14)
        assert np.allclose(v_graph.data, forward_critic(params, obs), atol=1e-14)


class TestLogProb:
    def test_mode_value(self):
        sigma = np.array([0.2, 0.3])
        mu = np.array([0.1, -0.2])
        expected = -np.sum(np.log(sigma)) - 0.5 * 2 * math.log(2 * math.pi)
        assert log_prob(mu, sigma, mu) == pytest.approx(expected, abs=1e-12)

    def test_one_sigma_shift_costs_half(self):
        sigma = np.array([0.2, 0.3])
        mu = np.zeros(2)
        at_mode = log_prob(mu, sigma, mu)
        shifted = mu.copy()
        shifted[0] += sigma[0]
        assert at_mode - log_prob(mu, sigma, shifted) == pytest.approx(0.5)

    def test_density_integrates_to_one(self):
        sigma = np.array([0.37])
        mu = np.array([0.1])
        xs = np.linspace(-4, 4, 20_001)
        dens = np.array([math.exp(log_prob(mu, sigma, np.array([x])))
                         for x in xs])
        assert np.trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-3)

    def test_graph_matches_fast_path(self, params):
        gen = np.random.default_rng(7)
        obs = gen.normal(0, 1, (6, 10))
        actions = gen.normal(0, 1, (6, 4))
        tensors = params_to_tensors(params)
        mu_t = actor_graph(tensors, const(obs), len(params.actor))
        lp = log_prob_graph(mu_t, params.sigma, actions)
        ref = log_prob(forward_actor(params, obs), params.sigma, actions)
        assert np.allclose(lp.data, ref, atol=1e-12)


class TestNormStats:
    def test_single_repeated_sample(self):
        stats = NormStats.create(3)
        stats.update(np.tile([1.0, 2.0, 3.0], (5, 1)))
        assert np.allclose(stats.var, 0.0)
        assert np.allclose(stats.normalize([1.0, 2.0, 3.0]), 0.0)

    def test_streaming_matches_two_pass(self):
        gen = np.random.default_rng(8)
        data = gen.normal(3.0, 2.5, (1000, 4))
        stats = NormStats.create(4)
        for chunk in np.array_split(data, 13):
            stats.update(chunk)
        assert np.allclose(stats.mean, data.mean(axis=0), atol=1e-9)
        assert np.allclose(stats.var, data.var(axis=0), atol=1e-9)
        assert stats.count == 1000

    def test_count_monotone(self):
        gen = np.random.default_rng(9)
        stats = NormStats.create(2)
        prev = 0.0
        for _ in range(10):
            stats.update(gen.normal(0, 1, (7, 2)))
            assert stats.count > prev
            prev = stats.count

    def test_normalize_roundtrip(self):
        gen = np.random.default_rng(10)
        stats = NormStats.create(5)
        stats.update(gen.normal(2.0, 3.0, (500, 5)))
        x = gen.normal(2.0, 3.0, 5)
        z = stats.normalize(x)
        assert np.all(np.abs(z) <= 10.0)
        assert np.allclose(stats.denormalize(z), x, atol=1e-9)

    def test_clip_applied(self):
        stats = NormStats.create(1)
        stats.update(np.random.default_rng(0).normal(0, 1e-3, (100, 1)))
        assert stats.normalize([1e6])[0] == 10.0

    def test_frozen_stats_deterministic_outputs(self, params):
        stats = NormStats.create(10)
        stats.update(np.random.default_rng(11).normal(0, 1, (200, 10)))
        obs = np.random.default_rng(12).normal(0, 1, 10)
        a = forward_actor(params, stats.normalize(obs))
        b = forward_actor(params, stats.normalize(obs))
        assert np.array_equal(a, b)


class TestCheckpoint:
    def test_roundtrip_bit_exact(self, params, tmp_path):
        stats = NormStats.create(10)
        stats.update(np.random.default_rng(13).normal(0, 1, (50, 10)))
        path = tmp_path / "ck.npz"
        save_checkpoint(path, params, stats, "deadbeef", extra={"iteration": 3})
        loaded, lstats, meta = load_checkpoint(path)
        for (w1, b1), (w2, b2) in zip(params.actor, loaded.actor):
            assert w1.tobytes() == w2.tobytes()
            assert b1.tobytes() == b2.tobytes()
        for (w1, b1), (w2, b2) in zip(params.critic, loaded.critic):
            assert w1.tobytes() == w2.tobytes()
        assert lstats.mean.tobytes() == stats.mean.tobytes()
        assert lstats.m2.tobytes() == stats.m2.tobytes()
        assert lstats.count == stats.count
        assert meta["config_hash"] == "deadbeef"
        assert meta["extra"]["iteration"] == 3

    def test_unknown_version_rejected(self, params, tmp_path):
        import json
        stats = NormStats.create(10)
        path = tmp_path / "ck.npz"
        save_checkpoint(path, params, stats, "x")
        with np.load(path) as data:
            arrays = dict(data)
        meta = json.loads(bytes(arrays["meta_json"]).decode())
        meta["version"] = 999
        arrays["meta_json"] = np.frombuffer(json.dumps(meta).encode(), np.uint8)
        np.savez(path, **arrays)
        with pytest.raises(ValueError, match="version"):
            load_checkpoint(path)

    def test_config_hash_stable(self):
        d = {"b": 1, "a": {"c": [1, 2, 3]}}
        assert config_hash(d) == config_hash({"a": {"c": [1, 2, 3]}, "b": 1})
        assert config_hash(d) != config_hash({"a": {"c": [1, 2, 4]}, "b": 1})


class TestInit:
    def test_sigma_positive_and_fixed(self, params):
        assert np.all(params.sigma > 0.0)
        assert params.sigma.shape == (4,)

    def test_small_initial_actions(self, params):
        gen = np.random.default_rng(14)
        mus = forward_actor(params, gen.normal(0, 1, (100, 10)))
        assert np.abs(mus).max() < 0.05  # near-zero at iteration 0
