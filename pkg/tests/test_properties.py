"""Property-based checks of the core invariants."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from pushrec.features import (capture_point, hull_distance, quat_normalize,
                              rotation_error)
from pushrec.policynet import NormStats
from pushrec.reward import COST_NAMES, CostVector, RewardConfig, rbf_kernel, \
    total_reward

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
small = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)
positive = st.floats(0.01, 100.0, allow_nan=False, allow_infinity=False)


@given(c=st.floats(0, 1e3), kappa=positive)
def test_kernel_always_in_unit_interval(c, kappa):
    k = rbf_kernel(c, kappa)
    assert 0.0 <= k <= 1.0
    assert k == 1.0 or c > 0.0


@given(costs=st.lists(st.floats(0, 1e6), min_size=9, max_size=9))
def test_reward_in_half_open_unit_interval(costs):
    r = total_reward(CostVector(*costs), RewardConfig())
    assert 0.0 < r <= 1.0


@given(x=small, y=small, vx=small, vy=small, z=positive)
def test_capture_point_affine_in_velocity(x, y, vx, vy, z):
    base = capture_point((x, y), (0.0, 0.0), z)
    moved = capture_point((x, y), (vx, vy), z)
    slope = math.sqrt(z / 9.81)
    assert np.allclose(moved - base, np.array([vx, vy]) * slope, atol=1e-9)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=8),
       st.lists(st.tuples(finite, finite), min_size=1, max_size=8))
@settings(max_examples=200, deadline=None)
def test_hull_distance_symmetric_and_nonnegative(a, b):
    d1 = hull_distance(a, b)
    d2 = hull_distance(b, a)
    assert d1 >= 0.0
    assert math.isclose(d1, d2, abs_tol=1e-12)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=8))
@settings(max_examples=200, deadline=None)
def test_hull_distance_to_self_is_zero(pts):
    assert hull_distance(pts, pts) == 0.0


@given(q=st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(
    lambda v: sum(x * x for x in v) > 1e-4))
def test_rotation_error_self_is_zero(q):
    qn = quat_normalize(np.array(q))
    assert rotation_error(qn, qn) < 1e-9


@given(data=st.lists(st.lists(small, min_size=3, max_size=3),
                     min_size=2, max_size=60))
@settings(max_examples=100, deadline=None)
def test_normstats_matches_two_pass(data):
    arr = np.array(data)
    stats = NormStats.create(3)
    stats.update(arr)
    assert np.allclose(stats.mean, arr.mean(axis=0), atol=1e-9)
    assert np.allclose(stats.var, arr.var(axis=0), atol=1e-7)


@given(weights=st.lists(st.floats(0.01, 1.0), min_size=9, max_size=9),
       costs=st.lists(st.floats(0, 10.0), min_size=9, max_size=9))
def test_reward_bounded_by_largest_kernel(weights, costs):
    w = np.array(weights)
    w /= w.sum()
    cfg = RewardConfig(weights={n: float(w[i]) for i, n in enumerate(COST_NAMES)})
    r = total_reward(CostVector(*costs), cfg)
    kernels = [rbf_kernel(c, cfg.cutoffs[n]) for c, n in zip(costs, COST_NAMES)]
    assert r <= max(kernels) + 1e-12
    assert r >= min(kernels) - 1e-12
