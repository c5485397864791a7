import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distforest.errors import InvalidMetric, LabelMismatch, MissingLength, UnknownLabel
from distforest.metric_space import (
    INF,
    DistortionParams,
    LeafMetric,
    WeightedTree,
    ball,
    four_point_gap,
    is_distortion,
    path_metric,
    restrict_weighted,
    truncate,
)
from distforest.oracle_verify import brute_path_sum
from distforest.tree_core import Tree, restrict, splits

from helpers import quartet, random_weighted


def legal():
    return DistortionParams(0.1, 5.0, 0.5, 2.0)


def test_quartet_metric():
    d = path_metric(quartet())
    assert d("a", "b") == d("c", "d") == 2
    for u in "ab":
        for v in "cd":
            assert d(u, v) == 3


def test_single_edge_metric():
    t = Tree({0: [1], 1: [0]}, {0: "u", 1: "v"})
    assert path_metric(t, {(0, 1): 2.5})("u", "v") == 2.5


def test_missing_length():
    t = Tree({0: [1], 1: [0]}, {0: "u", 1: "v"})
    with pytest.raises(MissingLength):
        path_metric(t, {})
    with pytest.raises(MissingLength):
        path_metric(t)


def test_nonpositive_length_rejected():
    t = Tree({0: [1], 1: [0]}, {0: "u", 1: "v"})
    with pytest.raises(InvalidMetric):
        WeightedTree(t, {(0, 1): 0.0})


@given(st.integers(2, 30), st.integers(0, 10**9))
@settings(max_examples=50, deadline=None)
def test_path_metric_matches_path_sums(n, seed):
    r = random.Random(seed)
    wt = random_weighted(n, r)
    d = path_metric(wt)
    labs = sorted(wt.labels)
    for _ in range(20):
        u, v = r.choice(labs), r.choice(labs)
        assert abs(d(u, v) - brute_path_sum(wt.tree, wt.lengths, u, v)) < 1e-12


def test_leaf_metric_validation():
    with pytest.raises(InvalidMetric):
        LeafMetric(["a", "b"], [[0, 1], [2, 0]])
    with pytest.raises(InvalidMetric):
        LeafMetric(["a", "b"], [[1, 1], [1, 0]])
    with pytest.raises(InvalidMetric):
        LeafMetric(["a", "b"], [[0, -1], [-1, 0]])
    with pytest.raises(InvalidMetric):
        LeafMetric(["a", "a"], [[0, 1], [1, 0]])
    with pytest.raises(InvalidMetric):
        LeafMetric(["a", "b"], [[0, math.nan], [math.nan, 0]])
    with pytest.raises(UnknownLabel):
        LeafMetric(["a", "b"], [[0, 1], [1, 0]])("a", "z")


def test_leaf_metric_is_read_only():
    d = LeafMetric(["a", "b"], [[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        d.values[0, 1] = 5


@pytest.mark.parametrize(
    "args",
    [(0.3, 5, 0.5, 2), (0.0, 5, 0.5, 2), (0.1, 0.7, 0.5, 2), (0.1, 5, 2, 1), (0.1, 5, 0, 1)],
)
def test_params_validated_eagerly(args):
    with pytest.raises(InvalidMetric):
        DistortionParams(*args)


# -- distortions -------------------------------------------------------------------


def test_identity_is_distortion():
    d = path_metric(quartet())
    assert is_distortion(d, d, legal())


def test_truncation_is_distortion():
    d = path_metric(quartet())
    p = DistortionParams(0.1, 2.5, 0.5, 2.0)
    assert is_distortion(d, truncate(d, p.cap_m), p)


def test_off_by_two_eps():
    d = path_metric(quartet())
    p = legal()
    vals = np.array(d.values)
    vals[0, 1] = vals[1, 0] = vals[0, 1] + 2 * p.eps
    assert not is_distortion(d, LeafMetric(d.labels, vals), p)


def test_error_of_exactly_eps_is_not_allowed():
    d = LeafMetric(["a", "b"], [[0, 1.0], [1.0, 0]])
    dh = LeafMetric(["a", "b"], [[0, 1.25], [1.25, 0]])
    assert not is_distortion(d, dh, DistortionParams(0.25, 5, 0.6, 2))
    assert is_distortion(d, dh, DistortionParams(0.2500001, 5, 0.6, 2))


def test_infinity_only_above_cap():
    d = path_metric(quartet())
    vals = np.array(d.values)
    vals[0, 1] = vals[1, 0] = INF  # d(a, b) = 2 is below the cap
    assert not is_distortion(d, LeafMetric(d.labels, vals), legal())


def test_asymmetric_estimate_is_not_distortion():
    d = path_metric(quartet())
    vals = np.array(d.values)
    vals[0, 1] += 0.01
    assert not is_distortion(d, LeafMetric(d.labels, vals, check_symmetry=False), legal())


def test_label_mismatch():
    d = path_metric(quartet())
    other = LeafMetric(["a", "b"], [[0, 1], [1, 0]])
    with pytest.raises(LabelMismatch):
        is_distortion(d, other, legal())


def test_label_order_does_not_matter():
    d = path_metric(quartet())
    rev = d.reordered(list(reversed(d.labels)))
    assert is_distortion(d, rev, legal())


@given(st.integers(3, 20), st.integers(0, 10**9), st.floats(0.5, 30))
@settings(max_examples=50, deadline=None)
def test_truncate_property(n, seed, cap):
    d = path_metric(random_weighted(n, random.Random(seed)))
    dh = truncate(d, cap)
    assert is_distortion(d, dh, DistortionParams(0.01, cap, 0.5, 2.0))
    assert ((dh.values == d.values) | (np.isinf(dh.values) & (d.values > cap))).all()


def test_truncate_examples():
    d = LeafMetric(["u", "v"], [[0, 5], [5, 0]])
    assert math.isinf(truncate(d, 3)("u", "v"))
    assert truncate(d, math.inf) == d


@given(st.integers(3, 15), st.integers(0, 10**9), st.floats(0.001, 0.2))
@settings(max_examples=40, deadline=None)
def test_distortion_monotone_in_eps(n, seed, extra):
    r = random.Random(seed)
    d = path_metric(random_weighted(n, r))
    vals = np.array(d.values)
    noise = np.triu(np.array([[r.uniform(-0.1, 0.1) for _ in range(n)] for _ in range(n)]), 1)
    vals = np.maximum(vals + noise + noise.T, 0)
    np.fill_diagonal(vals, 0)
    dh = LeafMetric(d.labels, vals)
    p = DistortionParams(0.1, 50, 0.5, 2)
    if is_distortion(d, dh, p):
        assert is_distortion(d, dh, DistortionParams(0.1 + extra, 50, 0.8, 2))


# -- balls ------------------------------------------------------------------------


def test_ball_examples():
    d = path_metric(quartet())
    assert ball(d, "a", 1.0) == {"a"}
    assert ball(d, "a", 2.0) == {"a", "b"}
    assert ball(d, "a", 100) == set("abcd")
    vals = np.array(d.values)
    vals[0, 2] = vals[2, 0] = INF
    assert ball(LeafMetric(d.labels, vals), "a", 100) == {"a", "b", "d"}
    with pytest.raises(UnknownLabel):
        ball(d, "zz", 1)


@given(st.integers(2, 25), st.integers(0, 10**9), st.floats(0, 20))
@settings(max_examples=50, deadline=None)
def test_ball_matches_scan(n, seed, r):
    rnd = random.Random(seed)
    d = truncate(path_metric(random_weighted(n, rnd)), 10)
    v = rnd.choice(d.labels)
    scan = {w for w in d.labels if w == v or d(v, w) <= r}
    assert ball(d, v, r) == scan


# -- invariants ---------------------------------------------------------------------


@given(st.integers(4, 20), st.integers(0, 10**9))
@settings(max_examples=40, deadline=None)
def test_four_point_condition(n, seed):
    r = random.Random(seed)
    d = path_metric(random_weighted(n, r))
    for _ in range(30):
        q = r.sample(d.labels, 4)
        assert four_point_gap(d, *q) < 1e-9


@given(st.integers(2, 20), st.integers(0, 10**9))
@settings(max_examples=40, deadline=None)
def test_restriction_preserves_leaf_distances(n, seed):
    r = random.Random(seed)
    wt = random_weighted(n, r)
    keep = r.sample(sorted(wt.labels), r.randint(1, n))
    sub = restrict_weighted(wt, keep)
    assert sub.tree.labels == set(keep)
    got = path_metric(sub)
    want = path_metric(wt).submetric(keep)
    assert np.allclose(got.reordered(want.labels).values, want.values, atol=1e-12, rtol=0)
    assert splits(sub.tree) == splits(restrict(wt.tree, keep))
