import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smvi.metrics import (
    PointCloud,
    diameter,
    excess,
    farthest_point_order,
    hausdorff,
    hcont_ratio,
    kuratowski_est,
    mu_bound_report,
)
from smvi.model import MultiMap


def _brute_diameter(X):
    return max((math.dist(a, b) for a, b in itertools.combinations(X.tolist(), 2)), default=0.0)


def _brute_excess(X, Y):
    return max(min(math.dist(a, b) for b in Y.tolist()) for a in X.tolist())


def clouds(dim=2, max_size=25):
    return st.integers(1, max_size).flatmap(
        lambda n: arrays(np.float64, (n, dim), elements=st.floats(-10, 10, allow_nan=False, width=32))
    )


@settings(max_examples=100, deadline=None)
@given(clouds(), clouds())
def test_metrics_match_brute_force(X, Y):
    assert diameter(X) == pytest.approx(_brute_diameter(X), rel=1e-12, abs=1e-12)
    assert excess(X, Y) == pytest.approx(_brute_excess(X, Y), rel=1e-12, abs=1e-12)
    assert hausdorff(X, Y) == pytest.approx(max(_brute_excess(X, Y), _brute_excess(Y, X)), rel=1e-12, abs=1e-12)


def test_known_values():
    A = np.array([[0.0, 0.0], [3.0, 4.0]])
    B = np.array([[0.0, 0.0]])
    assert diameter(A) == 5.0
    assert excess(B, A) == 0.0 and excess(A, B) == 5.0
    assert hausdorff(A, B) == 5.0
    assert kuratowski_est(A, 1) == 5.0 and kuratowski_est(A, 2) == 0.0


def test_farthest_point_order_starts_at_lexmin():
    X = np.array([[1.0, 0.0], [0.0, 5.0], [0.0, 1.0], [4.0, 4.0]])
    order = farthest_point_order(X, 3)
    assert order[0] == 2
    assert order[1] == 3
    dup = np.array([[0.0, 0.0], [0.0, 0.0]])
    assert farthest_point_order(dup, 5) == [0]


@settings(max_examples=100, deadline=None)
@given(clouds(max_size=30), st.integers(1, 8))
def test_kuratowski_properties(X, k):
    assert kuratowski_est(X, 1) == diameter(X)
    assert kuratowski_est(X, k) <= kuratowski_est(X, max(1, k - 1))
    assert 0.0 <= kuratowski_est(X, k) <= diameter(X)
    assert kuratowski_est(X, X.shape[0]) == 0.0


def test_kuratowski_two_blobs():
    rng = np.random.default_rng(0)
    blob = rng.uniform(0, 0.1, size=(50, 2))
    X = np.vstack([blob, blob + 10])
    assert diameter(X) > 14
    assert kuratowski_est(X, 2) <= diameter(blob) + 1e-12
    rep = mu_bound_report(X, blob, 2)
    assert not rep.violated


def test_empty_and_mismatched_clouds():
    with pytest.raises(ValueError):
        diameter(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        hausdorff(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        kuratowski_est(np.zeros((2, 2)), 0)


def test_csv_round_trip():
    X = np.array([[0.1, -2.5e-17], [1.0 / 3.0, 7.0]])
    cloud = PointCloud(X)
    text = cloud.to_csv("eps=0.1")
    assert text.splitlines()[:2] == ["# eps=0.1", "dim,2"]
    assert np.array_equal(PointCloud.from_csv(text).points, X)
    empty = PointCloud.empty(2)
    assert PointCloud.from_csv(empty.to_csv()).points.shape == (0, 2)


def test_hcont_ratio_examples():
    B = MultiMap.from_strings([["x1"], ["0"]])
    rep = hcont_ratio(B, [([0.0], [1.0]), ([0.3], [0.3]), ([0.2], [-0.7])])
    assert rep.excluded == 1
    assert rep.ratio <= 1.0
    Bp = MultiMap.from_strings([["x1 - p1"], ["0"]])
    # {1, 0} against {0}: H = 1 over |p - q| = 1
    rep = hcont_ratio(Bp, [([1.0], [1.0], [0.0], [1.0])])
    assert rep.ratio == pytest.approx(1.0)


def test_kuratowski_two_small_balls():
    rng = np.random.default_rng(1)
    ang = rng.uniform(0, 2 * np.pi, 400)
    rad = 0.01 * np.sqrt(rng.uniform(0, 1, 400))
    disc = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    X = np.vstack([disc, disc + [10.0, 0.0]])
    assert diameter(X) == pytest.approx(10.02, abs=0.01)
    assert kuratowski_est(X, 2) <= 0.02
