"""Acceptance gate: the eleven end-to-end criteria at their stated tolerances.

Run with ``pytest tests/test_acceptance.py``; the terminal summary lists one
PASS/FAIL line per criterion.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import example
from smvi.cli import main
from smvi.diagnose import GENERALIZED, LP, parametric_sweep, sweep, verdict
from smvi.metrics import diameter, hausdorff, kuratowski_est, hcont_ratio
from smvi.model import ConstraintSet, LinearOperator, MultiMap, reduce_sfp, reduce_smp, selection_rows
from smvi.residual import dist_to_set, is_member, set_grid
from smvi.scan import ScanRegion, scan_eps_set, solution_clusters

SPECS = Path(__file__).resolve().parents[1] / "specs"
SCHEDULE = [0.2, 0.1, 0.05, 0.02]
EX1, EX2, EX3, EX4 = (example(f"example{i}") for i in range(1, 5))
CORNERS = np.array([[-1.0, -1.0], [1.0, 1.0]])


def _near(points, targets, tol):
    """Every point within ``tol`` of some target and every target within ``tol`` of some point."""
    P, T = np.atleast_2d(points), np.atleast_2d(targets)
    d = np.sqrt(((P[:, None, :] - T[None, :, :]) ** 2).sum(axis=2))
    return bool(d.min(axis=1).max() <= tol and d.min(axis=0).max() <= tol)


@pytest.mark.criterion(1, "Example 1 scans stay inside [-eps, 1+eps]^2")
def test_c01_example1_containment():
    region = ScanRegion((-0.5, -0.5), (1.5, 1.5), 0.01)
    for eps in (0.2, 0.1, 0.05):
        t0 = time.perf_counter()
        cloud = scan_eps_set(EX1, eps, region)
        elapsed = time.perf_counter() - t0
        X = cloud.points
        assert len(X) > 0
        assert np.all(X >= -eps) and np.all(X <= 1 + eps), f"eps={eps}: member outside the box"
        assert elapsed < 30.0


@pytest.mark.criterion(2, "Example 1 sweep: shrinking diameter, one cluster at (0,0), LP verdict")
def test_c02_example1_well_posed():
    trend = sweep(EX1, SCHEDULE)
    diams = [r.diam for r in trend.rows]
    assert all(b < a for a, b in zip(diams, diams[1:]))
    assert trend.final.clusters == 1 and len(trend.final_clusters) == 1
    assert len(trend.solution_clusters) == 1
    assert _near(trend.solution_clusters[0].representative, [0.0, 0.0], 0.03)
    assert verdict(trend).tag == LP


@pytest.mark.criterion(3, "Example 2: corners are members, two clusters at gap 0.5, generalized verdict")
def test_c03_example2_generalized():
    for eps in (0.0, 1e-9, 1e-6, 1e-3, 0.02, 0.1, 0.2, 1.0):
        for c in CORNERS:
            assert is_member(EX2, c[:1], c[1:], eps)[0]
    trend = sweep(EX2, SCHEDULE, gap=0.5)
    assert trend.final.clusters == 2
    reps = [c.representative for c in trend.final_clusters]
    assert _near(reps, CORNERS, 0.03)
    assert _near([c.representative for c in trend.solution_clusters], CORNERS, 0.03)
    assert all(r.diam >= 2 * math.sqrt(2) - 0.1 for r in trend.rows)
    v = verdict(trend)
    assert v.tag == GENERALIZED and v.clusters == 2


@pytest.mark.criterion(4, "Examples 3-4 parametric sweeps with delta = eps at p = 0 and 0.5")
@pytest.mark.parametrize("p", [0.0, 0.5])
def test_c04_parametric(p):
    trend, inter = parametric_sweep(EX3, [p], SCHEDULE, SCHEDULE)
    assert inter.nonincreasing
    diams = [r.diam for r in trend.rows]
    assert all(b < a for a, b in zip(diams, diams[1:]))
    assert trend.final.clusters == 1
    assert _near(trend.solution_clusters[0].representative, [0.0, 0.0], 0.03)
    assert len(trend.solution_clusters) == 1
    assert verdict(trend).tag == LP

    trend, inter = parametric_sweep(EX4, [p], SCHEDULE, SCHEDULE, gap=0.5)
    assert inter.nonincreasing
    assert trend.final.clusters == 2
    assert _near([c.representative for c in trend.final_clusters], CORNERS, 0.03)
    assert _near([c.representative for c in trend.solution_clusters], CORNERS, 0.03)
    assert all(r.diam >= 2 * math.sqrt(2) - 0.1 for r in trend.rows)
    assert verdict(trend).tag == GENERALIZED


def _solution_points(P):
    return CORNERS if P in (EX2, EX4) else np.zeros((1, 2))


@pytest.mark.criterion(5, "membership monotone in eps: 1,000 triples per example")
@pytest.mark.parametrize("name", ["example1", "example2", "example3", "example4"])
def test_c05_monotonicity(name):
    P = example(name)
    rng = np.random.default_rng(2024)
    sols = _solution_points(P)
    violations = informative = 0
    for i in range(1000):
        e1, e2 = np.sort(rng.uniform(0, 0.3, 2))
        e1 = 0.0 if i % 7 == 0 else float(e1)
        if i % 2:
            zw = rng.uniform(-1.3, 1.3, 2)
        else:
            # near a solution with a small link gap, where S(e1) is often hit
            z = sols[rng.integers(len(sols)), 0] + rng.uniform(-0.15, 0.15)
            zw = np.array([z, z + rng.uniform(-1.2, 1.2) * e1])
        kw = {}
        if P.k:
            kw = {"param": [float(rng.uniform(-0.5, 0.5))], "delta": float(rng.uniform(0, 0.2))}
        if is_member(P, zw[:1], zw[1:], e1, **kw)[0]:
            informative += 1
            violations += not is_member(P, zw[:1], zw[1:], float(e2), **kw)[0]
    assert violations == 0
    assert informative >= 100


@pytest.mark.criterion(6, "metric axioms on 100 random clouds")
def test_c06_metric_axioms():
    rng = np.random.default_rng(6)
    for _ in range(100):
        dim = int(rng.integers(1, 4))
        A, B, C = (rng.normal(size=(int(rng.integers(1, 40)), dim)) * rng.uniform(0.1, 5) for _ in range(3))
        assert hausdorff(A, B) == hausdorff(B, A)
        assert hausdorff(A, A) <= 1e-12
        assert hausdorff(A, C) <= hausdorff(A, B) + hausdorff(B, C) + 1e-9
        assert kuratowski_est(A, 1) == diameter(A)
        assert kuratowski_est(A, len(A)) == 0.0
        assert kuratowski_est(A, len(A) + 3) == 0.0


def _random_pairs(rng, count, parametric):
    pairs = []
    for _ in range(count):
        x, y = rng.uniform(-1.5, 1.5, 1), rng.uniform(-1.5, 1.5, 1)
        if parametric:
            pairs.append((x, y, rng.uniform(-1, 1, 1), rng.uniform(-1, 1, 1)))
        else:
            pairs.append((x, y))
    return pairs


@pytest.mark.criterion(7, "H-continuity ratios of the example maps <= 1 + 1e-9")
@pytest.mark.parametrize("name", ["example1", "example2", "example3", "example4"])
def test_c07_hcont(name):
    P = example(name)
    rng = np.random.default_rng(7)
    for B, prefix in ((P.B1, "x"), (P.B2, "y")):
        rep = hcont_ratio(B, _random_pairs(rng, 1000, P.k > 0), prefix=prefix)
        assert rep.ratio <= 1 + 1e-9


@pytest.mark.criterion(8, "distance to a convex set is convex: 500 segments per set kind")
@pytest.mark.parametrize(
    "S",
    [
        ConstraintSet.box([-1.0, 0.0, 0.5], [1.0, 2.0, 0.5]),
        ConstraintSet.ball([0.5, -0.5, 1.0], 1.25),
    ],
    ids=["box", "ball"],
)
def test_c08_distance_convexity(S):
    rng = np.random.default_rng(8)
    for _ in range(500):
        a, b = rng.uniform(-4, 4, (2, 3))
        t = rng.uniform()
        lhs = dist_to_set(t * a + (1 - t) * b, S)
        assert lhs <= t * dist_to_set(a, S) + (1 - t) * dist_to_set(b, S) + 1e-9


@pytest.mark.criterion(9, "nearest selection within the Hausdorff distance on finite-valued maps")
def test_c09_nearest_selection():
    maps = [
        (EX1.B1, None),
        (EX2.B1, None),
        (EX4.B1, 1),
        (MultiMap.from_strings([["x1", "x2^2"], ["abs(x1) - 1", "0"], ["2 * x2", "x1 * x2"]]), None),
    ]
    rng = np.random.default_rng(9)
    violations = 0
    for i in range(500):
        B, k = maps[i % len(maps)]
        dim = B.dim
        x, y = rng.uniform(-1.5, 1.5, (2, dim))
        p = None if k is None else rng.uniform(-1, 1, (1, k))
        q = None if k is None else rng.uniform(-1, 1, (1, k))
        Bx = selection_rows(B, "x", x[None, :], p)[:, 0, :]
        By = selection_rows(B, "x", y[None, :], q)[:, 0, :]
        u = Bx[rng.integers(len(Bx))]
        nearest = np.sqrt(((By - u) ** 2).sum(axis=1)).min()
        violations += nearest > hausdorff(Bx, By) + 1e-12
    assert violations == 0


@pytest.mark.criterion(10, "SFP membership equals the three feasibility gaps; SMP finds the minimizer")
def test_c10_reductions():
    C = ConstraintSet.box([0.0], [1.0])
    Q = ConstraintSet.box([0.5], [2.0])
    A = LinearOperator.from_rows([[2.0]])
    sfp = reduce_sfp(C, Q, A)
    for eps in (0.0, 0.05, 0.2):
        for z in np.linspace(-0.5, 1.5, 50):
            for w in np.linspace(-0.5, 2.5, 50):
                gaps = (oracles.dist([z], C), oracles.dist([w], Q), abs(w - 2.0 * z))
                want = max(gaps) <= max(eps, 1e-9) + 1e-12
                assert is_member(sfp, [z], [w], eps)[0] == want

    step = 0.01
    for C, Q, A in (
        (ConstraintSet.box([-1.0], [1.0]), ConstraintSet.box([-1.0], [1.0]), LinearOperator.identity(1)),
        (ConstraintSet.box([0.3], [1.0]), ConstraintSet.box([0.6], [2.0]), LinearOperator.from_rows([[2.0]])),
    ):
        smp = reduce_smp(C, Q, A, "x1^2", "y1^2")
        # brute-force minimizers over the defect grids
        xs, ys = set_grid(C, 10)[:, 0], set_grid(Q, 10)[:, 0]
        target = np.array([xs[np.argmin(xs**2)], ys[np.argmin(ys**2)]])
        found = scan_eps_set(smp, 0.0, step=step)
        clusters = solution_clusters(found, 0.5)
        assert len(clusters) == 1
        assert np.linalg.norm(np.array(clusters[0].representative) - target) <= step


@pytest.mark.criterion(11, "two sweep runs on example1.smvi give byte-identical reports")
def test_c11_determinism(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    spec = str(SPECS / "example1.smvi")
    assert main(["sweep", spec, "--report", str(a)]) == 0
    assert main(["sweep", spec, "--report", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
