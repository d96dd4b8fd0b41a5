import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import example
from smvi.diagnose import (
    EMPTY,
    GENERALIZED,
    LP,
    NON_DECREASING,
    SweepRow,
    SweepTrend,
    Thresholds,
    build_report,
    closedness_probe,
    dumps_report,
    parametric_sweep,
    sweep,
    verdict,
)
from smvi.metrics import PointCloud, diameter
from smvi.model import ValidationError
from smvi.residual import GridSpec
from smvi.scan import ScanRegion
from smvi.specfile import loads_problem, template

EX1, EX2, EX3, EX4 = (example(f"example{i}") for i in range(1, 5))
SCHEDULE = [0.2, 0.1, 0.05, 0.02]


def _trend(diams, mus, clusters, step=0.01):
    n = len(diams)
    rows = [
        SweepRow(0.1 * (n - i), None, 0 if d is None else 10, d, m, None, c)
        for i, (d, m, c) in enumerate(zip(diams, mus, clusters))
    ]
    region = ScanRegion((0.0, 0.0), (1.0, 1.0), step)
    empty = PointCloud.empty(2)
    return SweepTrend(rows, [empty] * len(rows), 4, 0.25, step, region, GridSpec(), [], [], empty)


def test_verdict_rules():
    assert verdict(_trend([1.0, 0.5, 0.03], [0.5, 0.2, 0.01], [1, 1, 1])).tag == LP
    assert verdict(_trend([3.0, 2.9, 2.85], [0.3, 0.1, 0.04], [2, 2, 2])).tag == GENERALIZED
    assert verdict(_trend([1.0, None, 0.1], [0.5, None, 0.01], [1, 0, 1])).tag == EMPTY
    assert verdict(_trend([1.0, 1.2, 0.03], [0.5, 0.6, 0.01], [1, 1, 1])).tag == NON_DECREASING
    assert verdict(_trend([1.0, 0.5], [0.5, 0.2], [1, 1])).tag == NON_DECREASING
    # explicit thresholds win over the default policy
    t = _trend([1.0, 0.5, 0.2], [0.5, 0.2, 0.1], [1, 1, 1])
    assert verdict(t).tag == LP
    assert verdict(t, Thresholds(diam_final=0.1, mu_final=0.05)).tag == NON_DECREASING


diam_lists = st.lists(st.one_of(st.none(), st.floats(0, 5)), min_size=1, max_size=6)


@settings(max_examples=200, deadline=None)
@given(diam_lists, st.integers(0, 3), st.integers(1, 4))
def test_verdict_is_total_and_deterministic(diams, clusters, min_rows):
    mus = [None if d is None else d / 2 for d in diams]
    t = _trend(diams, mus, [0 if d is None else clusters for d in diams])
    th = Thresholds(min_rows=min_rows)
    a, b = verdict(t, th), verdict(t, th)
    assert a == b
    assert a.tag in (LP, GENERALIZED, EMPTY, NON_DECREASING)


def test_sweep_example1():
    trend = sweep(EX1, SCHEDULE)
    diams = [r.diam for r in trend.rows]
    assert all(b < a for a, b in zip(diams, diams[1:]))
    for r, cloud in zip(trend.rows, trend.clouds):
        assert r.count == len(cloud) and r.diam == diameter(cloud)
    assert verdict(trend).tag == LP
    assert [c.representative for c in trend.solution_clusters] == [(0.0, 0.0)]


def test_sweep_example2():
    trend = sweep(EX2, SCHEDULE)
    assert all(r.diam >= 2 * math.sqrt(2) - 0.1 for r in trend.rows)
    mus = [r.mu_hat for r in trend.rows]
    assert all(b < a for a, b in zip(mus, mus[1:]))
    v = verdict(trend)
    assert v.tag == GENERALIZED and v.clusters == 2


def test_single_row_is_inconclusive():
    assert verdict(sweep(EX1, [0.1])).tag == NON_DECREASING


def test_schedule_errors():
    for bad in ([], [0.1, 0.2], [0.1, 0.0], [0.1, 0.1]):
        with pytest.raises(ValidationError):
            sweep(EX1, bad)
    with pytest.raises(ValidationError):
        parametric_sweep(EX1, [0.0], SCHEDULE, SCHEDULE)


def test_parametric_sweep_example3():
    trend, inter = parametric_sweep(EX3, [0.5], SCHEDULE, SCHEDULE)
    assert inter.nonincreasing
    assert verdict(trend).tag == LP
    assert [c.representative for c in trend.solution_clusters] == [(0.0, 0.0)]


def test_parameter_free_data_matches_plain_sweep():
    text = template("example1").replace("params = 0", "params = 1")
    Pk = loads_problem(text)
    plain = sweep(EX1, SCHEDULE[:3])
    for deltas in ([0.0, 0.0, 0.0], SCHEDULE[:3]):
        param, _ = parametric_sweep(Pk, [0.3], deltas, SCHEDULE[:3])
        assert [r.count for r in param.rows] == [r.count for r in plain.rows]


@pytest.mark.parametrize("P", [EX1, EX2])
def test_closedness_probe(P):
    rep = closedness_probe(P, trials=8, seed=1)
    assert rep.passed == rep.trials and not rep.failures


def test_closedness_probe_sfp_boundary():
    sfp = loads_problem(template("sfp"))
    rep = closedness_probe(sfp, trials=10, seed=0, step=0.05)
    assert rep.pass_rate == 1.0
    # the solution set is the diagonal segment, all of it boundary in the plane
    assert all(z == w and 0.0 <= z <= 1.0 for z, w in rep.limits)


def test_closedness_probe_no_solutions():
    region = ScanRegion((-0.05, -0.05), (1.05, 1.05), 0.1)
    rep = closedness_probe(EX1, trials=3, region=region)
    assert rep.passed == 0 and "no solutions" in rep.message


def test_report_fields_and_determinism():
    trend = sweep(EX1, SCHEDULE)
    rep = build_report(EX1, trend, verdict(trend))
    text = dumps_report(rep)
    assert text == dumps_report(build_report(EX1, sweep(EX1, SCHEDULE), verdict(trend)))
    data = json.loads(text)
    assert data["verdict"] == LP
    for key in ("eps", "delta", "count", "diam", "mu_hat", "hausdorff_to_final"):
        assert all(key in row for row in data["rows"])
    assert data["thresholds"]["policy_note"]


def test_workers_do_not_change_results():
    a = sweep(EX2, SCHEDULE, workers=1)
    b = sweep(EX2, SCHEDULE, workers=3)
    assert a.rows == b.rows
    assert all(np.array_equal(x.points, y.points) for x, y in zip(a.clouds, b.clouds))
