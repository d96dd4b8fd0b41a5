"""Epsilon sweeps, trend statistics and well-posedness verdicts.

The metric characterizations are limits: a unique-solution problem is
LP well-posed iff ``diam S(eps) -> 0``, and well-posed in the generalized
sense iff the Kuratowski measure of ``S(eps)`` tends to 0. A finite sweep
can only provide evidence for either, so verdicts are labelled as such and
carry the thresholds they were decided with.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .metrics import PointCloud, diameter, hausdorff, kuratowski_est
from .model import SplitProblem, ValidationError
from .residual import GridSpec, is_member, threshold
from .scan import (
    DEFAULT_STEP,
    Cluster,
    ScanRegion,
    cluster_labels,
    default_gap,
    default_region,
    scan_eps_set,
    solution_clusters,
)

__all__ = [
    "SweepRow",
    "SweepTrend",
    "Thresholds",
    "Verdict",
    "IntersectionReport",
    "ProbeReport",
    "sweep",
    "verdict",
    "parametric_sweep",
    "closedness_probe",
    "build_report",
    "dumps_report",
    "LP",
    "GENERALIZED",
    "EMPTY",
    "NON_DECREASING",
]

LP = "EvidenceLPWellPosed"
GENERALIZED = "EvidenceGeneralizedLPWellPosed"
EMPTY = "InconclusiveEmptyAtResolution"
NON_DECREASING = "InconclusiveNonDecreasing"


@dataclass(frozen=True)
class SweepRow:
    eps: float
    delta: float | None
    count: int
    diam: float | None
    mu_hat: float | None
    hausdorff_to_final: float | None
    clusters: int


@dataclass
class SweepTrend:
    rows: list[SweepRow]
    clouds: list[PointCloud] = field(repr=False)
    k: int
    gap: float
    step: float
    region: ScanRegion
    grid: GridSpec
    final_clusters: list[Cluster]
    solution_clusters: list[Cluster]
    solution_cloud: PointCloud = field(repr=False)
    param: tuple[float, ...] | None = None

    @property
    def final(self) -> SweepRow:
        return self.rows[-1]


def _nonincreasing(values: Sequence[float], tol: float = 1e-12) -> bool:
    return all(b <= a + tol for a, b in zip(values, values[1:]))


def _check_schedule(schedule: Sequence[float]) -> list[float]:
    sched = [float(e) for e in schedule]
    if not sched:
        raise ValidationError("schedule is empty")
    if any(e <= 0 for e in sched):
        raise ValidationError("schedule entries must be positive")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ValidationError("schedule must be strictly decreasing")
    return sched


def sweep(
    P: SplitProblem,
    schedule: Sequence[float],
    region: ScanRegion | None = None,
    grid: GridSpec = GridSpec(),
    k: int = 4,
    step: float = DEFAULT_STEP,
    gap: float | None = None,
    param=None,
    deltas: Sequence[float] | None = None,
    workers: int = 1,
) -> SweepTrend:
    """Scan ``S(eps)`` (or ``S_p(delta, eps)``) along a decreasing schedule.

    All rows share one region, the default one for the largest ``eps``, so
    the clouds are nested. Parametric sweeps pair ``deltas[i]`` with
    ``schedule[i]``. The solution set itself (``eps = 0``, ``delta = 0``) is
    scanned on the same lattice and clustered for reference. An empty row is
    recorded, not raised.
    """
    sched = _check_schedule(schedule)
    p = P.check_param(param)
    if p is None:
        if deltas is not None and any(d != 0 for d in deltas):
            raise ValidationError("delta schedule given for a non-parametric problem")
        dl: list[float | None] = [None] * len(sched)
    else:
        dl = list(sched) if deltas is None else [float(d) for d in deltas]
        if len(dl) != len(sched):
            raise ValidationError("delta and eps schedules must have the same length")
        if any(d < 0 for d in dl) or not _nonincreasing(dl, 0.0):
            raise ValidationError("delta schedule must be nonnegative and nonincreasing")
    region = region or default_region(P, sched[0], step)
    step = region.step
    gap = default_gap(P, step) if gap is None else gap

    def scan_row(i: int) -> PointCloud:
        return scan_eps_set(P, sched[i], region, grid, param=p, delta=dl[i])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            clouds = list(pool.map(scan_row, range(len(sched))))
    else:
        clouds = [scan_row(i) for i in range(len(sched))]

    final = clouds[-1]
    rows = []
    for eps, delta, cloud in zip(sched, dl, clouds):
        if len(cloud):
            h = hausdorff(cloud, final) if len(final) else None
            rows.append(
                SweepRow(eps, delta, len(cloud), diameter(cloud), kuratowski_est(cloud, k), h,
                         len(solution_clusters(cloud, gap)))
            )
        else:
            rows.append(SweepRow(eps, delta, 0, None, None, None, 0))
    sol = scan_eps_set(P, 0.0, region, grid, param=p, delta=None if p is None else 0.0)
    return SweepTrend(
        rows=rows,
        clouds=clouds,
        k=k,
        gap=gap,
        step=step,
        region=region,
        grid=grid,
        final_clusters=solution_clusters(final, gap),
        solution_clusters=solution_clusters(sol, gap),
        solution_cloud=sol,
        param=None if p is None else tuple(float(t) for t in p),
    )


@dataclass(frozen=True)
class Thresholds:
    """Verdict thresholds; ``None`` selects the default policy.

    Default ``diam_final`` is ``max(4 * step, shrink * first diameter)`` and
    default ``mu_final`` likewise with the first ``mu_hat``: the final value
    must be below the resolution floor or have shrunk by the factor
    ``shrink`` over the sweep.
    """

    diam_final: float | None = None
    mu_final: float | None = None
    min_rows: int = 3
    shrink: float = 0.5


@dataclass(frozen=True)
class Verdict:
    tag: str
    reason: str
    final_diam: float | None
    final_mu_hat: float | None
    clusters: int
    thresholds: dict


def verdict(trend: SweepTrend, thresholds: Thresholds = Thresholds()) -> Verdict:
    """Classify a sweep; a total, deterministic function of its inputs."""
    rows = trend.rows
    floor = 4 * trend.step
    first = rows[0]
    diam_final = thresholds.diam_final
    if diam_final is None:
        diam_final = max(floor, thresholds.shrink * first.diam) if first.diam is not None else floor
    mu_final = thresholds.mu_final
    if mu_final is None:
        mu_final = max(floor, thresholds.shrink * first.mu_hat) if first.mu_hat is not None else floor
    used = {
        "diam_final": diam_final,
        "mu_final": mu_final,
        "min_rows": thresholds.min_rows,
        "shrink": thresholds.shrink,
        "k": trend.k,
        "gap": trend.gap,
        "policy_note": "final thresholds are a tool policy; no convergence rate is implied",
    }
    last = rows[-1]

    def out(tag: str, reason: str) -> Verdict:
        return Verdict(tag, reason, last.diam, last.mu_hat, last.clusters, used)

    if any(r.count == 0 for r in rows):
        empty = [r.eps for r in rows if r.count == 0]
        return out(EMPTY, f"empty scan at eps = {empty}")
    if len(rows) < thresholds.min_rows:
        return out(NON_DECREASING, f"{len(rows)} row(s) < min_rows = {thresholds.min_rows}; no trend")
    diams = [r.diam for r in rows]
    mus = [r.mu_hat for r in rows]
    if _nonincreasing(diams) and last.diam <= diam_final and last.clusters == 1:
        return out(LP, f"diameter nonincreasing to {last.diam:.6g} <= {diam_final:.6g}, one cluster")
    if _nonincreasing(mus) and last.mu_hat <= mu_final and last.clusters >= 1:
        return out(
            GENERALIZED,
            f"mu_hat nonincreasing to {last.mu_hat:.6g} <= {mu_final:.6g}, {last.clusters} cluster(s)",
        )
    return out(NON_DECREASING, "neither diameter nor mu_hat decreased below its threshold")


@dataclass(frozen=True)
class IntersectionReport:
    hausdorff_to_final: list[float | None]
    nonincreasing: bool


def parametric_sweep(
    P: SplitProblem,
    p,
    deltas: Sequence[float],
    schedule: Sequence[float],
    **kwargs,
) -> tuple[SweepTrend, IntersectionReport]:
    """Sweep ``S_p(delta_i, eps_i)`` with both parameters driven to 0 together.

    The intersection report tracks the Hausdorff distance from each cloud to
    the smallest one, which should shrink as the sets close in on ``S_p``.
    """
    if P.k == 0:
        raise ValidationError("parametric sweep needs a problem with params > 0")
    trend = sweep(P, schedule, param=p, deltas=deltas, **kwargs)
    hs = [r.hausdorff_to_final for r in trend.rows]
    ok = None not in hs and _nonincreasing(hs)
    return trend, IntersectionReport(hs, ok)


@dataclass
class ProbeReport:
    trials: int
    passed: int
    limits: list[tuple[float, ...]]
    failures: list[tuple[float, ...]]
    message: str

    @property
    def pass_rate(self) -> float:
        return self.passed / self.trials if self.trials else 0.0


def _boundary_indices(X: np.ndarray, step: float) -> np.ndarray:
    """Cloud points with at least one missing axis neighbor on the lattice."""
    keys = {tuple(np.round(x / step).astype(np.int64)) for x in X}
    out = []
    for i, x in enumerate(X):
        base = np.round(x / step).astype(np.int64)
        for j in range(X.shape[1]):
            for s in (-1, 1):
                nb = base.copy()
                nb[j] += s
                if tuple(nb) not in keys:
                    out.append(i)
                    break
            else:
                continue
            break
    return np.array(out if out else range(X.shape[0]), dtype=np.int64)


def closedness_probe(
    P: SplitProblem,
    trials: int,
    seed: int = 0,
    eps: float = 0.0,
    param=None,
    delta: float | None = None,
    region: ScanRegion | None = None,
    step: float = DEFAULT_STEP,
    grid: GridSpec = GridSpec(),
    seq_len: int = 8,
    slack: float | None = None,
) -> ProbeReport:
    """Check that limits of member sequences are members again.

    Scans ``S(eps)`` (the solution set by default), then per trial picks a
    boundary point of the scanned set as target and a sequence of members
    of the same cluster approaching it. The target is re-tested on the next
    finer defect grid at ``eps + slack`` (default slack: one lattice step
    times ``1e-3``); every sequence term must also pass at ``eps``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = P.check_param(param)
    if p is not None and delta is None:
        delta = 0.0
    cloud = scan_eps_set(P, eps, region, grid, param=p, delta=delta, step=step)
    if len(cloud) == 0:
        return ProbeReport(trials, 0, [], [], "no solutions found at this resolution")
    region_step = cloud.tag["region"]["step"]
    slack = 1e-3 * region_step if slack is None else slack
    X = cloud.points
    gap = default_gap(P, region_step)
    labels = cluster_labels(X, gap)
    targets = _boundary_indices(X, region_step)
    rng = np.random.default_rng(seed)
    finer = grid.refined(P.n, P.m)
    passed = 0
    limits, failures = [], []
    for _ in range(trials):
        t = int(rng.choice(targets))
        same = np.flatnonzero(labels == labels[t])
        dist = np.sqrt(((X[same] - X[t]) ** 2).sum(axis=1))
        order = same[np.argsort(dist, kind="stable")]
        # approach the target from the far side: farthest first, target last
        seq = order[: max(1, seq_len)][::-1]
        ok = True
        for i in seq:
            z, w = X[i, : P.n], X[i, P.n :]
            ok = ok and is_member(P, z, w, eps, param=p, delta=delta, grid=grid)[0]
        z, w = X[t, : P.n], X[t, P.n :]
        ok = ok and is_member(P, z, w, eps + slack, param=p, delta=delta, grid=finer)[0]
        limit = tuple(float(v) for v in X[t])
        limits.append(limit)
        if ok:
            passed += 1
        else:
            failures.append(limit)
    msg = f"{passed}/{trials} probe limits re-passed membership at eps + {slack:g} (threshold {threshold(eps + slack):g})"
    return ProbeReport(trials, passed, limits, failures, msg)


# --------------------------------------------------------------------------
# reports


def _cluster_dict(c: Cluster) -> dict:
    return {"representative": list(c.representative), "radius": c.radius, "size": c.size}


def build_report(P: SplitProblem, trend: SweepTrend, v: Verdict, intersection: IntersectionReport | None = None) -> dict:
    """JSON-ready sweep report. Contains no timestamps or paths."""
    report = {
        "tool": "smvi",
        "version": __version__,
        "problem": P.describe(),
        "param": None if trend.param is None else list(trend.param),
        "schedule": {
            "eps": [r.eps for r in trend.rows],
            "delta": [r.delta for r in trend.rows],
        },
        "rows": [
            {
                "eps": r.eps,
                "delta": r.delta,
                "count": r.count,
                "diam": r.diam,
                "mu_hat": r.mu_hat,
                "hausdorff_to_final": r.hausdorff_to_final,
                "clusters": r.clusters,
            }
            for r in trend.rows
        ],
        "final_clusters": [_cluster_dict(c) for c in trend.final_clusters],
        "solution_set": {
            "count": len(trend.solution_cloud),
            "clusters": [_cluster_dict(c) for c in trend.solution_clusters],
        },
        "verdict": v.tag,
        "verdict_reason": v.reason,
        "thresholds": v.thresholds,
        "resolution": {
            "region": trend.region.describe(),
            "grid": trend.grid.describe(P.n, P.m),
        },
    }
    if intersection is not None:
        report["intersection"] = asdict(intersection)
    return report


def dumps_report(report: dict) -> str:
    # json uses repr() for floats: shortest round-trip decimal form
    return json.dumps(report, indent=2, allow_nan=False) + "\n"
