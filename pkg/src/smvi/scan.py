"""Grid scans of the approximate solution sets and single-linkage clustering."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .metrics import PointCloud
from .model import SplitProblem, ValidationError, apply_rows
from .residual import (
    threshold,
    GridSpec,
    _dist_rows,
    _rownorm,
    best_defect_rows,
    param_ball_samples,
    set_grid,
)

__all__ = [
    "ScanRegion",
    "default_region",
    "scan_eps_set",
    "Cluster",
    "solution_clusters",
    "cluster_labels",
    "default_gap",
    "MAX_SCAN_DIM",
]

DEFAULT_STEP = 0.01
MAX_SCAN_DIM = 4
_PAIR_CHUNK = 1 << 22


def _snap(value: float) -> float:
    return float(np.round(value, 12)) + 0.0


@dataclass(frozen=True)
class ScanRegion:
    """Box in (z, w)-space sampled with a uniform step.

    ``lower`` and ``upper`` have ``n + m`` entries: the z-coordinates first.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    step: float

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValidationError("region bounds have different lengths")
        if not self.step > 0:
            raise ValidationError("region step must be positive")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ValidationError(f"region axis [{lo}, {hi}] is empty")
        if min(self.counts) < 2:
            raise ValidationError("region resolution must be >= 2 points per axis")

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(int(math.floor((hi - lo) / self.step + 1e-9)) + 1 for lo, hi in zip(self.lower, self.upper))

    def axis(self, i: int) -> np.ndarray:
        idx = np.arange(self.counts[i])
        return np.array([_snap(self.lower[i] + j * self.step) for j in idx])

    def describe(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "step": self.step, "counts": list(self.counts)}


def default_region(P: SplitProblem, eps: float, step: float = DEFAULT_STEP) -> ScanRegion:
    """Bounding boxes of C and Q inflated by ``eps + 2 step``, snapped outward to the step lattice."""
    lo_c, hi_c = P.C.bounding_box()
    lo_q, hi_q = P.Q.bounding_box()
    lo = np.concatenate([lo_c, lo_q]) - eps - 2 * step
    hi = np.concatenate([hi_c, hi_q]) + eps + 2 * step
    lo = np.floor(lo / step + 1e-9) * step
    hi = np.ceil(hi / step - 1e-9) * step
    return ScanRegion(tuple(_snap(v) for v in lo), tuple(_snap(v) for v in hi), step)


def _check_region(P: SplitProblem, region: ScanRegion, eps: float) -> None:
    if len(region.lower) != P.n + P.m:
        raise ValidationError(f"region has {len(region.lower)} axes, problem needs {P.n + P.m}")
    lo_c, hi_c = P.C.bounding_box()
    lo_q, hi_q = P.Q.bounding_box()
    need_lo = np.concatenate([lo_c, lo_q]) - eps
    need_hi = np.concatenate([hi_c, hi_q]) + eps
    tol = 1e-12
    if np.any(np.array(region.lower) > need_lo + tol) or np.any(np.array(region.upper) < need_hi - tol):
        raise ValidationError(
            "scan region does not contain the eps-inflation of C x Q; members would be truncated"
        )


def _product(region: ScanRegion, axes: range) -> np.ndarray:
    grids = [region.axis(i) for i in axes]
    mesh = np.meshgrid(*grids, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def scan_eps_set(
    P: SplitProblem,
    eps: float,
    region: ScanRegion | None = None,
    grid: GridSpec = GridSpec(),
    param=None,
    delta: float | None = None,
    step: float = DEFAULT_STEP,
    allow_large: bool = False,
) -> PointCloud:
    """All region grid pairs ``(z, w)`` in ``S(eps)`` (or ``S_p(delta, eps)``).

    Points are in row-major order over the (z, w) coordinates. The decision
    for each pair is the one :func:`smvi.residual.is_member` makes; the scan
    only reorganizes the work, since feasibility depends on one space at a
    time and each defect on one side of the pair.
    """
    if eps < 0:
        raise ValidationError(f"eps must be >= 0, got {eps}")
    if delta is not None and delta < 0:
        raise ValidationError(f"delta must be >= 0, got {delta}")
    if P.n + P.m > MAX_SCAN_DIM and not allow_large:
        raise ValidationError(
            f"scan dimension n + m = {P.n + P.m} exceeds {MAX_SCAN_DIM}; pass allow_large to override"
        )
    p = P.check_param(param)
    if p is None and delta not in (None, 0, 0.0):
        raise ValidationError("delta given for a non-parametric problem")
    region = region or default_region(P, eps, step)
    _check_region(P, region, eps)
    thr = threshold(eps)
    tag = {
        "eps": eps,
        "delta": None if p is None else (0.0 if delta is None else delta),
        "param": None if p is None else [float(t) for t in p],
        "region": region.describe(),
        "grid": grid.describe(P.n, P.m),
    }

    Z = _product(region, range(P.n))
    W = _product(region, range(P.n, P.n + P.m))
    Z = Z[_dist_rows(Z, P.C) <= thr]
    W = W[_dist_rows(W, P.Q) <= thr]
    if Z.shape[0] == 0 or W.shape[0] == 0:
        return PointCloud.empty(P.n + P.m, tag)

    XC = set_grid(P.C, grid.level_for("C", P.n))
    XQ = set_grid(P.Q, grid.level_for("Q", P.m))
    if p is None:
        d1 = best_defect_rows(Z, P.B1, P.f, "x", XC, None)[0]
        d2 = best_defect_rows(W, P.B2, P.g, "y", XQ, None)[0]
        Z, W = Z[d1 <= thr], W[d2 <= thr]
        ok1 = ok2 = None
    else:
        qs = param_ball_samples(p, 0.0 if delta is None else delta, grid.param_count)
        # ok1[i, s]: z_i passes the first defect at sample q_s
        ok1 = _param_mask(Z, qs, lambda ZZ, QQ: best_defect_rows(ZZ, P.B1, P.f, "x", XC, QQ)[0], thr)
        ok2 = _param_mask(W, qs, lambda WW, QQ: best_defect_rows(WW, P.B2, P.g, "y", XQ, QQ)[0], thr)
        keep1, keep2 = ok1.any(axis=1), ok2.any(axis=1)
        Z, W, ok1, ok2 = Z[keep1], W[keep2], ok1[keep1], ok2[keep2]
    if Z.shape[0] == 0 or W.shape[0] == 0:
        return PointCloud.empty(P.n + P.m, tag)

    AZ = apply_rows(P.A, Z)
    out = []
    step_z = max(1, _PAIR_CHUNK // max(1, W.shape[0]))
    for a in range(0, Z.shape[0], step_z):
        b = min(Z.shape[0], a + step_z)
        acc = np.zeros((b - a, W.shape[0]))
        for j in range(P.m):
            diff = W[None, :, j] - AZ[a:b, j, None]
            acc += diff * diff
        mask = np.sqrt(acc) <= thr
        if ok1 is not None:
            mask &= (ok1[a:b].astype(np.int64) @ ok2.T.astype(np.int64)) > 0
        iz, iw = np.nonzero(mask)
        if iz.size:
            out.append(np.concatenate([Z[a:b][iz], W[iw]], axis=1))
    if not out:
        return PointCloud.empty(P.n + P.m, tag)
    return PointCloud(np.concatenate(out), tag)


def _param_mask(X: np.ndarray, qs: np.ndarray, defect, thr: float) -> np.ndarray:
    N, nq = X.shape[0], qs.shape[0]
    XX = np.repeat(X, nq, axis=0)
    QQ = np.tile(qs, (N, 1))
    return (defect(XX, QQ) <= thr).reshape(N, nq)


@dataclass(frozen=True)
class Cluster:
    representative: tuple[float, ...]
    radius: float
    size: int


def default_gap(P: SplitProblem, step: float = DEFAULT_STEP) -> float:
    return max(0.25 * P.C.bbox_diameter(), 2 * step)


def cluster_labels(X: np.ndarray, gap: float) -> np.ndarray:
    """Single-linkage component label of every row of ``X``."""
    n = X.shape[0]
    pairs = cKDTree(X).query_pairs(gap * (1 + 1e-12), output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    return connected_components(graph, directed=False)[1]


def solution_clusters(cloud, gap: float) -> list[Cluster]:
    """Single-linkage components (edges at distance ``<= gap``).

    Each cluster reports its centroid, the largest distance from the
    centroid to a member, and its size. Clusters are ordered by their
    lexicographically smallest member, so the result does not depend on the
    order of the points.
    """
    if not gap > 0:
        raise ValueError("gap must be positive")
    X = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    if X.shape[0] == 0:
        return []
    labels = cluster_labels(X, gap)
    clusters = []
    for lab in np.unique(labels):
        members = X[labels == lab]
        members = members[np.lexsort(members.T[::-1])]
        centroid = members.mean(axis=0)
        radius = float(_rownorm(members - centroid).max())
        clusters.append((tuple(members[0]), Cluster(tuple(float(c) for c in centroid), radius, members.shape[0])))
    clusters.sort(key=lambda t: t[0])
    return [c for _, c in clusters]
