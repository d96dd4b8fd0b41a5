"""Exact metric computations on finite point clouds.

Diameter, one-sided excess and Hausdorff distance are computed by exhaustive
pairwise distances (chunked, no spatial index). The Kuratowski measure of
noncompactness is estimated by a greedy k-center cover.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .model import MultiMap, selection_rows

__all__ = [
    "PointCloud",
    "diameter",
    "excess",
    "hausdorff",
    "kuratowski_est",
    "farthest_point_order",
    "MuBoundReport",
    "mu_bound_report",
    "HContReport",
    "hcont_ratio",
]

_BLOCK = 2048


@dataclass(frozen=True)
class PointCloud:
    """Finite sample of a subset of R^d, one point per row."""

    points: np.ndarray
    tag: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if pts.size else pts.reshape(0, 0)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-D array (one point per row)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite values")
        object.__setattr__(self, "points", pts)

    @classmethod
    def empty(cls, dim: int, tag: dict | None = None) -> "PointCloud":
        return cls(np.zeros((0, dim)), tag or {})

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_csv(self, comment: str | None = None) -> str:
        buf = io.StringIO()
        if comment:
            buf.write(f"# {comment}\n")
        buf.write(f"dim,{self.dim}\n")
        for row in self.points:
            buf.write(",".join(repr(float(v)) for v in row))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PointCloud":
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if not lines or not lines[0].startswith("dim,"):
            raise ValueError("point cloud CSV must start with a 'dim,<d>' header")
        dim = int(lines[0].split(",", 1)[1])
        rows = []
        for i, ln in enumerate(lines[1:], start=2):
            vals = [float(v) for v in ln.split(",")]
            if len(vals) != dim:
                raise ValueError(f"row {i}: expected {dim} values, got {len(vals)}")
            rows.append(vals)
        pts = np.array(rows, dtype=float).reshape(len(rows), dim)
        return cls(pts)


def _pts(P) -> np.ndarray:
    arr = P.points if isinstance(P, PointCloud) else np.asarray(P, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def _nonempty(*clouds: np.ndarray) -> None:
    for c in clouds:
        if c.shape[0] == 0:
            raise ValueError("empty point cloud")
    if len(clouds) == 2 and clouds[0].shape[1] != clouds[1].shape[1]:
        raise ValueError("point clouds have different dimensions")


def diameter(P) -> float:
    """Largest pairwise distance."""
    X = _pts(P)
    _nonempty(X)
    best = 0.0
    for a in range(0, X.shape[0], _BLOCK):
        best = max(best, float(cdist(X[a : a + _BLOCK], X[a:]).max()))
    return best


def _directed(X: np.ndarray, Y: np.ndarray) -> float:
    worst = 0.0
    for a in range(0, X.shape[0], _BLOCK):
        worst = max(worst, float(cdist(X[a : a + _BLOCK], Y).min(axis=1).max()))
    return worst


def excess(P, Q) -> float:
    """``sup_{a in P} d(a, Q)``: how far P sticks out of Q."""
    X, Y = _pts(P), _pts(Q)
    _nonempty(X, Y)
    return _directed(X, Y)


def hausdorff(P, Q) -> float:
    X, Y = _pts(P), _pts(Q)
    _nonempty(X, Y)
    return max(_directed(X, Y), _directed(Y, X))


def _lexmin_index(X: np.ndarray) -> int:
    # np.lexsort treats the last key as primary
    return int(np.lexsort(X.T[::-1])[0])


def farthest_point_order(P, k: int) -> list[int]:
    """Indices of up to ``k`` greedy centers, starting at the lexicographic minimum.

    Stops early once every point coincides with a chosen center.
    """
    X = _pts(P)
    _nonempty(X)
    first = _lexmin_index(X)
    centers = [first]
    mind = cdist(X, X[first : first + 1])[:, 0]
    while len(centers) < k:
        nxt = int(np.argmax(mind))
        if mind[nxt] == 0.0:
            break
        centers.append(nxt)
        mind = np.minimum(mind, cdist(X, X[nxt : nxt + 1])[:, 0])
    return centers


def _cover_diameter(X: np.ndarray, centers: Sequence[int]) -> float:
    d = cdist(X, X[list(centers)])
    owner = np.argmin(d, axis=1)  # ties go to the earlier center
    worst = 0.0
    for c in range(len(centers)):
        cell = X[owner == c]
        if cell.shape[0] > 1:
            worst = max(worst, diameter(cell))
    return worst


def kuratowski_est(P, k: int) -> float:
    """Surrogate for the Kuratowski measure: best greedy cover by at most ``k`` cells.

    For each prefix of the farthest-point traversal the cloud is split into
    nearest-center cells; the value is the smallest largest-cell diameter
    over the prefixes. Equals the diameter for ``k = 1`` and 0 once ``k``
    reaches the number of distinct points; nonincreasing in ``k``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    X = _pts(P)
    _nonempty(X)
    order = farthest_point_order(X, k)
    best = math.inf
    for j in range(1, len(order) + 1):
        best = min(best, _cover_diameter(X, order[:j]))
        if best == 0.0:
            break
    return best


class MuBoundReport(NamedTuple):
    lhs: float
    rhs: float
    violated: bool


def mu_bound_report(P, Q, k: int, tol: float = 1e-6) -> MuBoundReport:
    """Both sides of ``mu(P) <= 2 H(P, Q) + mu(Q)`` with the surrogate ``mu``.

    A violation only flags discretization slack of the estimator; the
    inequality holds for the true measure.
    """
    lhs = kuratowski_est(P, k)
    rhs = 2.0 * hausdorff(P, Q) + kuratowski_est(Q, k)
    return MuBoundReport(lhs, rhs, lhs > rhs + tol)


class HContReport(NamedTuple):
    ratio: float
    excluded: int


def _map_values(B: MultiMap, prefix: str, x, p) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    params = None if p is None else np.asarray(p, dtype=float).reshape(1, -1)
    return selection_rows(B, prefix, x, params)[:, 0, :]


def hcont_ratio(B: MultiMap, pairs, prefix: str = "x") -> HContReport:
    """Largest ``H(B(x), B(y)) / (|x - y| + |p - q|)`` over the given pairs.

    ``pairs`` holds ``(x, y)`` or ``(x, y, p, q)`` tuples; coincident pairs
    are skipped and counted in ``excluded``.
    """
    worst = 0.0
    excluded = 0
    for pair in pairs:
        if len(pair) == 2:
            x, y = pair
            p = q = None
            dp = 0.0
        else:
            x, y, p, q = pair
            dp = float(np.linalg.norm(np.subtract(p, q, dtype=float)))
        denom = float(np.linalg.norm(np.subtract(x, y, dtype=float))) + dp
        if denom == 0.0:
            excluded += 1
            continue
        h = hausdorff(_map_values(B, prefix, x, p), _map_values(B, prefix, y, q))
        worst = max(worst, h / denom)
    return HContReport(worst, excluded)
