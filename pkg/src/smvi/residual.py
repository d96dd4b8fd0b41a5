"""Defect quantities and epsilon-membership in the approximate solution sets.

For a candidate pair ``(z, w)`` the approximate solution set ``S(eps)``
requires five numbers to be at most ``eps``: the distances of ``z`` to ``C``
and ``w`` to ``Q``, the link gap ``||w - A z||``, and the two variational
defects

    defect1 = min_{u in B1(z)} sup_{x in C} <u, z - x> + f(z) - f(x)

(and the analogue for ``B2``, ``g``, ``Q``). The supremum is taken over a
dyadic grid of the constraint set, which under-estimates the true value; a
reported membership can therefore be optimistic by at most the modulus of
the integrand over one grid cell.

The parametric set ``S_p(delta, eps)`` is the union over ``q`` in the closed
ball ``B(p, delta)`` of the eps-approximate sets at ``q``; the union is
taken over a uniform sample of that ball.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exprlang import Expr
from .model import (
    ConstraintSet,
    SplitProblem,
    ValidationError,
    apply_rows,
    eval_rows,
    make_env,
    selection_rows,
)

__all__ = [
    "TAU0",
    "threshold",
    "GridSpec",
    "ResidualProfile",
    "SequenceReport",
    "dist_to_set",
    "project",
    "set_grid",
    "param_ball_samples",
    "vi_defect",
    "smvi_profile",
    "is_member",
    "check_sequence",
]

# numerical floor for the exact (eps = 0) conditions
TAU0 = 1e-9
# absolute slack for rounding in lattice arithmetic (|0.98 - 0.97| > 0.01 in binary)
ROUND_SLACK = 1e-12

# rows x grid points evaluated per chunk
_CHUNK = 1 << 21


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the ``for all x in C`` quantifier.

    A level-``r`` grid has ``2**r + 1`` points per axis; level ``r + 1``
    contains level ``r``. ``None`` picks a level from the dimension:
    10 in 1-D (1025 points), 7 in 2-D (129 per axis), 5 above.
    ``param_count`` is the per-axis sample count over a parameter ball
    (odd, so the center is always included).
    """

    c_level: int | None = None
    q_level: int | None = None
    param_count: int = 33

    def __post_init__(self):
        for lvl in (self.c_level, self.q_level):
            if lvl is not None and not 1 <= lvl <= 14:
                raise ValueError(f"grid level must be in [1, 14], got {lvl}")
        if self.param_count < 3 or self.param_count % 2 == 0:
            raise ValueError("param_count must be odd and >= 3")

    @staticmethod
    def default_level(dim: int) -> int:
        return {1: 10, 2: 7}.get(dim, 5)

    def level_for(self, which: str, dim: int) -> int:
        lvl = self.c_level if which == "C" else self.q_level
        return self.default_level(dim) if lvl is None else lvl

    def refined(self, dim_c: int, dim_q: int) -> "GridSpec":
        return GridSpec(self.level_for("C", dim_c) + 1, self.level_for("Q", dim_q) + 1, self.param_count)

    def describe(self, dim_c: int, dim_q: int) -> dict:
        lc, lq = self.level_for("C", dim_c), self.level_for("Q", dim_q)
        return {
            "C_level": lc,
            "C_points_per_axis": 2**lc + 1,
            "Q_level": lq,
            "Q_points_per_axis": 2**lq + 1,
            "param_points_per_axis": self.param_count,
        }


def threshold(eps: float) -> float:
    """Comparison bound used for the five membership quantities at ``eps``."""
    return max(eps, TAU0) + ROUND_SLACK


# --------------------------------------------------------------------------
# distance and projection


def _rownorm(D: np.ndarray) -> np.ndarray:
    acc = np.zeros(D.shape[0])
    for j in range(D.shape[1]):
        acc += D[:, j] * D[:, j]
    return np.sqrt(acc)


def _project_rows(X: np.ndarray, S: ConstraintSet) -> np.ndarray:
    if S.kind == "box":
        return np.clip(X, np.array(S.lower), np.array(S.upper))
    c = np.array(S.center)
    d = X - c
    r = _rownorm(d)
    out = X.copy()
    outside = r > S.radius
    out[outside] = c + d[outside] * (S.radius / r[outside])[:, None]
    return out


def _dist_rows(X: np.ndarray, S: ConstraintSet) -> np.ndarray:
    if S.kind == "box":
        excess = np.maximum(np.array(S.lower) - X, 0.0) + np.maximum(X - np.array(S.upper), 0.0)
        return _rownorm(excess)
    return np.maximum(_rownorm(X - np.array(S.center)) - S.radius, 0.0)


def _check_dim(x: np.ndarray, dim: int, what: str = "point") -> None:
    if x.shape[-1] != dim:
        raise ValidationError(f"dimension mismatch: {what} has {x.shape[-1]} components, expected {dim}")


def dist_to_set(x, S: ConstraintSet) -> float:
    """Euclidean distance from ``x`` to ``S`` (closed form)."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    _check_dim(x, S.dim)
    return float(_dist_rows(x, S)[0])


def project(x, S: ConstraintSet) -> np.ndarray:
    """Nearest point of ``S`` to ``x``."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    _check_dim(x, S.dim)
    return _project_rows(x, S)[0]


# --------------------------------------------------------------------------
# grids


def _dyadic_axis(lo: float, hi: float, level: int) -> np.ndarray:
    # t = i / 2**level is exact, so level r + 1 reproduces level r bitwise
    t = np.arange(2**level + 1) / float(2**level)
    return lo + (hi - lo) * t


@functools.lru_cache(maxsize=64)
def _cached_grid(S: ConstraintSet, level: int) -> np.ndarray:
    lo, hi = S.bounding_box()
    axes = [np.unique(_dyadic_axis(a, b, level)) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    if S.kind == "ball":
        pts = pts[_dist_rows(pts, S) == 0.0]
        if pts.shape[0] == 0:
            pts = np.array([S.center])
    pts.setflags(write=False)
    return pts


def set_grid(S: ConstraintSet, level: int) -> np.ndarray:
    """Dyadic sample of ``S``: bounding-box grid intersected with ``S``."""
    return _cached_grid(S, int(level))


def param_ball_samples(p, delta: float, count: int) -> np.ndarray:
    """Uniform sample of the closed ball ``B(p, delta)``, center first.

    Grid over the bounding box with ``count`` points per axis, restricted to
    the ball; the axis boundary points are on the grid because ``count`` is
    odd. ``delta = 0`` gives ``[p]``.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    if delta < 0:
        raise ValidationError(f"delta must be >= 0, got {delta}")
    if delta == 0:
        return p[None, :].copy()
    half = count // 2
    offs = np.arange(-half, half + 1) * (delta / half)
    mesh = np.meshgrid(*([offs] * p.size), indexing="ij")
    d = np.stack([m.reshape(-1) for m in mesh], axis=1)
    d = d[_rownorm(d) <= delta * (1 + 1e-12)]
    center = np.all(d == 0.0, axis=1)
    d = np.concatenate([d[center], d[~center]])
    return p + d


# --------------------------------------------------------------------------
# variational defects


def defect_rows(
    Z: np.ndarray,
    U: np.ndarray,
    phi: Expr,
    prefix: str,
    X: np.ndarray,
    params: np.ndarray | None,
) -> np.ndarray:
    """``max_x <U_i, Z_i - x> + phi(Z_i) - phi(x)`` for every row ``i``.

    ``X`` is the sample of the constraint set; ``params`` (rows matching
    ``Z``) binds the ``p`` variables. Evaluation is elementwise in a fixed
    order, so the value for a row does not depend on the batch it is in.
    """
    N = Z.shape[0]
    out = np.empty(N)
    if N == 0:
        return out
    phi_z = eval_rows(phi, make_env(prefix, Z, params), N)
    if params is None:
        phi_x = eval_rows(phi, make_env(prefix, X, None), X.shape[0])[None, :]
    else:
        # phi(x, q) for every distinct parameter row
        uniq, inverse = np.unique(params, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        table = np.empty((uniq.shape[0], X.shape[0]))
        for i, q in enumerate(uniq):
            qrows = np.broadcast_to(q, (X.shape[0], q.size))
            table[i] = eval_rows(phi, make_env(prefix, X, qrows), X.shape[0])
    step = max(1, _CHUNK // max(1, X.shape[0]))
    for a in range(0, N, step):
        b = min(N, a + step)
        acc = np.zeros((b - a, X.shape[0]))
        for j in range(Z.shape[1]):
            acc += U[a:b, j, None] * (Z[a:b, j, None] - X[None, :, j])
        acc += phi_z[a:b, None]
        if params is None:
            acc -= phi_x
        else:
            acc -= table[inverse[a:b]]
        out[a:b] = acc.max(axis=1)
    return out


def best_defect_rows(
    Z: np.ndarray,
    B,
    phi: Expr,
    prefix: str,
    X: np.ndarray,
    params: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimum defect over the selections of ``B``.

    Returns ``(defect, argmin_index, selection_values)``; ties go to the
    first selection.
    """
    sel = selection_rows(B, prefix, Z, params)
    values = np.stack([defect_rows(Z, sel[s], phi, prefix, X, params) for s in range(sel.shape[0])])
    idx = np.argmin(values, axis=0)
    best = values[idx, np.arange(Z.shape[0])]
    return best, idx, sel


def vi_defect(z, u, phi: Expr, S: ConstraintSet, param=None, grid: GridSpec = GridSpec(), prefix: str = "x") -> float:
    """Grid maximum of ``<u, z - x> + phi(z) - phi(x)`` over ``x`` in ``S``.

    A lower bound of the supremum over ``S``. ``prefix`` names the variables
    ``phi`` is written in (``x`` for the first space, ``y`` for the second).
    """
    z = np.asarray(z, dtype=float).reshape(1, -1)
    u = np.asarray(u, dtype=float).reshape(1, -1)
    _check_dim(z, S.dim)
    _check_dim(u, S.dim, "selection")
    params = None if param is None else np.asarray(param, dtype=float).reshape(1, -1)
    which = "C" if prefix == "x" else "Q"
    X = set_grid(S, grid.level_for(which, S.dim))
    return float(defect_rows(z, u, phi, prefix, X, params)[0])


# --------------------------------------------------------------------------
# profiles and membership


@dataclass(frozen=True)
class ResidualProfile:
    feas_C: float
    feas_Q: float
    link: float
    defect1: float
    defect2: float
    u: tuple[float, ...]
    v: tuple[float, ...]
    u_index: int
    v_index: int
    grid: dict = field(compare=False)
    param: tuple[float, ...] | None = None

    def quantities(self) -> tuple[float, float, float, float, float]:
        return (self.feas_C, self.feas_Q, self.link, self.defect1, self.defect2)

    def worst(self) -> float:
        return max(self.quantities())

    def passes(self, eps: float) -> bool:
        thr = threshold(eps)
        return all(q <= thr for q in self.quantities())

    def as_dict(self) -> dict:
        return {
            "feas_C": self.feas_C,
            "feas_Q": self.feas_Q,
            "link": self.link,
            "defect1": self.defect1,
            "defect2": self.defect2,
            "u": list(self.u),
            "v": list(self.v),
            "u_index": self.u_index,
            "v_index": self.v_index,
            "param": None if self.param is None else list(self.param),
            "grid": self.grid,
        }


def _profiles(P: SplitProblem, z: np.ndarray, w: np.ndarray, params: np.ndarray | None, grid: GridSpec) -> list[ResidualProfile]:
    """Profiles of one ``(z, w)`` pair at every parameter row in ``params``."""
    nq = 1 if params is None else params.shape[0]
    Z = np.broadcast_to(z, (nq, P.n)).copy()
    W = np.broadcast_to(w, (nq, P.m)).copy()
    feas_C = float(_dist_rows(Z[:1], P.C)[0])
    feas_Q = float(_dist_rows(W[:1], P.Q)[0])
    link = float(_rownorm(W[:1] - apply_rows(P.A, Z[:1]))[0])
    XC = set_grid(P.C, grid.level_for("C", P.n))
    XQ = set_grid(P.Q, grid.level_for("Q", P.m))
    d1, i1, s1 = best_defect_rows(Z, P.B1, P.f, "x", XC, params)
    d2, i2, s2 = best_defect_rows(W, P.B2, P.g, "y", XQ, params)
    info = grid.describe(P.n, P.m)
    out = []
    for r in range(nq):
        out.append(
            ResidualProfile(
                feas_C=feas_C,
                feas_Q=feas_Q,
                link=link,
                defect1=float(d1[r]),
                defect2=float(d2[r]),
                u=tuple(float(t) for t in s1[i1[r], r]),
                v=tuple(float(t) for t in s2[i2[r], r]),
                u_index=int(i1[r]),
                v_index=int(i2[r]),
                grid=info,
                param=None if params is None else tuple(float(t) for t in params[r]),
            )
        )
    return out


def _pair(P: SplitProblem, z, w) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    _check_dim(z, P.n, "z")
    _check_dim(w, P.m, "w")
    return z, w


def smvi_profile(P: SplitProblem, z, w, param=None, grid: GridSpec = GridSpec()) -> ResidualProfile:
    """All five membership quantities for ``(z, w)`` (at parameter ``param``)."""
    z, w = _pair(P, z, w)
    p = P.check_param(param)
    params = None if p is None else p[None, :]
    return _profiles(P, z, w, params, grid)[0]


def is_member(
    P: SplitProblem,
    z,
    w,
    eps: float,
    param=None,
    delta: float | None = None,
    grid: GridSpec = GridSpec(),
) -> tuple[bool, ResidualProfile]:
    """Decide ``(z, w) in S(eps)``, or ``S_p(delta, eps)`` for parametric problems.

    ``eps = 0`` is decided with the floor ``TAU0``. In the parametric case the
    returned profile is the first sampled ``q`` that passes, or else the one
    with the smallest worst quantity.
    """
    if eps < 0:
        raise ValidationError(f"eps must be >= 0, got {eps}")
    if delta is not None and delta < 0:
        raise ValidationError(f"delta must be >= 0, got {delta}")
    z, w = _pair(P, z, w)
    p = P.check_param(param)
    if p is None:
        if delta not in (None, 0, 0.0):
            raise ValidationError("delta given for a non-parametric problem")
        prof = _profiles(P, z, w, None, grid)[0]
        return prof.passes(eps), prof
    qs = param_ball_samples(p, 0.0 if delta is None else delta, grid.param_count)
    profs = _profiles(P, z, w, qs, grid)
    for prof in profs:
        if prof.passes(eps):
            return True, prof
    return False, min(profs, key=lambda pr: pr.worst())


# --------------------------------------------------------------------------
# approximating sequences


@dataclass
class SequenceReport:
    mode: str
    passed: list[bool]
    profiles: list[ResidualProfile]
    first_failure: int | None
    cauchy: bool
    tail_spread: float
    limit: tuple[float, ...]
    distance_to_solutions: float | None

    @property
    def all_pass(self) -> bool:
        return all(self.passed)


def check_sequence(
    P: SplitProblem,
    seq: Sequence[tuple[Sequence[float], Sequence[float]]],
    schedule: Sequence[float],
    mode: str = "generalized",
    param=None,
    grid: GridSpec = GridSpec(),
    solutions: np.ndarray | None = None,
    cauchy_tol: float | None = None,
) -> SequenceReport:
    """Check each term of an (generalized) approximating sequence.

    ``strict`` requires ``z_n`` in ``C`` and ``w_n`` in ``Q`` up to ``TAU0``;
    ``generalized`` only distance ``<= eps_n``. The tail spread is the
    largest pairwise distance among the last half of the terms; the sequence
    counts as Cauchy when it is at most ``cauchy_tol`` (default: twice the
    last ``eps_n``). ``solutions`` is an ``(N, n + m)`` array of scanned
    solution points used for the limit distance.
    """
    if mode not in ("strict", "generalized"):
        raise ValueError(f"mode must be 'strict' or 'generalized', got {mode!r}")
    if len(seq) != len(schedule) or not seq:
        raise ValidationError("sequence and schedule must be nonempty and of equal length")
    sched = np.asarray(schedule, dtype=float)
    if np.any(sched <= 0) or np.any(np.diff(sched) > 0):
        raise ValidationError("schedule not decreasing: eps_n must be positive and nonincreasing")
    passed, profiles = [], []
    for (z, w), eps in zip(seq, sched):
        ok, prof = is_member(P, z, w, float(eps), param=param, delta=0.0 if P.k else None, grid=grid)
        if mode == "strict":
            ok = ok and max(prof.feas_C, prof.feas_Q) <= threshold(0.0)
        passed.append(bool(ok))
        profiles.append(prof)
    pts = np.array([np.concatenate([np.ravel(z), np.ravel(w)]) for z, w in seq], dtype=float)
    tail = pts[len(pts) // 2 :]
    diffs = tail[:, None, :] - tail[None, :, :]
    spread = float(np.sqrt((diffs**2).sum(axis=2)).max())
    tol = 2 * float(sched[-1]) if cauchy_tol is None else cauchy_tol
    dist = None
    if solutions is not None and len(solutions):
        dist = float(np.sqrt(((np.asarray(solutions) - pts[-1]) ** 2).sum(axis=1)).min())
    first = next((i for i, ok in enumerate(passed) if not ok), None)
    return SequenceReport(
        mode=mode,
        passed=passed,
        profiles=profiles,
        first_failure=first,
        cauchy=spread <= tol,
        tail_spread=spread,
        limit=tuple(float(t) for t in pts[-1]),
        distance_to_solutions=dist,
    )
