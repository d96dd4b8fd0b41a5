"""Problem instances: constraint sets, the coupling operator, multimaps.

A :class:`SplitProblem` holds the data of a split multivalued variational
inequality: find ``x`` in ``C`` with ``y = A x`` in ``Q`` and selections
``u`` in ``B1(x)``, ``v`` in ``B2(y)`` such that

    <u, x - x'> + f(x) - f(x') <= 0   for all x' in C
    <v, y - y'> + g(y) - g(y') <= 0   for all y' in Q

With ``k > 0`` the data may depend on a parameter ``p`` in R^k (the
parametric family); ``f`` and ``g`` then play the role of the parametric
bifunctions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exprlang import Expr, Literal, Neg, VAR_PATTERN, evaluate, free_vars, parse, to_source

__all__ = [
    "ValidationError",
    "ConstraintSet",
    "LinearOperator",
    "MultiMap",
    "SplitProblem",
    "build_problem",
    "apply_linear",
    "selections",
    "reduce_sfp",
    "reduce_svip",
    "reduce_smvip",
    "reduce_smp",
]


class ValidationError(ValueError):
    pass


def _as_vector(values, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class ConstraintSet:
    """Axis-aligned box or closed Euclidean ball."""

    kind: str
    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()
    center: tuple[float, ...] = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == "box":
            if len(self.lower) != len(self.upper) or not self.lower:
                raise ValidationError("malformed set bounds: lower/upper length mismatch")
            for lo, hi in zip(self.lower, self.upper):
                if not lo <= hi:
                    raise ValidationError(f"malformed set bounds: lower {lo} > upper {hi}")
        elif self.kind == "ball":
            if not self.center:
                raise ValidationError("malformed set bounds: empty ball center")
            if not (np.isfinite(self.radius) and self.radius >= 0):
                raise ValidationError(f"malformed set bounds: radius {self.radius} < 0")
        else:
            raise ValidationError(f"unknown set kind {self.kind!r}")

    @classmethod
    def box(cls, lower, upper) -> "ConstraintSet":
        return cls("box", lower=_as_vector(lower, "lower"), upper=_as_vector(upper, "upper"))

    @classmethod
    def ball(cls, center, radius: float) -> "ConstraintSet":
        return cls("ball", center=_as_vector(center, "center"), radius=float(radius))

    @property
    def dim(self) -> int:
        return len(self.lower) if self.kind == "box" else len(self.center)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "box":
            return np.array(self.lower), np.array(self.upper)
        c = np.array(self.center)
        return c - self.radius, c + self.radius

    def bbox_diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.sqrt(np.sum((hi - lo) ** 2)))


@dataclass(frozen=True)
class LinearOperator:
    """Real ``m x n`` matrix mapping R^n to R^m."""

    matrix: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not self.matrix or not self.matrix[0]:
            raise ValidationError("operator matrix is empty")
        width = len(self.matrix[0])
        for row in self.matrix:
            if len(row) != width:
                raise ValidationError("operator rows have different lengths")
            if not all(np.isfinite(row)):
                raise ValidationError("operator entries must be finite")

    @classmethod
    def from_rows(cls, rows) -> "LinearOperator":
        arr = np.atleast_2d(np.asarray(rows, dtype=float))
        return cls(tuple(tuple(float(v) for v in row) for row in arr))

    @classmethod
    def identity(cls, n: int) -> "LinearOperator":
        return cls.from_rows(np.eye(n))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.matrix), len(self.matrix[0])

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)


def apply_rows(A: LinearOperator, X: np.ndarray) -> np.ndarray:
    """Apply ``A`` to every row of ``X``.

    Accumulates column by column in a fixed order so that one row and a batch
    of rows give bitwise identical results.
    """
    M = A.array
    X = np.asarray(X, dtype=float)
    out = np.zeros((X.shape[0], M.shape[0]))
    for j in range(M.shape[1]):
        out += X[:, j, None] * M[None, :, j]
    return out


def apply_linear(A: LinearOperator, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    m, n = A.shape
    if x.size != n:
        raise ValidationError(f"length mismatch: operator takes {n} components, got {x.size}")
    return apply_rows(A, x[None, :])[0]


@dataclass(frozen=True)
class MultiMap:
    """Finitely many vector-valued selections; ``B(x)`` is their value set."""

    selections: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        if not self.selections:
            raise ValidationError("empty selection list")
        dims = {len(s) for s in self.selections}
        if len(dims) != 1 or 0 in dims:
            raise ValidationError("selections must all have the same nonzero length")

    @classmethod
    def from_strings(cls, selections: Iterable[Sequence[str] | str]) -> "MultiMap":
        parsed = []
        for sel in selections:
            if isinstance(sel, str):
                sel = [sel]
            parsed.append(tuple(parse(s) if isinstance(s, str) else s for s in sel))
        return cls(tuple(parsed))

    @classmethod
    def zero(cls, dim: int) -> "MultiMap":
        return cls(((Literal(0.0),) * dim,))

    @property
    def dim(self) -> int:
        return len(self.selections[0])

    def free_vars(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for sel in self.selections:
            for e in sel:
                out |= free_vars(e)
        return out

    def sources(self) -> list[list[str]]:
        return [[to_source(e) for e in sel] for sel in self.selections]


def make_env(prefix: str, points: np.ndarray, params: np.ndarray | None) -> dict[str, object]:
    """Variable bindings for rows of ``points`` (and matching ``params`` rows)."""
    env: dict[str, object] = {}
    for j in range(points.shape[1]):
        env[f"{prefix}{j + 1}"] = points[:, j]
    if params is not None:
        for j in range(params.shape[1]):
            env[f"p{j + 1}"] = params[:, j]
    return env


def eval_rows(e: Expr, env: Mapping[str, object], nrows: int) -> np.ndarray:
    """Evaluate ``e`` over a batch, broadcasting constant expressions."""
    value = evaluate(e, env)
    return np.broadcast_to(np.asarray(value, dtype=float), (nrows,))


def selection_rows(B: MultiMap, prefix: str, points: np.ndarray, params: np.ndarray | None) -> np.ndarray:
    """Array of shape ``(n_selections, n_rows, dim)`` with every selection evaluated."""
    points = np.asarray(points, dtype=float)
    env = make_env(prefix, points, params)
    out = np.empty((len(B.selections), points.shape[0], B.dim))
    for s, sel in enumerate(B.selections):
        for j, e in enumerate(sel):
            out[s, :, j] = eval_rows(e, env, points.shape[0])
    return out


@dataclass(frozen=True)
class SplitProblem:
    n: int
    m: int
    k: int
    C: ConstraintSet
    Q: ConstraintSet
    f: Expr
    g: Expr
    B1: MultiMap
    B2: MultiMap
    A: LinearOperator
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.k < 0:
            raise ValidationError("dimension mismatch: n, m must be >= 1 and params >= 0")
        if self.C.dim != self.n:
            raise ValidationError(f"dimension mismatch: set C has dim {self.C.dim}, n = {self.n}")
        if self.Q.dim != self.m:
            raise ValidationError(f"dimension mismatch: set Q has dim {self.Q.dim}, m = {self.m}")
        if self.A.shape != (self.m, self.n):
            raise ValidationError(
                f"dimension mismatch: operator is {self.A.shape[0]}x{self.A.shape[1]}, "
                f"expected {self.m}x{self.n}"
            )
        if self.B1.dim != self.n:
            raise ValidationError(f"dimension mismatch: B1 selections have length {self.B1.dim}, n = {self.n}")
        if self.B2.dim != self.m:
            raise ValidationError(f"dimension mismatch: B2 selections have length {self.B2.dim}, m = {self.m}")
        _check_context("f", free_vars(self.f), "x", self.n, self.k)
        _check_context("g", free_vars(self.g), "y", self.m, self.k)
        _check_context("B1", self.B1.free_vars(), "x", self.n, self.k)
        _check_context("B2", self.B2.free_vars(), "y", self.m, self.k)

    @property
    def parametric(self) -> bool:
        return self.k > 0

    def check_param(self, param) -> np.ndarray | None:
        if self.k == 0:
            if param is not None and np.size(param) != 0:
                raise ValidationError("parameter given for a non-parametric problem")
            return None
        if param is None:
            raise ValidationError(f"problem has {self.k} parameter(s); a parameter value is required")
        p = np.asarray(param, dtype=float).reshape(-1)
        if p.size != self.k:
            raise ValidationError(f"dimension mismatch: parameter has {p.size} components, expected {self.k}")
        return p

    def describe(self) -> dict:
        def set_dict(S: ConstraintSet) -> dict:
            if S.kind == "box":
                return {"kind": "box", "lower": list(S.lower), "upper": list(S.upper)}
            return {"kind": "ball", "center": list(S.center), "radius": S.radius}

        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "params": self.k,
            "C": set_dict(self.C),
            "Q": set_dict(self.Q),
            "A": [list(r) for r in self.A.matrix],
            "f": to_source(self.f),
            "g": to_source(self.g),
            "B1": self.B1.sources(),
            "B2": self.B2.sources(),
        }


def _check_context(what: str, names: frozenset[str], space: str, dim: int, k: int) -> None:
    for name in sorted(names):
        prefix, index = VAR_PATTERN.match(name).groups()
        index = int(index)
        if prefix == "p":
            if index > k:
                raise ValidationError(f"variable out of context: {what} uses {name} but params = {k}")
        elif prefix != space:
            raise ValidationError(f"variable out of context: {what} may not reference {name}")
        elif index > dim:
            raise ValidationError(f"variable out of context: {what} uses {name} but dimension is {dim}")


def _set_from_spec(section: Mapping, name: str) -> ConstraintSet:
    kind = section.get("kind", "box")
    if kind == "box":
        return ConstraintSet.box(section["lower"], section["upper"])
    if kind == "ball":
        return ConstraintSet.ball(section["center"], section["radius"])
    raise ValidationError(f"malformed set bounds: unknown kind {kind!r} for {name}")


def build_problem(spec: Mapping[str, Mapping], name: str = "") -> SplitProblem:
    """Build a validated problem from parsed spec-file sections.

    ``spec`` maps section names (``space``, ``set.C``, ``set.Q``,
    ``operator.A``, ``fn.f``, ``fn.g``, ``map.B1``, ``map.B2``) to dicts of
    already-typed values, as produced by :func:`smvi.specfile.typed_sections`.
    """
    space = spec["space"]
    return SplitProblem(
        n=int(space["n"]),
        m=int(space["m"]),
        k=int(space.get("params", 0)),
        C=_set_from_spec(spec["set.C"], "C"),
        Q=_set_from_spec(spec["set.Q"], "Q"),
        f=parse(spec["fn.f"]["expr"]),
        g=parse(spec["fn.g"]["expr"]),
        B1=MultiMap.from_strings(spec["map.B1"]["selections"]),
        B2=MultiMap.from_strings(spec["map.B2"]["selections"]),
        A=LinearOperator.from_rows(spec["operator.A"]["matrix"]),
        name=name,
    )


def selections(B: MultiMap, point, param=None) -> list[np.ndarray]:
    """All selection values of ``B`` at ``point`` (duplicates kept, in order)."""
    point = np.asarray(point, dtype=float).reshape(1, -1)
    if point.shape[1] != B.dim:
        raise ValidationError(f"dimension mismatch: point has {point.shape[1]} components, map has {B.dim}")
    prefix = _prefix_of(B)
    params = None if param is None else np.asarray(param, dtype=float).reshape(1, -1)
    rows = selection_rows(B, prefix, point, params)
    return [rows[s, 0].copy() for s in range(rows.shape[0])]


def _prefix_of(B: MultiMap) -> str:
    names = {n[0] for n in B.free_vars() if n[0] != "p"}
    if len(names) > 1:
        raise ValidationError("multimap mixes x- and y-variables")
    return names.pop() if names else "x"


# --------------------------------------------------------------------------
# special cases


def _zero_fn() -> Expr:
    return Literal(0.0)


def _single(F: Sequence[Expr | str], negate: bool) -> MultiMap:
    exprs = tuple(parse(e) if isinstance(e, str) else e for e in F)
    if negate:
        exprs = tuple(Neg(e) for e in exprs)
    return MultiMap((exprs,))


def _dims(C: ConstraintSet, Q: ConstraintSet, A: LinearOperator) -> tuple[int, int]:
    if A.shape != (Q.dim, C.dim):
        raise ValidationError(
            f"dimension mismatch: operator is {A.shape[0]}x{A.shape[1]}, sets have dims {C.dim}, {Q.dim}"
        )
    return C.dim, Q.dim


def _fn(e: Expr | str) -> Expr:
    return parse(e) if isinstance(e, str) else e


def reduce_sfp(C: ConstraintSet, Q: ConstraintSet, A: LinearOperator) -> SplitProblem:
    """Split feasibility: find x in C with Ax in Q."""
    n, m = _dims(C, Q, A)
    return SplitProblem(n, m, 0, C, Q, _zero_fn(), _zero_fn(), MultiMap.zero(n), MultiMap.zero(m), A, name="sfp")


def reduce_svip(C, Q, A, F1, F2) -> SplitProblem:
    """Split variational inequality with single-valued operators F1, F2.

    The selections are stored negated: ``<-F1(x*), x* - x> <= 0`` is the
    same condition as ``<F1(x*), x - x*> >= 0``.
    """
    n, m = _dims(C, Q, A)
    return SplitProblem(n, m, 0, C, Q, _zero_fn(), _zero_fn(), _single(F1, True), _single(F2, True), A, name="svip")


def reduce_smvip(C, Q, A, F1, F2, f, g) -> SplitProblem:
    """Split mixed variational inequality (single-valued F1, F2 plus f, g)."""
    n, m = _dims(C, Q, A)
    return SplitProblem(n, m, 0, C, Q, _fn(f), _fn(g), _single(F1, True), _single(F2, True), A, name="smvip")


def reduce_smp(C, Q, A, f, g) -> SplitProblem:
    """Split minimization: minimize f over C and g over Q with y = Ax."""
    n, m = _dims(C, Q, A)
    return SplitProblem(n, m, 0, C, Q, _fn(f), _fn(g), MultiMap.zero(n), MultiMap.zero(m), A, name="smp")
