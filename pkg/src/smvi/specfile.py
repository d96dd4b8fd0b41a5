"""Reader and writer for ``.smvi`` problem files.

A flat INI-style format::

    [space]
    n = 1
    m = 1
    params = 0

    [set.C]            # or [set.Q]
    kind = box         # box: lower, upper; ball: center, radius
    lower = 0
    upper = 1

    [operator.A]
    matrix = 1         # entries separated by ',', rows by ';'

    [fn.f]             # and [fn.g]
    expr = x1^4

    [map.B1]           # and [map.B2]; one key per selection
    sel1 = x1
    sel2 = 0

``#`` starts a comment. All eight sections are required and unknown
sections or keys are rejected. Expressions are opaque to this reader and
parsed by :mod:`smvi.exprlang`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .exprlang import ExprSyntaxError, parse, to_source
from .model import (
    ConstraintSet,
    LinearOperator,
    SplitProblem,
    ValidationError,
    build_problem,
    reduce_sfp,
    reduce_smp,
    reduce_smvip,
    reduce_svip,
)

__all__ = ["SpecError", "SpecFile", "read_spec", "typed_sections", "load_problem", "loads_problem", "dumps_problem", "TEMPLATES", "template"]

SECTIONS = ("space", "set.C", "set.Q", "operator.A", "fn.f", "fn.g", "map.B1", "map.B2")
_SEL_KEY = re.compile(r"^sel[1-9][0-9]*$")
_KEYS = {
    "space": {"n", "m", "params"},
    "set.C": {"kind", "lower", "upper", "center", "radius"},
    "set.Q": {"kind", "lower", "upper", "center", "radius"},
    "operator.A": {"matrix"},
    "fn.f": {"expr"},
    "fn.g": {"expr"},
}


class SpecError(ValueError):
    """Problem file error with a 1-based line and column (0 when unknown)."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(f"{where}{message}")


@dataclass
class _Entry:
    value: str
    line: int
    col: int


@dataclass
class SpecFile:
    """Raw sections: ``{section: {key: entry}}`` plus section header lines."""

    sections: dict[str, dict[str, _Entry]]
    header_lines: dict[str, int]


def read_spec(text: str) -> SpecFile:
    sections: dict[str, dict[str, _Entry]] = {}
    headers: dict[str, int] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise SpecError("unterminated section header", lineno, raw.index("[") + 1)
            name = stripped[1:-1].strip()
            if name not in SECTIONS:
                raise SpecError(f"unknown section [{name}]", lineno, raw.index("[") + 1)
            if name in sections:
                raise SpecError(f"duplicate section [{name}]", lineno, raw.index("[") + 1)
            sections[name] = {}
            headers[name] = lineno
            current = name
            continue
        if "=" not in line:
            raise SpecError("expected 'key = value'", lineno, len(raw) - len(raw.lstrip()) + 1)
        if current is None:
            raise SpecError("key outside of any section", lineno, 1)
        key, value = line.split("=", 1)
        key = key.strip()
        allowed = _KEYS.get(current)
        if (allowed is not None and key not in allowed) or (allowed is None and not _SEL_KEY.match(key)):
            raise SpecError(f"unknown key {key!r} in [{current}]", lineno, raw.index(key) + 1)
        if key in sections[current]:
            raise SpecError(f"duplicate key {key!r} in [{current}]", lineno, raw.index(key) + 1)
        col = line.index("=") + 2 + (len(value) - len(value.lstrip()))
        sections[current][key] = _Entry(value.strip(), lineno, col)
    for name in SECTIONS:
        if name not in sections:
            raise SpecError(f"missing section [{name}]")
    return SpecFile(sections, headers)


def _floats(e: _Entry, what: str) -> list[float]:
    try:
        return [float(v) for v in e.value.split(",")]
    except ValueError:
        raise SpecError(f"{what} must be a comma-separated list of numbers", e.line, e.col) from None


def _int(e: _Entry, what: str) -> int:
    try:
        return int(e.value)
    except ValueError:
        raise SpecError(f"{what} must be an integer", e.line, e.col) from None


def _require(spec: SpecFile, section: str, key: str) -> _Entry:
    try:
        return spec.sections[section][key]
    except KeyError:
        raise SpecError(f"[{section}] is missing key {key!r}", spec.header_lines[section], 1) from None


def _expr(e: _Entry) -> str:
    try:
        parse(e.value)
    except ExprSyntaxError as err:
        raise SpecError(err.message, e.line, e.col + err.pos) from None
    return e.value


def typed_sections(spec: SpecFile) -> dict:
    """Convert raw entries to the typed dict consumed by :func:`build_problem`."""
    s = spec.sections
    out: dict = {}
    space = {"n": _int(_require(spec, "space", "n"), "n"), "m": _int(_require(spec, "space", "m"), "m")}
    space["params"] = _int(s["space"]["params"], "params") if "params" in s["space"] else 0
    out["space"] = space
    for name in ("set.C", "set.Q"):
        sec = s[name]
        kind = sec["kind"].value if "kind" in sec else "box"
        if kind == "box":
            extra = {"center", "radius"} & sec.keys()
            keys = ("lower", "upper")
        elif kind == "ball":
            extra = {"lower", "upper"} & sec.keys()
            keys = ("center", "radius")
        else:
            raise SpecError(f"unknown set kind {kind!r}", sec["kind"].line, sec["kind"].col)
        if extra:
            key = sorted(extra)[0]
            raise SpecError(f"key {key!r} does not apply to a {kind}", sec[key].line, 1)
        typed = {"kind": kind}
        for key in keys:
            entry = _require(spec, name, key)
            vals = _floats(entry, key)
            if key == "radius":
                if len(vals) != 1:
                    raise SpecError("radius must be a single number", entry.line, entry.col)
                vals = vals[0]
            typed[key] = vals
        out[name] = typed
    entry = _require(spec, "operator.A", "matrix")
    rows = []
    for chunk in entry.value.split(";"):
        rows.append(_floats(_Entry(chunk, entry.line, entry.col), "matrix row"))
    if len({len(r) for r in rows}) != 1:
        raise SpecError("matrix rows have different lengths", entry.line, entry.col)
    out["operator.A"] = {"matrix": rows}
    for name in ("fn.f", "fn.g"):
        out[name] = {"expr": _expr(_require(spec, name, "expr"))}
    for name in ("map.B1", "map.B2"):
        sels = sorted(s[name].items(), key=lambda kv: int(kv[0][3:]))
        parsed = []
        for _, e in sels:
            parts = e.value.split(",")
            offset = 0
            comps = []
            for part in parts:
                lead = len(part) - len(part.lstrip())
                comps.append(_expr(_Entry(part.strip(), e.line, e.col + offset + lead)))
                offset += len(part) + 1
            parsed.append(comps)
        out[name] = {"selections": parsed}
    return out


_SECTION_OF = (
    ("B1", "map.B1"),
    ("B2", "map.B2"),
    (" f ", "fn.f"),
    (" g ", "fn.g"),
    ("set C", "set.C"),
    ("set Q", "set.Q"),
    ("operator", "operator.A"),
    ("params", "space"),
)


def _locate(spec: SpecFile, message: str) -> int:
    padded = f" {message} "
    for needle, section in _SECTION_OF:
        if needle in padded:
            return spec.header_lines.get(section, 0)
    return 0


def loads_problem(text: str, name: str = "") -> SplitProblem:
    spec = read_spec(text)
    typed = typed_sections(spec)
    try:
        return build_problem(typed, name=name)
    except ValidationError as err:
        msg = str(err)
        if msg == "empty selection list":
            empty = [n for n in ("map.B1", "map.B2") if not spec.sections[n]]
            line = spec.header_lines[empty[0]] if empty else 0
            raise SpecError(f"empty selection list in [{empty[0]}]" if empty else msg, line, 1) from None
        raise SpecError(msg, _locate(spec, msg), 1 if _locate(spec, msg) else 0) from None


def load_problem(path) -> SplitProblem:
    from pathlib import Path

    path = Path(path)
    return loads_problem(path.read_text(encoding="utf-8"), name=path.stem)


def _fmt(v: float) -> str:
    text = repr(float(v))
    return text[:-2] if text.endswith(".0") else text


def _set_lines(S: ConstraintSet) -> list[str]:
    if S.kind == "box":
        return ["kind = box", "lower = " + ", ".join(map(_fmt, S.lower)), "upper = " + ", ".join(map(_fmt, S.upper))]
    return ["kind = ball", "center = " + ", ".join(map(_fmt, S.center)), f"radius = {_fmt(S.radius)}"]


def dumps_problem(P: SplitProblem, comment: str = "") -> str:
    """Serialize ``P`` so that :func:`loads_problem` rebuilds an equal problem."""
    out = []
    for line in comment.splitlines():
        out.append(f"# {line}".rstrip())
    if out:
        out.append("")
    out += ["[space]", f"n = {P.n}", f"m = {P.m}", f"params = {P.k}", ""]
    out += ["[set.C]", *_set_lines(P.C), "", "[set.Q]", *_set_lines(P.Q), ""]
    matrix = "; ".join(", ".join(map(_fmt, row)) for row in P.A.matrix)
    out += ["[operator.A]", f"matrix = {matrix}", ""]
    out += ["[fn.f]", f"expr = {to_source(P.f)}", "", "[fn.g]", f"expr = {to_source(P.g)}", ""]
    for name, B in (("map.B1", P.B1), ("map.B2", P.B2)):
        out.append(f"[{name}]")
        for i, sel in enumerate(B.sources(), start=1):
            out.append(f"sel{i} = " + ", ".join(sel))
        out.append("")
    return "\n".join(out).rstrip("\n") + "\n"


# --------------------------------------------------------------------------
# templates

_UNIT = ConstraintSet.box([0.0], [1.0])
_SYM = ConstraintSet.box([-1.0], [1.0])
_ID = LinearOperator.identity(1)


def _scalar_example(C, f, g, b1, b2, k=0) -> SplitProblem:
    spec = {
        "space": {"n": 1, "m": 1, "params": k},
        "set.C": {"kind": "box", "lower": list(C.lower), "upper": list(C.upper)},
        "set.Q": {"kind": "box", "lower": list(C.lower), "upper": list(C.upper)},
        "operator.A": {"matrix": [[1.0]]},
        "fn.f": {"expr": f},
        "fn.g": {"expr": g},
        "map.B1": {"selections": [[s] for s in b1]},
        "map.B2": {"selections": [[s] for s in b2]},
    }
    return build_problem(spec)


def _templates() -> dict[str, tuple[str, SplitProblem]]:
    return {
        "example1": (
            "C = Q = [0, 1], A = identity, f = x^4, g = y^2, B1(x) = {x, 0}, B2(y) = {y, 0}.\n"
            "Unique solution (0, 0).",
            _scalar_example(_UNIT, "x1^4", "y1^2", ["x1", "0"], ["y1", "0"]),
        ),
        "example2": (
            "C = Q = [-1, 1], A = identity, f = (x^2 - 1)^2, g = (y^4 - 1)^2, B1(x) = {x, 0}, B2(y) = {y, 0}.\n"
            "Solutions (-1, -1) and (1, 1).",
            _scalar_example(_SYM, "(x1^2 - 1)^2", "(y1^4 - 1)^2", ["x1", "0"], ["y1", "0"]),
        ),
        "example3": (
            "Parametric: C = Q = [0, 1], A = identity, f(x, p) = x^4 - p^4, g(y, p) = y^2 - p^2,\n"
            "B1(x, p) = {x - p, 0}, B2(y, p) = {y - p, 0}. Solution set {(0, 0)} for every p.",
            _scalar_example(_UNIT, "x1^4 - p1^4", "y1^2 - p1^2", ["x1 - p1", "0"], ["y1 - p1", "0"], k=1),
        ),
        "example4": (
            "Parametric: C = Q = [-1, 1], A = identity, f(x, p) = (x^2 - 1)^2 - p^2,\n"
            "g(y, p) = (y^4 - 1)^2 - p^4, B1(x, p) = {x - p, 0}, B2(y, p) = {y - p, 0}.\n"
            "(-1, -1) and (1, 1) solve for every p.",
            _scalar_example(_SYM, "(x1^2 - 1)^2 - p1^2", "(y1^4 - 1)^2 - p1^4", ["x1 - p1", "0"], ["y1 - p1", "0"], k=1),
        ),
        "sfp": (
            "Split feasibility: find x in C with Ax in Q (B1 = B2 = {0}, f = g = 0).",
            reduce_sfp(_UNIT, _UNIT, _ID),
        ),
        "svip": (
            "Split variational inequality with F1(x) = x, F2(y) = y, f = g = 0.\n"
            "Selections store -F1, -F2 so that membership matches <F(x*), x - x*> >= 0.",
            reduce_svip(_UNIT, _UNIT, _ID, ["x1"], ["y1"]),
        ),
        "smvip": (
            "Split mixed variational inequality with F1(x) = x, F2(y) = y, f = x^2, g = y^2.\n"
            "Selections store -F1, -F2.",
            reduce_smvip(_UNIT, _UNIT, _ID, ["x1"], ["y1"], "x1^2", "y1^2"),
        ),
        "smp": (
            "Split minimization: minimize f = x^2 over C and g = y^2 over Q with y = Ax (B1 = B2 = {0}).",
            reduce_smp(_SYM, _SYM, _ID, "x1^2", "y1^2"),
        ),
    }


TEMPLATES = ("sfp", "svip", "smvip", "smp", "example1", "example2", "example3", "example4")


def template(name: str) -> str:
    """Text of a bundled problem file."""
    table = _templates()
    if name not in table:
        raise KeyError(f"unknown template {name!r}; choose from {', '.join(TEMPLATES)}")
    comment, P = table[name]
    return dumps_problem(P, comment)
