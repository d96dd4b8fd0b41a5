"""Command-line interface.

Usage::

    smvi validate problem.smvi
    smvi member problem.smvi --z 0 --w 0 --eps 0.01 [--p 0.5 --delta 0]
    smvi scan problem.smvi --eps 0.05 --res 0.01 --out cloud.csv
    smvi sweep problem.smvi --schedule 0.2,0.1,0.05,0.02 --report report.json
    smvi init --template example1 --out example1.smvi

Exit codes: 0 success or member, 1 non-member, 2 usage or validation
error, 3 internal error. ``SMVI_THREADS`` caps the number of sweep rows
scanned concurrently.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .diagnose import Thresholds, build_report, dumps_report, sweep, verdict
from .exprlang import ExprError
from .model import SplitProblem, ValidationError
from .residual import GridSpec, is_member
from .scan import DEFAULT_STEP, ScanRegion, default_region, scan_eps_set
from .specfile import TEMPLATES, SpecError, load_problem, template

EXIT_OK = 0
EXIT_NONMEMBER = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


def _vector(text: str | None, what: str) -> list[float] | None:
    if text is None:
        return None
    if ";" in text:
        raise UsageError(f"{what}: use a comma-separated list without ';'")
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"{what}: cannot parse {text!r} as a list of numbers") from None


def _workers() -> int:
    raw = os.environ.get("SMVI_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"SMVI_THREADS must be an integer, got {raw!r}") from None


def _load(path: str) -> SplitProblem:
    try:
        return load_problem(path)
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror or err}") from None


def _grid(args) -> GridSpec:
    return GridSpec(args.c_level, args.q_level, args.param_count)


def _region(args, P: SplitProblem, eps: float) -> ScanRegion:
    lower, upper = _vector(args.lower, "--lower"), _vector(args.upper, "--upper")
    if lower is None and upper is None:
        return default_region(P, eps, args.res)
    if lower is None or upper is None:
        raise UsageError("--lower and --upper must be given together")
    return ScanRegion(tuple(lower), tuple(upper), args.res)


def cmd_validate(args) -> int:
    P = _load(args.path)
    print(f"{args.path}: ok (n={P.n}, m={P.m}, params={P.k}, "
          f"|B1|={len(P.B1.selections)}, |B2|={len(P.B2.selections)})")
    return EXIT_OK


def cmd_member(args) -> int:
    P = _load(args.path)
    z, w = _vector(args.z, "--z"), _vector(args.w, "--w")
    p = _vector(args.p, "--p")
    ok, prof = is_member(P, z, w, args.eps, param=p, delta=args.delta, grid=_grid(args))
    print(f"feas_C  = {prof.feas_C!r}")
    print(f"feas_Q  = {prof.feas_Q!r}")
    print(f"link    = {prof.link!r}")
    print(f"defect1 = {prof.defect1!r}")
    print(f"defect2 = {prof.defect2!r}")
    print(f"u = {list(prof.u)!r} (selection {prof.u_index + 1})")
    print(f"v = {list(prof.v)!r} (selection {prof.v_index + 1})")
    if prof.param is not None:
        print(f"q = {list(prof.param)!r}")
    print("member" if ok else "non-member")
    return EXIT_OK if ok else EXIT_NONMEMBER


def cmd_scan(args) -> int:
    P = _load(args.path)
    p = _vector(args.p, "--p")
    region = _region(args, P, args.eps)
    cloud = scan_eps_set(P, args.eps, region, _grid(args), param=p, delta=args.delta,
                         allow_large=args.allow_large)
    bounds = ";".join(f"{lo!r},{hi!r}" for lo, hi in zip(region.lower, region.upper))
    delta = cloud.tag["delta"]
    comment = f"eps={args.eps!r}, delta={delta!r}, res={region.step!r}, region={bounds}"
    Path(args.out).write_text(cloud.to_csv(comment), encoding="utf-8")
    if len(cloud) == 0:
        print(f"warning: no grid points passed at eps={args.eps!r}; wrote header only", file=sys.stderr)
    else:
        print(f"{len(cloud)} points written to {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    P = _load(args.path)
    schedule = _vector(args.schedule, "--schedule")
    deltas = _vector(args.delta_schedule, "--delta-schedule")
    p = _vector(args.p, "--p")
    if p is None and P.k > 0:
        raise UsageError("parametric problem: --p is required")
    if deltas is not None and p is None:
        raise UsageError("--delta-schedule needs --p")
    region = _region(args, P, max(schedule)) if (args.lower or args.upper) else None
    trend = sweep(P, schedule, region=region, grid=_grid(args), k=args.k, step=args.res,
                  gap=args.gap, param=p, deltas=deltas, workers=_workers())
    th = Thresholds(args.diam_final, args.mu_final, args.min_rows)
    v = verdict(trend, th)
    text = dumps_report(build_report(P, trend, v))
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"verdict: {v.tag} ({v.reason})", file=sys.stderr if not args.report else sys.stdout)
    return EXIT_OK


def cmd_init(args) -> int:
    if args.template not in TEMPLATES:
        raise UsageError(f"unknown template {args.template!r}; choose from {', '.join(TEMPLATES)}")
    text = template(args.template)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_grid(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--c-level", type=int, default=None, help="dyadic level of the grid over C")
    sp.add_argument("--q-level", type=int, default=None, help="dyadic level of the grid over Q")
    sp.add_argument("--param-count", type=int, default=33, help="samples per axis of a parameter ball (odd)")


def _add_region(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--res", type=float, default=DEFAULT_STEP, help="scan lattice step")
    sp.add_argument("--lower", default=None, help="scan region lower corner, z then w coordinates")
    sp.add_argument("--upper", default=None, help="scan region upper corner")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smvi", description="Approximate solution sets of split multivalued VIs.")
    ap.add_argument("--version", action="version", version=f"smvi {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="check a problem file")
    sp.add_argument("path")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("member", help="residual profile and membership of one pair")
    sp.add_argument("path")
    sp.add_argument("--z", required=True)
    sp.add_argument("--w", required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--p", default=None)
    sp.add_argument("--delta", type=float, default=None)
    _add_grid(sp)
    sp.set_defaults(func=cmd_member)

    sp = sub.add_parser("scan", help="write the lattice points of S(eps) as CSV")
    sp.add_argument("path")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--p", default=None)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--allow-large", action="store_true", help="permit n + m above the scan limit")
    _add_region(sp)
    _add_grid(sp)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("sweep", help="eps sweep with trend statistics and a verdict")
    sp.add_argument("path")
    sp.add_argument("--schedule", default="0.2,0.1,0.05,0.02")
    sp.add_argument("--report", default=None, help="JSON output path (stdout if omitted)")
    sp.add_argument("--p", default=None)
    sp.add_argument("--delta-schedule", default=None, help="paired with --schedule; defaults to delta = eps")
    sp.add_argument("--k", type=int, default=4, help="cell budget of the mu_hat estimate")
    sp.add_argument("--gap", type=float, default=None, help="single-linkage cluster gap")
    sp.add_argument("--diam-final", type=float, default=None)
    sp.add_argument("--mu-final", type=float, default=None)
    sp.add_argument("--min-rows", type=int, default=3)
    _add_region(sp)
    _add_grid(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("init", help="write a bundled problem file")
    sp.add_argument("--template", required=True, help=", ".join(TEMPLATES))
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_init)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as err:
        print(f"{getattr(args, 'path', '')}: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ValidationError, ExprError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as err:  # noqa: BLE001
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
