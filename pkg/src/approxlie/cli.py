"""Command line front end: ``approxlie {dim,structure,scan,iso}``.

Exit codes: 0 success, 1 invalid input, 2 unstable point or no map found,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .detsys import ODESpec, generate_determining_system
from .expr import ExpressionError
from .giforms import BORDERLINE, UNSTABLE, NumericalFailure, ToleranceConfig, involutive_completion
from .isoclass import ISOMORPHIC, IsoConfig, test_isomorphism
from .jet import assemble_matrix
from .liestruct import ExtensionError, StructureTensor, structure_constants
from .scan import AxisRange, GridSpec, export, partition_regions, scan_grid

__all__ = ["main", "run", "tensor_to_json", "tensor_from_json", "TensorFormatError"]

EXIT_OK, EXIT_INPUT, EXIT_RESULT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(ValueError):
    pass


class TensorFormatError(InputError):
    pass


def tensor_to_json(tensor: StructureTensor | None, report=None, *, x0=None, u0=None, tol=None,
                   qprime=None) -> dict:
    """Tensor document: dim, c, meta and reliability (zeros for a 0-dim algebra)."""
    c = np.zeros((0, 0, 0)) if tensor is None else tensor.c
    if tensor is not None:
        x0 = tensor.z0[0] if x0 is None and tensor.z0 else x0
        u0 = tensor.z0[1] if u0 is None and tensor.z0 else u0
        tol = tensor.tol if tol is None else tol
        qprime = tensor.qprime if qprime is None else qprime

    def num(v):
        # JSON has no nan/inf; degenerate pairs are excluded from the maxima anyway
        return float(v) if v is not None and math.isfinite(v) else None

    return {
        "dim": int(c.shape[0]),
        "c": c.tolist(),
        "meta": {"x0": num(x0), "u0": num(u0), "tol": num(tol),
                 "qprime": None if qprime is None else int(qprime)},
        "reliability": {
            "sigma_lie_max": 0.0 if report is None else report.sigma_lie_max,
            "sigma_jacobi_max": 0.0 if report is None else report.sigma_jacobi_max,
            "theta_max": 0.0 if report is None else report.theta_max,
        },
    }


def tensor_from_json(doc: dict) -> StructureTensor:
    try:
        n = doc["dim"]
        raw = doc["c"]
    except (KeyError, TypeError):
        raise TensorFormatError("tensor document needs 'dim' and 'c'") from None
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise TensorFormatError("'dim' must be a non-negative integer")
    try:
        c = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise TensorFormatError("'c' must be a nested list of numbers") from None
    if n == 0:
        c = np.zeros((0, 0, 0))
    if c.shape != (n, n, n):
        raise TensorFormatError(f"'c' has shape {c.shape}, expected {(n, n, n)}")
    if not np.all(np.isfinite(c)):
        raise TensorFormatError("'c' has non-finite entries")
    meta = doc.get("meta") or {}
    x0, u0 = meta.get("x0"), meta.get("u0")
    z0 = (x0, u0) if x0 is not None and u0 is not None else None
    return StructureTensor(c, z0=z0, qprime=meta.get("qprime"), tol=meta.get("tol"))


def _dump(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=1, sort_keys=False) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _tolerance(args) -> ToleranceConfig:
    if not 0 < args.tol < 1:
        raise InputError("--tol must lie in (0, 1)")
    return ToleranceConfig(args.tol, args.kmax)


def _iso_config(args) -> IsoConfig:
    if args.starts < 0:
        raise InputError("--starts must be non-negative")
    if not args.iso_tol > 0 or not args.delta > 0:
        raise InputError("--iso-tol and --delta must be positive")
    return IsoConfig(tol_iso=args.iso_tol, delta=args.delta, starts=args.starts, seed=args.seed)


def _point_form(args):
    ode = ODESpec.from_text(args.ode)
    x0, u0 = args.point
    if not (math.isfinite(x0) and math.isfinite(u0)):
        raise InputError("--point coordinates must be finite")
    cfg = _tolerance(args)
    ode.check_point(x0, u0)
    M0 = assemble_matrix(generate_determining_system(ode))
    return involutive_completion(M0, (x0, u0), cfg)


def cmd_dim(args) -> int:
    form = _point_form(args)
    if form.status == UNSTABLE:
        print(f"status {form.status} (no involutive form up to kmax={args.kmax})")
    else:
        print(f"dimension {form.dim}")
        print(f"status {form.status}")
        print(f"qprime {form.qprime}")
    if args.out:
        _dump({
            "x0": form.z0[0], "u0": form.z0[1], "tol": form.tol, "status": form.status,
            "dim": form.dim, "qprime": form.qprime, "kprime": form.kprime, "ell": form.ell,
            "min_margin": None if form.status == UNSTABLE else form.min_margin,
            "table": form.table,
        }, args.out)
    return EXIT_RESULT if form.status == UNSTABLE else EXIT_OK


def cmd_structure(args) -> int:
    form = _point_form(args)
    if form.status == UNSTABLE:
        print(f"point ({args.point[0]}, {args.point[1]}) is unstable up to kmax={args.kmax}",
              file=sys.stderr)
        return EXIT_RESULT
    if form.status == BORDERLINE:
        print(f"warning: borderline rank decision (margin {form.min_margin:.3e})", file=sys.stderr)
    if form.dim == 0:
        doc = tensor_to_json(None, None, x0=form.z0[0], u0=form.z0[1], tol=form.tol,
                             qprime=form.qprime)
    else:
        tensor, report = structure_constants(form)
        doc = tensor_to_json(tensor, report)
    _dump(doc, args.out)
    return EXIT_OK


def cmd_scan(args) -> int:
    ode = ODESpec.from_text(args.ode)
    try:
        grid = GridSpec(AxisRange.parse(args.xrange), AxisRange.parse(args.urange), args.tol,
                        args.kmax)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _tolerance(args)
    iso = _iso_config(args)
    results = scan_grid(ode, grid, workers=args.workers)
    regions = partition_regions(results, grid.shape, iso)
    export(results, args.format, args.out, grid=grid, regions=regions)
    counts: dict[str, int] = {}
    for r in results:
        counts[r.status] = counts.get(r.status, 0) + 1
    summary = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    print(f"{len(results)} cells ({summary}); {len(regions.regions)} regions -> {args.out}")
    return EXIT_OK


def _load_tensor(path: str) -> StructureTensor:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    try:
        return tensor_from_json(doc)
    except TensorFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_iso(args) -> int:
    a, b = _load_tensor(args.a), _load_tensor(args.b)
    verdict = test_isomorphism(a, b, _iso_config(args))
    _dump(verdict.to_json(), args.out)
    if args.out:
        print(verdict.outcome)
    return EXIT_OK if verdict.outcome == ISOMORPHIC else EXIT_RESULT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="approxlie",
                                 description="Approximate Lie point symmetries of scalar ODEs.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, point: bool):
        p.add_argument("--ode", required=True, help='e.g. "diff(u,x,2) + u*diff(u,x)"')
        if point:
            p.add_argument("--point", nargs=2, type=float, required=True, metavar=("X", "U"))
        p.add_argument("--tol", type=float, default=1e-3, help="singular value cutoff")
        p.add_argument("--kmax", type=int, default=8, help="maximum number of prolongations")
        p.add_argument("--out", help="output file (JSON); standard output if omitted")

    def iso_flags(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--starts", type=int, default=50)
        p.add_argument("--iso-tol", type=float, default=1e-8)
        p.add_argument("--delta", type=float, default=1e-3, help="minimum singular value of a map")

    p = sub.add_parser("dim", help="dimension of the symmetry algebra at a point")
    common(p, True)
    p.set_defaults(func=cmd_dim)

    p = sub.add_parser("structure", help="structure constants and reliability at a point")
    common(p, True)
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("scan", help="grid sweep with region partitioning")
    common(p, False)
    p.add_argument("--xrange", required=True, metavar="MIN:MAX:STEP")
    p.add_argument("--urange", required=True, metavar="MIN:MAX:STEP")
    p.add_argument("--format", choices=("csv", "json", "heatmap"), default="csv")
    p.add_argument("--workers", type=int, default=1, help="process pool size")
    iso_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("iso", help="isomorphism test between two tensor JSON files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out")
    iso_flags(p)
    p.set_defaults(func=cmd_iso)
    return ap


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; usage errors are invalid input here
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if args.command == "scan" and not args.out:
        print("error: scan needs --out", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, ExpressionError) as exc:
        # ExpressionError covers parse errors, ODEError and point evaluation errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalFailure, ExtensionError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())
