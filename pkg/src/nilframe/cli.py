"""Command-line entry point.

Exit codes: 0 success, 2 a check failed (residual above tolerance or the
integration gate refused), 1 usage or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import check_algebra, check_grid, check_tolerance
from .algebra import AlgebraError, validate
from .forms import Chart, FormError
from .forward import ForwardError, catalog_immersion, extract_data
from .frames import identity_suite
from .immersion import (GATE_FACTOR, TOL_ANALYTIC, TOL_SAMPLED, ImmersionDataError, check_compatibility,
                        dump_data, load_data)
from .invariant import curvature_on_pair, export_curvature, verify_structural
from .reconstruction import (AdmissibilityError, GateRefused, NotCongruentError, align, immersion_payload,
                             integrate_immersion, solve_gauge, write_json)

log = logging.getLogger("nilframe")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(payload: dict, args) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True)
    if getattr(args, "out", None):
        write_json(payload, args.out)
    print(text)


def _algebra(args):
    params = [args.m] if getattr(args, "m", None) is not None else None
    return check_algebra(args.algebra, params)


def _chart_for(surface: str, grid):
    if grid is None:
        return None
    imm = catalog_immersion(surface)
    shape = check_grid(grid, imm.m)
    return Chart(imm.chart.bounds, shape)


def _load_immersion_data(args):
    if args.data:
        data = load_data(args.data)
    elif args.surface:
        data = extract_data(catalog_immersion(args.surface, chart=_chart_for(args.surface, args.grid)))
    else:
        raise UsageError("give --data <data.json> or --surface builtin:<name>")
    if getattr(args, "algebra", None):
        alg = _algebra(args)
        if not np.array_equal(alg.structure, data.alg.structure):
            raise UsageError(f"--algebra {args.algebra} does not match the algebra of the data")
    return data


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    tmp.replace(path)


# --- commands ----------------------------------------------------------------

def cmd_algebra_validate(args) -> int:
    if not args.file or len(args.file) != 1:
        raise UsageError("algebra validate needs one --file")
    path = args.file[0]
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc
    report = validate(payload)
    out = report.as_dict()
    out["message"] = "valid two-step algebra" if report.valid else "invalid algebra"
    _emit(out, args)
    return EXIT_OK if report.valid else EXIT_FAIL


def cmd_algebra_builtin(args) -> int:
    alg = _algebra(args)
    out = alg.to_dict(full=True)
    out["name"] = alg.name
    _emit(out, args)
    return EXIT_OK


def cmd_curvature(args) -> int:
    alg = _algebra(args)
    payload = export_curvature(alg)
    payload["structural_residuals"] = verify_structural(alg)
    if alg.dim >= 2:
        payload["sectional_E1_E2"] = float(curvature_on_pair(np.asarray(payload["big_theta"]), 0, 1)[0, 1])
    _emit(payload, args)
    return EXIT_OK


def cmd_verify_identities(args) -> int:
    alg = _algebra(args)
    grid = check_grid(args.grid or "32x32", 2)
    rep = identity_suite(alg, frames=args.frames, grid=grid, seed=args.seed,
                         tol_analytic=args.tol_analytic, tol_sampled=args.tol_sampled)
    _emit(rep, args)
    return EXIT_OK if rep["pass"] else EXIT_FAIL


def cmd_extract(args) -> int:
    if not args.surface:
        raise UsageError("immersion extract needs --surface builtin:<name>")
    data = extract_data(catalog_immersion(args.surface, chart=_chart_for(args.surface, args.grid)))
    payload = dump_data(data)
    if args.out:
        write_json(payload, args.out)
    print(json.dumps({"surface": args.surface, "chart": data.chart.as_dict(), "m_prime": data.m_prime,
                      "references": data.meta.get("references"), "out": args.out}, sort_keys=True))
    return EXIT_OK


def cmd_check(args) -> int:
    data = _load_immersion_data(args)
    rep = check_compatibility(data, args.tol_analytic, args.tol_sampled, args.gate_factor)
    out = rep.as_dict()
    out["name"] = data.name
    _emit(out, args)
    if args.csv:
        f = rep.fields
        cols = [k for k in ("gauss_codazzi_ricci", "killing") if k in f]
        header = [f"x{i + 1}" for i in range(data.m)] + cols
        rows = [list(p) + [f[c][i] for c in cols] for i, p in enumerate(f["points"])]
        _write_csv(args.csv, header, rows)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _reconstruct(data, args):
    sol = solve_gauge(data, tol_analytic=args.tol_analytic, tol_sampled=args.tol_sampled,
                      gate_factor=args.gate_factor)
    f = integrate_immersion(sol, data, np.zeros(data.dim))
    return sol, f


def cmd_reconstruct(args) -> int:
    data = _load_immersion_data(args)
    try:
        sol, f = _reconstruct(data, args)
    except GateRefused as exc:
        out = exc.report.as_dict()
        out["refused"] = str(exc)
        _emit(out, args)
        return EXIT_FAIL
    payload = immersion_payload(sol, f)
    if args.out:
        write_json(payload, args.out)
    print(json.dumps({"diagnostics": sol.diagnostics, "grid": sol.chart.as_dict(), "out": args.out},
                     indent=1, sort_keys=True))
    if args.csv:
        pts = sol.chart.points()
        flat = f.reshape(-1, data.dim)
        header = [f"x{i + 1}" for i in range(data.m)] + [f"xi{k + 1}" for k in range(data.dim)]
        _write_csv(args.csv, header, [list(p) + list(q) for p, q in zip(pts, flat)])
    return EXIT_OK


def _read_immersion(path):
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return (np.asarray(payload["points"], dtype=float), np.asarray(payload["A"], dtype=float),
                tuple(payload["solution"]["x0_index"]), payload["algebra"], payload["grid"])
    except (KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: not an immersion.json file ({exc})") from exc


def cmd_compare(args) -> int:
    files = args.file or []
    if len(files) != 2:
        raise UsageError("immersion compare needs exactly two --file immersion.json arguments")
    f1, A1, x0, alg1, grid1 = _read_immersion(files[0])
    f2, A2, _, alg2, grid2 = _read_immersion(files[1])
    if alg1 != alg2 or grid1 != grid2:
        raise UsageError("immersions live on different grids or algebras")
    from .algebra import Algebra

    alg = Algebra.from_entries(alg1["n"], alg1["n_prime"], alg1["sigma"])
    try:
        res = align(alg, f1, f2, x0, A1, A2)
    except NotCongruentError as exc:
        _emit({"error": str(exc)}, args)
        return EXIT_FAIL
    _emit(res, args)
    return EXIT_OK if res["deviation"] <= args.tol_align else EXIT_FAIL


def cmd_roundtrip(args) -> int:
    if not args.surface:
        raise UsageError("immersion roundtrip needs --surface builtin:<name>")
    imm = catalog_immersion(args.surface, chart=_chart_for(args.surface, args.grid))
    data = extract_data(imm)
    if args.algebra:
        alg = _algebra(args)
        if not np.array_equal(alg.structure, data.alg.structure):
            raise UsageError(f"--algebra {args.algebra} does not match surface {args.surface}")
    try:
        sol, f = _reconstruct(data, args)
    except GateRefused as exc:
        out = exc.report.as_dict()
        out["refused"] = str(exc)
        _emit(out, args)
        return EXIT_FAIL
    pts = data.chart.points()
    truth = imm.F(pts).reshape(data.chart.shape + (data.dim,))
    frames = data.B(pts)[:, 0].real.reshape(data.chart.shape + (data.dim, data.dim))
    res = align(data.alg, truth, f, sol.x0, frames, sol.A)
    res["diagnostics"] = sol.diagnostics
    res["tolerance"] = args.tol_align
    res["pass"] = bool(res["deviation"] <= args.tol_align)
    _emit(res, args)
    return EXIT_OK if res["pass"] else EXIT_FAIL


# --- parser ------------------------------------------------------------------

def _common(p, algebra_default=None):
    p.add_argument("--algebra", default=algebra_default,
                   help="algebra reference: builtin:<name> or path to JSON (default: %(default)s)")
    p.add_argument("--m", type=int, default=None, help="parameter of a builtin algebra (e.g. heisenberg m)")
    p.add_argument("--file", action="append", help="input file (repeat for compare)")
    p.add_argument("--data", help="data.json with immersion data")
    p.add_argument("--surface", help="catalog immersion, builtin:<name>")
    p.add_argument("--grid", help="grid nodes RxC (default: chart default, 64x64)")
    p.add_argument("--tol-analytic", type=float, default=TOL_ANALYTIC, help="analytic tolerance (default: %(default)g)")
    p.add_argument("--tol-sampled", type=float, default=TOL_SAMPLED, help="sampled tolerance (default: %(default)g)")
    p.add_argument("--gate-factor", type=float, default=GATE_FACTOR,
                   help="flatness gate factor c in c*h^3 (default: %(default)g)")
    p.add_argument("--tol-align", type=float, default=1e-6, help="alignment tolerance (default: %(default)g)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    p.add_argument("--frames", type=int, default=10, help="random frames for verify-identities (default: %(default)s)")
    p.add_argument("--out", help="write the JSON report here (atomic)")
    p.add_argument("--csv", help="write grid-sampled scalar fields here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nilframe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    alg = sub.add_parser("algebra", help="validate or print algebras")
    alg_sub = alg.add_subparsers(dest="action", required=True)
    p = alg_sub.add_parser("validate", help="validate an algebra JSON file")
    _common(p)
    p.set_defaults(func=cmd_algebra_validate)
    p = alg_sub.add_parser("builtin", help="print a catalog algebra")
    _common(p, "builtin:heisenberg")
    p.set_defaults(func=cmd_algebra_builtin)

    p = sub.add_parser("curvature", help="connection and curvature tables")
    _common(p, "builtin:heisenberg")
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("verify-identities", help="frame identities over random frames")
    _common(p, "builtin:heisenberg")
    p.set_defaults(func=cmd_verify_identities)

    imm = sub.add_parser("immersion", help="immersion data workflows")
    imm_sub = imm.add_subparsers(dest="action", required=True)
    for name, func, help_ in (
        ("extract", cmd_extract, "extract data.json from a catalog immersion"),
        ("check", cmd_check, "compatibility residuals"),
        ("reconstruct", cmd_reconstruct, "solve the gauge equation and integrate"),
        ("compare", cmd_compare, "align two immersion.json files"),
        ("roundtrip", cmd_roundtrip, "extract, reconstruct and align against the original"),
    ):
        p = imm_sub.add_parser(name, help=help_)
        _common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        for name in ("tol_analytic", "tol_sampled", "gate_factor", "tol_align"):
            check_tolerance(getattr(args, name), name)
        return args.func(args)
    except (UsageError, AlgebraError, ImmersionDataError, ForwardError, FormError, AdmissibilityError,
            ValueError, OSError) as exc:
        print(f"nilframe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
