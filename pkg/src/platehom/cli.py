"""Command-line front end.

Subcommands: homogenize, tensor, gamma-sweep, validate, recover.  Every run
writes a self-describing JSON document embedding the fully resolved
configuration (including the material definition), so results can be re-run
from the document alone.  Exit codes: 0 success, 1 configuration error,
2 solver or validation error, 3 I/O error.

With --deterministic the run is single-threaded and the wall time is omitted
from the output, making repeated invocations byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import cell as cell_mod
from .cell import SolverConvergenceError, effective_tensor, solve_cell, CellProblem
from .gamma import gamma_limit_study
from .material import MaterialConfigError, load_material, material_from_config, reduce_field
from .oracles import run_validation_suite
from .recovery import (
    RecoveryAnsatz,
    ThicknessProfile,
    TwoScaleScalar,
    VectorDisplacement,
    build_isometry,
    cell_harmonic,
    convergence_study,
    macro_harmonic,
)

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_IO = 3


class _CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _parse_sym2(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise _CliError(f"expected 'a11,a22,a12', got {text!r}", EXIT_CONFIG)
    try:
        a11, a22, a12 = (float(p) for p in parts)
    except ValueError as exc:
        raise _CliError(f"bad bending direction {text!r}: {exc}", EXIT_CONFIG)
    return np.array([a11, a22, np.sqrt(2.0) * a12])


def _parse_floats(text, name):
    try:
        vals = [float(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise _CliError(f"bad {name} list {text!r}: {exc}", EXIT_CONFIG)
    if not vals:
        raise _CliError(f"empty {name} list", EXIT_CONFIG)
    return vals


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}", EXIT_IO)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _CliError(f"invalid JSON in {path}: {exc}", EXIT_CONFIG)


def _load_material(path):
    cfg = _read_json(path)
    try:
        return material_from_config(cfg)
    except MaterialConfigError as exc:
        raise _CliError(f"material config error: {exc}", EXIT_CONFIG)


def _write_document(path, doc):
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    except OSError as exc:
        raise _CliError(f"cannot write {path}: {exc}", EXIT_IO)


def _write_csv(path, rows):
    try:
        with open(path, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(",".join(repr(v) if isinstance(v, float) else str(v)
                                      for v in row) + "\n")
    except OSError as exc:
        raise _CliError(f"cannot write {path}: {exc}", EXIT_IO)


def _document(command, config, outputs, digest, started, deterministic):
    doc = {
        "format_version": FORMAT_VERSION,
        "tool": {"name": "platehom", "version": __version__},
        "command": command,
        "config": config,
        "material_digest": digest,
        "outputs": outputs,
        "deterministic": deterministic,
    }
    if not deterministic:
        doc["wall_time_s"] = time.monotonic() - started
    return doc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _check_modes(modes):
    if modes < 1:
        raise _CliError(f"modes must be a positive integer, got {modes}",
                        EXIT_CONFIG)


def cmd_homogenize(args):
    started = time.monotonic()
    _check_modes(args.modes)
    fld = _load_material(args.material)
    a = _parse_sym2(args.A)
    red = reduce_field(fld)
    try:
        sol = solve_cell(CellProblem(field=red, a=a, modes=args.modes,
                                     tol=args.tol, max_iter=args.max_iter))
    except ValueError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)
    outputs = {
        "value": sol.energy,
        "value_recomputed": sol.energy_quadrature,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "solution_norms": {
            "b": sol.diagnostics["b_norm"],
            "zeta_h1": sol.diagnostics["zeta_h1"],
            "phi_h2": sol.diagnostics["phi_h2"],
        },
        "feasible_upper_bound": sol.diagnostics["feasible_upper_bound"],
    }
    config = {"material": fld.config, "A": list(np.asarray(a)),
              "modes": args.modes, "tol": args.tol}
    _write_document(args.out, _document("homogenize", config, outputs,
                                        fld.digest, started, args.deterministic))
    return EXIT_OK


def cmd_tensor(args):
    started = time.monotonic()
    _check_modes(args.modes)
    fld = _load_material(args.material)
    red = reduce_field(fld)
    threads = 1 if args.deterministic else args.threads
    try:
        tensor = effective_tensor(red, modes=args.modes, tol=args.tol,
                                  threads=threads)
    except ValueError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)
    outputs = {
        "matrix": tensor.matrix.tolist(),
        "eigenvalues": tensor.eigenvalues().tolist(),
        "meta": tensor.meta,
    }
    config = {"material": fld.config, "modes": args.modes, "tol": args.tol}
    _write_document(args.out, _document("tensor", config, outputs, fld.digest,
                                        started, args.deterministic))
    return EXIT_OK


def cmd_gamma_sweep(args):
    started = time.monotonic()
    _check_modes(args.modes)
    fld = _load_material(args.material)
    a = _parse_sym2(args.A)
    gammas = _parse_floats(args.gammas, "gamma")
    threads = 1 if args.deterministic else args.threads
    try:
        report = gamma_limit_study(fld, a, gammas, modes=args.modes,
                                   x3_elems=args.x3_elems, tol=args.tol,
                                   threads=threads)
    except ValueError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)
    outputs = {
        "reference": report.reference,
        "rows": report.rows(),
        "non_shrinking_gaps": report.non_shrinking,
    }
    config = {"material": fld.config, "A": list(np.asarray(a)),
              "gammas": gammas, "modes": args.modes, "tol": args.tol,
              "x3_elems": args.x3_elems}
    _write_document(args.out, _document("gamma-sweep", config, outputs,
                                        fld.digest, started, args.deterministic))
    if args.csv:
        rows = [["gamma", "value", "gap", "x3_elems"]]
        rows += [[r["gamma"], r["value"], r["gap"], r["x3_elems"]]
                 for r in report.rows()]
        _write_csv(args.csv, rows)
    return EXIT_OK


def cmd_validate(args):
    started = time.monotonic()
    fault = os.environ.get("PLATEHOM_FAULT_INJECT")
    if fault is not None:
        cell_mod._assembly_check_scale = float(fault)
    try:
        reports = run_validation_suite(seed=args.seed, quick=args.quick)
    finally:
        if fault is not None:
            cell_mod._assembly_check_scale = 1.0
    all_pass = all(r.passed for r in reports)
    outputs = {
        "reports": [r.to_dict() for r in reports],
        "all_pass": all_pass,
    }
    config = {"seed": args.seed, "quick": args.quick}
    _write_document(args.out, _document("validate", config, outputs, "",
                                        started, args.deterministic))
    return EXIT_OK if all_pass else EXIT_SOLVER


def _harmonic_from_cfg(cfg, macro=False):
    keys = {"coef", "k1", "k2", "kind1", "kind2"}
    unknown = set(cfg) - keys - {"profile"}
    if unknown:
        raise _CliError(f"unknown harmonic keys {sorted(unknown)}", EXIT_CONFIG)
    coef = cfg.get("coef", 1.0)
    k1 = cfg.get("k1", 1)
    k2 = cfg.get("k2", 0)
    kind1 = cfg.get("kind1", "sin")
    kind2 = cfg.get("kind2", "cos")
    maker = macro_harmonic if macro else cell_harmonic
    try:
        return maker(coef, k1, k2, kind1, kind2)
    except ValueError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)


def _ansatz_from_config(cfg):
    if not isinstance(cfg, dict):
        raise _CliError("ansatz config must be a JSON object", EXIT_CONFIG)
    unknown = set(cfg) - {"isometry", "displacement", "phi", "zeta", "gbar"}
    if unknown:
        raise _CliError(f"unknown ansatz keys {sorted(unknown)}", EXIT_CONFIG)
    iso_cfg = cfg.get("isometry", {"kind": "flat"})
    try:
        iso = build_isometry(iso_cfg.get("kind", "flat"), iso_cfg.get("radius"))
    except ValueError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)

    disp_cfg = cfg.get("displacement")
    if disp_cfg is None:
        v = VectorDisplacement.zero()
    else:
        if not isinstance(disp_cfg, list) or len(disp_cfg) != 3:
            raise _CliError("displacement must be a list of three components",
                            EXIT_CONFIG)
        v = VectorDisplacement([
            None if c is None else _harmonic_from_cfg(c, macro=True)
            for c in disp_cfg])

    phi_cfg = cfg.get("phi")
    phi = (None if phi_cfg is None
           else TwoScaleScalar(None, _harmonic_from_cfg(phi_cfg)))

    zeta_cfg = cfg.get("zeta")
    zeta = None
    if zeta_cfg is not None:
        if not isinstance(zeta_cfg, list) or len(zeta_cfg) != 2:
            raise _CliError("zeta must be a list of two components", EXIT_CONFIG)
        zeta = tuple(TwoScaleScalar(None, _harmonic_from_cfg(c))
                     for c in zeta_cfg)

    gbar_cfg = cfg.get("gbar")
    gbar = None
    if gbar_cfg is not None:
        if not isinstance(gbar_cfg, list) or len(gbar_cfg) != 3:
            raise _CliError("gbar must be a list of three components", EXIT_CONFIG)
        comps = []
        for c in gbar_cfg:
            if c is None:
                comps.append((TwoScaleScalar(None, cell_harmonic(0.0, 1, 0)),
                              ThicknessProfile("const", 0.0)))
            else:
                prof_cfg = c.get("profile", {"kind": "const", "coef": 1.0})
                prof = ThicknessProfile(prof_cfg.get("kind", "const"),
                                        prof_cfg.get("coef", 1.0))
                comps.append((TwoScaleScalar(None, _harmonic_from_cfg(c)), prof))
        gbar = tuple(comps)

    try:
        return RecoveryAnsatz(iso=iso, v=v, zeta=zeta, phi=phi, gbar=gbar)
    except ValueError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)


def cmd_recover(args):
    started = time.monotonic()
    ansatz_cfg = _read_json(args.config)
    ansatz = _ansatz_from_config(ansatz_cfg)
    fld = _load_material(args.material)
    ks = [int(k) for k in _parse_floats(args.k, "k")]
    if any(k < 2 for k in ks):
        raise _CliError("period counts k must be at least 2 (eps = 1/k must "
                        "shrink)", EXIT_CONFIG)
    try:
        report = convergence_study(ansatz, fld, ks, x3_gauss=args.x3_gauss)
    except ValueError as exc:
        raise _CliError(str(exc), EXIT_CONFIG)
    outputs = {
        "target": report.target,
        "fitted_order": report.fitted_order,
        "rows": report.rows,
    }
    config = {"ansatz": ansatz_cfg, "material": fld.config, "k": ks,
              "x3_gauss": args.x3_gauss}
    _write_document(args.out, _document("recover", config, outputs, fld.digest,
                                        started, args.deterministic))
    if args.csv:
        _write_csv(args.csv, report.csv_rows())
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="platehom",
        description="Effective bending stiffness of periodic composite plates.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None,
                       help="result document path (default: stdout)")
        p.add_argument("--threads", type=int,
                       default=max(1, os.cpu_count() or 1),
                       help="parallel solves (default: available parallelism)")
        p.add_argument("--deterministic", action="store_true",
                       help="single-threaded, omit wall time; byte-identical "
                            "outputs across runs")

    p = sub.add_parser("homogenize", help="one relaxation cell solve")
    p.add_argument("--material", required=True, help="material config JSON")
    p.add_argument("--A", required=True, help="bending direction 'a11,a22,a12'")
    p.add_argument("--modes", type=int, default=8, help="Fourier truncation (default 8)")
    p.add_argument("--tol", type=float, default=1e-10, help="CG tolerance (default 1e-10)")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None,
                   help="CG iteration cap (default: dimension-based)")
    common(p)
    p.set_defaults(func=cmd_homogenize)

    p = sub.add_parser("tensor", help="full effective bending tensor")
    p.add_argument("--material", required=True)
    p.add_argument("--modes", type=int, default=8, help="Fourier truncation (default 8)")
    p.add_argument("--tol", type=float, default=1e-10, help="CG tolerance (default 1e-10)")
    common(p)
    p.set_defaults(func=cmd_tensor)

    p = sub.add_parser("gamma-sweep", help="finite-gamma values against the limit")
    p.add_argument("--material", required=True)
    p.add_argument("--A", required=True)
    p.add_argument("--gammas", required=True,
                   help="strictly decreasing list, e.g. '1,0.5,0.25'")
    p.add_argument("--modes", type=int, default=8, help="Fourier truncation (default 8)")
    p.add_argument("--tol", type=float, default=1e-10, help="CG tolerance (default 1e-10)")
    p.add_argument("--x3-elems", dest="x3_elems", type=int, default=None,
                   help="thickness intervals (default: refined as gamma shrinks)")
    p.add_argument("--csv", default=None, help="also write a flat CSV table")
    common(p)
    p.set_defaults(func=cmd_gamma_sweep)

    p = sub.add_parser("validate", help="run the oracle cross-check suite")
    p.add_argument("--seed", type=int, default=0, help="suite RNG seed (default 0)")
    p.add_argument("--quick", action="store_true", help="reduced sample counts")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("recover", help="recovery-deformation energy sweep")
    p.add_argument("--config", required=True, help="ansatz config JSON")
    p.add_argument("--material", required=True)
    p.add_argument("--k", required=True,
                   help="increasing period counts, e.g. '8,16,32'")
    p.add_argument("--x3-gauss", dest="x3_gauss", type=int, default=None,
                   help="thickness quadrature order (default: material-driven)")
    p.add_argument("--csv", default=None, help="also write a flat CSV table")
    common(p)
    p.set_defaults(func=cmd_recover)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"platehom: error: {exc}", file=sys.stderr)
        return exc.code
    except MaterialConfigError as exc:
        print(f"platehom: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverConvergenceError as exc:
        print(f"platehom: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RuntimeError as exc:
        print(f"platehom: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"platehom: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
