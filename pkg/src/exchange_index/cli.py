"""Command-line entry point: ``exchange-index {solve,scan,delta,transfer,dynamics,verify}``.

Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 property-suite failure.
Errors are also reported as a JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .config import DEFAULT
from .dynamics import stability, tatonnement, tsv_lines
from .economy import load_problem, price
from .equilibrium import ScanGrid, csv_header, csv_row, find_all_equilibria, find_equilibrium
from .errors import (
    BranchLost,
    DomainError,
    ExchangeError,
    Infeasible,
    InvalidTransfer,
    LeftDomain,
    NearSingular,
    NoConvergence,
    NotRegular,
    StepTooLarge,
    ValidationError,
)
from .manifold import delta
from .transfer import DEFAULT_MAGNITUDES, detect_transfer_problem
from . import transfer as transfer_mod
from . import verify as verify_mod

EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_PROPERTY = 3


class PropertyFailure(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _summary(args, tol, findings, checks=None) -> dict:
    inputs = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    inputs["tolerances"] = tol.as_dict()
    if args.economy is not None:
        try:
            inputs["economy_document"] = json.loads(Path(args.economy).read_text())
        except (OSError, ValueError):
            pass
    return {
        "command": args.command,
        "inputs": inputs,
        "seed": args.seed,
        "findings": findings,
        "checks": checks or {},
    }


def _validate(args):
    if args.tol_newton is not None and not args.tol_newton > 0:
        raise ValidationError("--tol-newton must be positive")
    if args.trials < 0:
        raise ValidationError("--trials must be nonnegative")
    if args.seed < 0 or args.seed >= 2**64:
        raise ValidationError("--seed must fit in an unsigned 64-bit integer")
    if args.magnitude and not all(0 < m < 0.5 for m in args.magnitude):
        raise ValidationError("--magnitude values must lie in (0, 0.5)")
    if args.grid_points is not None and args.grid_points < 2:
        raise ValidationError("--grid-points must be at least 2")
    if not 0 < args.scan_low < args.scan_high:
        raise ValidationError("need 0 < --scan-low < --scan-high")
    if args.dt is not None and not args.dt > 0:
        raise ValidationError("--dt must be positive")


def _resolve(args):
    tol = DEFAULT if args.tol_newton is None else DEFAULT.override(newton=args.tol_newton)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return tol, out


def _problem(args):
    if args.economy is None:
        raise ValidationError("--economy is required for this command")
    eco, omega = load_problem(args.economy)
    if omega is None:
        raise ValidationError(f"{args.economy}: the document has no endowments")
    return eco, omega


def _scan(args, eco, omega, tol):
    grid = ScanGrid(low=args.scan_low, high=args.scan_high, points=args.grid_points)
    return find_all_equilibria(eco, omega, grid, tol)


def _start_price(args, eco):
    if args.p0:
        if len(args.p0) != eco.l - 1:
            raise ValidationError(f"--p0 needs {eco.l - 1} values")
        return price(args.p0)
    return np.ones(eco.l)


def cmd_solve(args):
    tol, out = _resolve(args)
    eco, omega = _problem(args)
    rec = find_equilibrium(eco, omega, _start_price(args, eco), tol)
    _write_csv(out / "equilibria.csv", csv_header(eco.l), [csv_row(rec)])
    return {"p": rec.p, "det_j": rec.det_j, "index": rec.index, "iterations": rec.iterations}, None


def cmd_scan(args):
    tol, out = _resolve(args)
    eco, omega = _problem(args)
    recs = _scan(args, eco, omega, tol)
    _write_csv(out / "equilibria.csv", csv_header(eco.l), [csv_row(r) for r in recs])
    findings = {"count": len(recs), "indices": [r.index for r in recs],
                "index_sum": sum(r.index for r in recs if r.index is not None)}
    return findings, None


def cmd_delta(args):
    tol, out = _resolve(args)
    eco, omega = _problem(args)
    recs = _scan(args, eco, omega, tol)
    rows, matches = [], []
    for rec in recs:
        flag = ""
        try:
            d = delta(eco, omega, rec.p, tol)
        except NearSingular as exc:
            d, flag = exc.value, "near_singular"
        sign = 1 if d > 0 else -1
        match = "" if (rec.index is None or flag) else str(sign == rec.index).lower()
        if match:
            matches.append(match == "true")
        rows.append(csv_row(rec) + [repr(d), str(sign), match or flag])
    _write_csv(out / "equilibria.csv", csv_header(eco.l) + ["delta", "sign_delta", "sign_match_index"], rows)
    checks = {"sign_delta_equals_index": "pass" if all(matches) else "fail"}
    if not all(matches):
        raise PropertyFailure("sign of Delta disagrees with the index", {"count": len(recs)}, checks)
    return {"count": len(recs), "matched": sum(matches)}, checks


def cmd_transfer(args):
    tol, out = _resolve(args)
    eco, omega = _problem(args)
    recs = _scan(args, eco, omega, tol)
    k = args.equilibrium_index
    if not 0 <= k < len(recs):
        raise ValidationError(f"--equilibrium-index {k} out of range: scan found {len(recs)} equilibria")
    rec = recs[k]
    if not rec.regular:
        raise NotRegular(f"equilibrium {k} is not regular")
    mags = tuple(args.magnitude) if args.magnitude else DEFAULT_MAGNITUDES
    det = detect_transfer_problem(eco, omega, rec.p, args.trials, mags, args.seed, tol=tol)
    _write_csv(out / "transfers.csv", transfer_mod.csv_header(eco.l), [transfer_mod.csv_row(r) for r in det.reports])
    findings = {
        "equilibrium": rec.p,
        "index": rec.index,
        "found": det.found,
        "found_by_magnitude": {repr(m): v for m, v in det.found_by_magnitude.items()},
        "evaluated": det.evaluated,
        "skipped": det.skipped,
        "paradox_rows": sum(r.paradox for r in det.reports),
    }
    return findings, None


def cmd_dynamics(args):
    tol, out = _resolve(args)
    eco, omega = _problem(args)
    dt = tol.dt if args.dt is None else args.dt
    traj = tatonnement(eco, omega, _start_price(args, eco), dt, args.t_max, tol)
    (out / "trajectory.tsv").write_text("\n".join(tsv_lines(traj)) + "\n")
    findings = {"status": traj.status, "endpoint": traj.endpoint, "steps": len(traj.times) - 1,
                "final_z_inf": traj.znorms[-1]}
    if traj.status == "converged":
        rec = find_equilibrium(eco, omega, traj.endpoint, tol)
        rep = stability(rec, tol)
        findings.update(index=rec.index, classification=rep.classification,
                        eigenvalues=[[z.real, z.imag] for z in rep.eigenvalues])
    return findings, None


def cmd_verify(args):
    tol, out = _resolve(args)
    mags = tuple(args.magnitude) if args.magnitude else (1e-3, 1e-4)
    results = verify_mod.run_all(trials=args.trials, magnitudes=mags, seed=args.seed, tol=tol)
    for res in results:
        print(res.line())
    checks = {r.name: "pass" if r.passed else "fail" for r in results}
    # timings stay out of the summary so reruns are byte-identical
    findings = {r.name: r.detail for r in results}
    if not all(r.passed for r in results):
        raise PropertyFailure("property suite failed", findings, checks)
    return findings, checks


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation failures: exit 1 with error JSON instead of argparse's exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.exit(_fail(EXIT_VALIDATION, ValidationError(message)))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="exchange-index", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--economy", type=Path, help="economy JSON document with endowments")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=500)
        p.add_argument("--magnitude", type=float, action="append", help="relative transfer size (repeatable)")
        p.add_argument("--grid-points", type=int, default=None, help="multi-start points per price axis")
        p.add_argument("--scan-low", type=float, default=1e-3)
        p.add_argument("--scan-high", type=float, default=1e3)
        p.add_argument("--tol-newton", type=float, default=None)
        p.add_argument("--p0", type=float, nargs="+", help="starting prices p_1..p_{l-1}")
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--t-max", type=float, default=1000.0)
        p.add_argument("--equilibrium-index", type=int, default=0,
                       help="position in the sorted scan output (0-based)")
        return p

    for name, fn, help_ in [
        ("solve", cmd_solve, "damped Newton from --p0"),
        ("scan", cmd_scan, "all equilibria found by multi-start"),
        ("delta", cmd_delta, "equilibria with the intersection determinant"),
        ("transfer", cmd_transfer, "randomized transfer search at one equilibrium"),
        ("dynamics", cmd_dynamics, "tatonnement trajectory from --p0"),
        ("verify", cmd_verify, "run the property suite on the built-in corpus"),
    ]:
        common(sub.add_parser(name, help=help_)).set_defaults(func=fn)
    return parser


def _fail(code: int, exc: Exception) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _validate(args)
        findings, checks = args.func(args)
    except PropertyFailure as exc:
        msg, findings, checks = exc.args
        tol, out = _resolve(args)
        (out / "summary.json").write_text(json.dumps(_jsonable(_summary(args, tol, findings, checks)), indent=2) + "\n")
        return _fail(EXIT_PROPERTY, PropertyFailure(msg))
    except (NoConvergence, LeftDomain, BranchLost, Infeasible, NotRegular, StepTooLarge) as exc:
        return _fail(EXIT_SOLVER, exc)
    except (ValidationError, InvalidTransfer, DomainError, OSError, ValueError, KeyError) as exc:
        return _fail(EXIT_VALIDATION, exc)
    except ExchangeError as exc:
        return _fail(EXIT_SOLVER, exc)
    tol, out = _resolve(args)
    summary = _summary(args, tol, findings, checks)
    summary["backend"] = kernels.BACKEND
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
