"""Command-line entry point: ``cvbell {check,violation,optimize,readout}``.

Exit status is 0 on success, 1 when a check or tolerance fails and 2 for
usage errors (bad flags, unwritable paths, guard violations).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys

import numpy as np

from cvbell import identities, jcreadout
from cvbell.fock import (
    MeasurementDirection,
    identity,
    make_space,
    pseudospin_component,
    pseudospin_x,
    pseudospin_y,
    pseudospin_z,
)
from cvbell.optimize import SearchOptions, SweepRow, optimize_settings, violation_curve
from cvbell.output import format_value, manifest, write_table
from cvbell.states import DEFAULT_TAIL_TOL, MAX_PAIR_COUNT, nopa_state_auto, required_pair_count

R_CAP = 10.0
OPTIMIZE_GAP_TOL = 1e-6
READOUT_COLUMNS = ("n", "estimate", "target", "abs_error", "residual", "trapping_flag")
CHECK_COLUMNS = ("check", "pair_count", "max_residual", "tolerance", "passed")


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _pair_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("pair counts must be integers >= 1")
    return values


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _tail_tol(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("tail tolerance must lie in (0, 1)")
    return value


def _squeezing(text: str) -> float:
    value = float(text)
    if not math.isfinite(value) or value < 0 or value > R_CAP:
        raise argparse.ArgumentTypeError(f"r must lie in [0, {R_CAP:g}], got {text}")
    return value


def parse_observable(text: str, space):
    """``sz``, ``sx``, ``sy``, ``identity`` or ``stheta:<theta>[:<phi>]`` (radians)."""
    simple = {"sz": pseudospin_z, "sx": pseudospin_x, "sy": pseudospin_y, "identity": identity}
    if text in simple:
        return simple[text](space)
    if text.startswith("stheta:"):
        parts = text.split(":")[1:]
        if len(parts) not in (1, 2):
            raise UsageError(f"bad observable {text!r}")
        try:
            angles = [float(p) for p in parts]
        except ValueError:
            raise UsageError(f"bad observable {text!r}")
        return pseudospin_component(space, MeasurementDirection.from_angles(*angles))
    raise UsageError(f"unknown observable {text!r}; use sz, sx, sy, identity or stheta:<theta>[:<phi>]")


def parse_field_state(text: str, space) -> np.ndarray:
    """``fock:<n>`` or ``plus`` = (|0> + |1>)/sqrt 2."""
    d = space.dimension
    f = np.zeros(d, dtype=complex)
    if text == "plus":
        f[0] = f[1] = 1 / math.sqrt(2)
        return f
    if text.startswith("fock:"):
        try:
            n = int(text.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad state {text!r}")
        if not 0 <= n < d:
            raise UsageError(f"Fock level {n} outside the field space of dimension {d}")
        f[n] = 1.0
        return f
    raise UsageError(f"unknown state {text!r}; use fock:<n> or plus")


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}


def cmd_check(args, out) -> int:
    results = identities.run_checks(args.pairs, args.seed)
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        out.write(f"{res.check:<13} pairs={res.pair_count:<5d} max_residual={res.max_residual:.3e} "
                  f"tol={res.tolerance:.0e}  {status}\n")
    failed = [f"{r.check}(pairs={r.pair_count})" for r in results if not r.passed]
    out.write("all checks passed\n" if not failed else f"FAILED: {', '.join(failed)}\n")
    if args.output:
        write_table(args.output, args.format, CHECK_COLUMNS, [r.as_dict() for r in results],
                    manifest("check", _params(args)), out)
    return 1 if failed else 0


def _check_truncations(r_values, tail_tol):
    for r in r_values:
        m = required_pair_count(r, tail_tol)
        if m > MAX_PAIR_COUNT:
            raise UsageError(f"r={r:g} needs {m} parity pairs at tail_tol={tail_tol:g} "
                             f"(limit {MAX_PAIR_COUNT}); loosen --tail-tol")


def cmd_violation(args, out) -> int:
    _check_truncations(args.r, args.tail_tol)
    rows = violation_curve(args.r, args.tail_tol)
    write_table(args.output, args.format, SweepRow.FIELDS, [row.as_dict() for row in rows],
                manifest("violation", _params(args)), out)
    return 0


def cmd_optimize(args, out) -> int:
    _check_truncations([args.r], args.tail_tol)
    options = SearchOptions(args.grid_points, args.objective_tol, args.max_evaluations)
    report = optimize_settings(nopa_state_auto(args.r, args.tail_tol), options)
    payload = {"manifest": manifest("optimize", _params(args)), "rows": [report.as_dict()]}
    text = json.dumps(payload, indent=2) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    out.write(text)
    return 0 if report.gap <= OPTIMIZE_GAP_TOL else 1


def cmd_readout(args, out) -> int:
    space = make_space(args.pairs)
    observable = parse_observable(args.obs, space)
    field_state = parse_field_state(args.state, space)
    try:
        config = jcreadout.ReadoutChainConfig(args.n, args.gt, space)
        rows = jcreadout.readout_scan(field_state, observable, config, args.estimator)
    except ValueError as exc:
        raise UsageError(str(exc))
    for warning in jcreadout.trapping_warnings(space, args.gt):
        print(warning, file=sys.stderr)
    write_table(args.output, args.format, READOUT_COLUMNS, [dataclasses.asdict(r) for r in rows],
                manifest("readout", _params(args)), out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvbell", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="audit the pseudospin algebra and Bell-operator identities")
    p.add_argument("--pairs", type=_pair_list, default=[1, 2, 8], help="comma-separated pair counts M")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="write the detail table here")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("violation", help="canonical CHSH maximum over a list of squeezing values")
    p.add_argument("--r", type=_float_list, required=True, help="comma-separated r values")
    p.add_argument("--tail-tol", type=_tail_tol, default=DEFAULT_TAIL_TOL)
    p.add_argument("--output", help="file to write (default: standard output)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_violation)

    p = sub.add_parser("optimize", help="search all eight CHSH angles for a squeezed vacuum")
    p.add_argument("--r", type=_squeezing, required=True)
    p.add_argument("--tail-tol", type=_tail_tol, default=DEFAULT_TAIL_TOL)
    p.add_argument("--grid-points", type=_positive_int, default=33)
    p.add_argument("--objective-tol", type=float, default=1e-9)
    p.add_argument("--max-evaluations", type=_positive_int, default=20_000)
    p.add_argument("--output", help="also write the JSON report here")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("readout", help="atom-chain readout convergence table")
    p.add_argument("--gt", type=float, required=True, help="pulse area g*t_I per atom")
    p.add_argument("--n", type=_positive_int, required=True, help="largest atom count")
    p.add_argument("--obs", default="sz", help="sz, sx, sy, identity or stheta:<theta>[:<phi>]")
    p.add_argument("--state", default="fock:0", help="fock:<n> or plus")
    p.add_argument("--pairs", type=_positive_int, default=4, help="field pair count M")
    p.add_argument("--estimator", choices=jcreadout.ESTIMATORS, default="subspace")
    p.add_argument("--output", help="file to write (default: standard output)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_readout)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "violation":
        for r in args.r:
            if not math.isfinite(r) or r < 0 or r > R_CAP:
                print(f"cvbell violation: r must lie in [0, {R_CAP:g}], got {format_value(r)}", file=sys.stderr)
                return 2
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"cvbell {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cvbell {args.command}: cannot write output: {exc}", file=sys.stderr)
        return 2
