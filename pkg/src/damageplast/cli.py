"""Command-line interface.

Exit codes: 0 success, 1 invalid input (bad scenario, oversized oracle
instance), 2 solver stall or failure, 3 verification findings.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .energetics import condition_suite, energy_balance_check, verify_trajectory
from .exceptions import ConfigurationError, OracleSizeError, ValidationError
from .oracle import MAX_UNKNOWNS, compare_with_oracle, oracle_size
from .scenario_io import parse_scenario, read_run, write_run, write_snapshot
from .solver import run_evolution

EXIT_OK, EXIT_INVALID, EXIT_STALL, EXIT_VIOLATION = 0, 1, 2, 3


def _build_parser():
    p = argparse.ArgumentParser(prog="damageplast", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evolve a scenario and write outputs")
    r.add_argument("scenario")
    r.add_argument("--out", default=None, help="output directory (default: ./<name>_out)")
    r.add_argument("--no-snapshots", action="store_true", help="write only the time series")

    v = sub.add_parser("verify", help="check a fresh or stored run against the energetic conditions")
    v.add_argument("scenario")
    v.add_argument("--trajectory", default=None, help="run directory written by 'run'")
    v.add_argument("--out", default=None, help="where to write the verification table")
    v.add_argument("--conditions", action="store_true", help="also sample the structural conditions")

    o = sub.add_parser("oracle", help="compare one incremental step with brute-force search")
    o.add_argument("scenario")
    o.add_argument("--step", type=int, required=True)
    o.add_argument("--levels", type=int, default=11)

    c = sub.add_parser("check-conditions", help="sample the structural inequalities")
    c.add_argument("scenario")
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    return p


def _cmd_run(args):
    sc = parse_scenario(args.scenario)
    traj = run_evolution(sc)
    out = Path(args.out or f"{sc.name}_out")
    bal = energy_balance_check(traj, sc)
    write_run(out, traj, sc, bal, snapshots=not args.no_snapshots)
    print(f"wrote {len(traj)} steps to {out}")
    if not traj.complete:
        print(f"solver failure: {traj.error}", file=sys.stderr)
        return EXIT_STALL
    if traj.stalled_steps:
        print(f"solver stalled at steps {traj.stalled_steps}", file=sys.stderr)
        return EXIT_STALL
    return EXIT_OK


def _write_verification(path, report):
    b = report.balance
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "min_margin", "eps_stab", "worst_kind", "balance_gap", "upper_gap", "lower_gap", "eps_bal"])
        for k, t in enumerate(b.times):
            st = report.stability[k] if report.stability else None
            w.writerow(
                [
                    k,
                    "%.17g" % t,
                    "%.17g" % st.min_margin if st else "",
                    "%.17g" % st.eps_stab if st else "",
                    (st.worst_kind or "") if st else "",
                    "%.17g" % b.balance_gap[k],
                    "%.17g" % b.upper_gap[k],
                    "%.17g" % b.lower_gap[k],
                    "%.17g" % b.eps_bal[k],
                ]
            )


def _cmd_verify(args):
    sc = parse_scenario(args.scenario)
    code = EXIT_OK
    if args.trajectory:
        traj = read_run(args.trajectory, sc)
    else:
        traj = run_evolution(sc)
        if not traj.complete or traj.stalled_steps:
            print(f"solver stalled or failed ({traj.error or traj.stalled_steps})", file=sys.stderr)
            code = EXIT_STALL
    report = verify_trajectory(traj, sc, conditions=args.conditions)
    for line in report.summary_lines():
        print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_verification(out / "verification.csv", report)
        for k in report.stability_violations:
            write_snapshot(out / "competitors", k, sc.mesh, report.stability[k].worst_competitor)
    if not report.passed:
        return EXIT_VIOLATION
    return code


def _cmd_oracle(args):
    sc = parse_scenario(args.scenario)
    if not 1 <= args.step <= sc.time.n_steps:
        raise ConfigurationError(f"--step must lie in [1, {sc.time.n_steps}]")
    # refuse oversized instances before spending time on the evolution
    n_chi, n_d = oracle_size(sc)
    if n_chi + n_d > MAX_UNKNOWNS:
        raise OracleSizeError(
            f"oracle needs at most {MAX_UNKNOWNS} nodal unknowns, instance has {n_chi + n_d} "
            f"({n_chi} damage + {n_d} plastic)"
        )
    head = replace(sc.time, T=sc.time.T * args.step / sc.time.n_steps, n_steps=args.step)
    traj = run_evolution(sc.with_(time=head))
    if len(traj) <= args.step:
        print(f"solver failed before step {args.step}: {traj.error}", file=sys.stderr)
        return EXIT_STALL
    (k, am, res), = compare_with_oracle(traj, sc, args.levels, steps=[args.step])
    tol = max(1e-6, res.quantization_gap)
    print(f"step {k}: AM objective {am:.12g}, oracle objective {res.objective:.12g}")
    print(f"difference {am - res.objective:.3e}, quantization gap {res.quantization_gap:.3e}, "
          f"{res.n_candidates} candidates at {res.levels} levels")
    if am > res.objective + 1e-6 or am < res.objective - tol:
        print("AM objective outside the oracle bracket", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_check(args):
    sc = parse_scenario(args.scenario)
    rep = condition_suite(sc, args.samples, args.seed)
    c = rep.constants
    print(f"constants: K1={c.K1:.6g} K2={c.K2:.6g} c0={c.c0:.6g} c1={c.c1:.6g} C_W={c.C_W:.6g}")
    for name, (ok, worst) in rep.checks.items():
        print(f"{'pass' if ok else 'FAIL'}  {name:28s} worst={worst:.6e}")
    return EXIT_OK if rep.passed else EXIT_VIOLATION


_COMMANDS = {"run": _cmd_run, "verify": _cmd_verify, "oracle": _cmd_oracle, "check-conditions": _cmd_check}


def cli_main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print("invalid scenario:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
