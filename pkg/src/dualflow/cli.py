"""Command-line interface: ``dualflow {generate,solve,verify,sweep}``.

Exit codes: 0 success / all bounds hold, 1 bound violation, 2 usage or
malformed input, 3 runtime or solver error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics, flows, instances, tikhonov
from .errors import DualFlowError

log = logging.getLogger("dualflow")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

SWEEP_HEADER = ["delta", "t_star", "c0", "k", "lagrangian_gap", "feas_gap", "gap_bound",
                "feas_bound", "status", "seconds"]


class UsageError(Exception):
    pass


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _gamma(text):
    if text == "auto":
        return text
    return _positive_float(text)


def _deltas(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad delta list {text!r}")
    return vals


def _add_instance_args(p, kinds):
    p.add_argument("--kind", choices=kinds, default=kinds[0])
    p.add_argument("--p", type=int, default=200, help="signal dimension (n for tv)")
    p.add_argument("--d", type=int, default=50, help="number of measurements")
    p.add_argument("--sparsity", type=int, default=5)
    p.add_argument("--reg", choices=["l1", "elastic"], default="l1")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--blur-width", type=int, default=3)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a problem instance as JSON")
    _add_instance_args(g, ["sparse", "l2", "tv"])
    g.add_argument("--delta", type=float, default=0.0)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="run a solver and write a diagnostics CSV")
    s.add_argument("--problem", required=True)
    s.add_argument("--method", choices=["explicit", "bregman", "tikhonov"], default="explicit")
    s.add_argument("--gamma", type=_gamma, default="auto")
    s.add_argument("--horizon-t", type=_positive_float, default=None,
                   help="max continuous time (default: t* when certified, else 1e4*gamma)")
    s.add_argument("--stop", choices=["fixed", "oracle", "discrepancy"], default="fixed")
    s.add_argument("--tau-dp", type=float, default=None)
    s.add_argument("--inner-tol", type=_positive_float, default=1e-6)
    s.add_argument("--grid-size", type=int, default=40, help="tikhonov grid points")
    s.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="check diagnostics against the theoretical bounds")
    v.add_argument("--problem", required=True)
    v.add_argument("--diagnostics", required=True)
    v.add_argument("--slack", type=float, default=1.5)
    v.add_argument("--c0", type=float, default=None,
                   help="||y0 - y_bar|| (default ||y_bar||, i.e. y0 = 0)")
    v.add_argument("--report", default=None, help="JSON report path (default: <diagnostics>.report.json)")

    w = sub.add_parser("sweep", help="early-stopped runs over a list of noise levels")
    _add_instance_args(w, ["sparse", "l2"])
    w.add_argument("--deltas", type=_deltas, required=True)
    w.add_argument("--method", choices=["explicit", "bregman"], default="explicit")
    w.add_argument("--gamma", type=_gamma, default="auto")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out", required=True)
    return parser


def _make_instance(args, delta):
    if args.kind == "sparse":
        return instances.generate_sparse(args.p, args.d, args.sparsity, args.reg, delta, args.rho,
                                         args.seed, alpha=args.alpha)
    if args.kind == "l2":
        return instances.generate_l2(args.p, args.d, delta, args.rho, args.seed)
    return instances.generate_tv(args.p, args.blur_width, delta, args.rho, args.seed)


def cmd_generate(args) -> int:
    try:
        inst = _make_instance(args, args.delta)
    except ValueError as exc:
        if isinstance(exc, DualFlowError):
            raise
        raise UsageError(str(exc))
    instances.save(inst, args.out)
    if inst.certificate is not None:
        r = instances.verify_kkt(inst)
        print(f"kkt_residual_primal={r.primal!r}")
        print(f"kkt_residual_dual={r.dual!r}")
    else:
        print("certificate: none")
    print(f"wrote {args.out}")
    return EXIT_OK


def _load_problem(path):
    try:
        return instances.load(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, DualFlowError):
            raise
        raise UsageError(f"cannot read problem {path}: {exc}")


def cmd_solve(args) -> int:
    inst = _load_problem(args.problem)
    if args.method == "tikhonov":
        grid = tikhonov.default_grid(inst, args.grid_size)
        path = tikhonov.solve_path(inst, grid)
        rows = tikhonov.path_rows(inst, path)
        diagnostics.write_csv(rows, args.out, tikhonov.PATH_CSV_HEADER)
        best = min(rows, key=lambda r: r["feas_gap"])
        print(f"grid: {len(rows)} points in [{grid[0]:.6g}, {grid[-1]:.6g}]")
        print(f"min feas_gap={best['feas_gap']:.6g} at s={best['s']:.6g}")
        return EXIT_OK

    gamma = flows.default_gamma(inst) if args.gamma == "auto" else args.gamma
    horizon = args.horizon_t
    if horizon is None:
        if inst.certificate is not None and inst.delta > 0:
            horizon = flows.oracle_stop_time(inst)
        else:
            horizon = 1e4 * gamma
    horizon = max(horizon, gamma)
    if args.stop == "oracle":
        # raises MissingCertificate / ZeroNoise before any work is done
        t_star = flows.oracle_stop_time(inst)
        if args.horizon_t is None:
            horizon = max(t_star, gamma)
    try:
        cfg = flows.FlowConfig(method=args.method, gamma=gamma, horizon_t=horizon, stop=args.stop,
                               tau_dp=args.tau_dp, inner=flows.InnerSettings(tol=args.inner_tol))
    except ValueError as exc:
        raise UsageError(str(exc))
    traj = flows.run(inst, cfg)
    diagnostics.write_csv(traj.rows, args.out)
    last = traj.rows[-1]
    print(f"gamma={gamma!r}")
    print(f"stopped at k={last.k} t={last.t!r} ({traj.stop_reason})")
    print(f"feas_gap_avg={last.feas_gap_avg!r}")
    if last.lagrangian_gap_avg is not None:
        print(f"lagrangian_gap_avg={last.lagrangian_gap_avg!r}")
    return EXIT_OK


def _verify_path(inst, rows, slack):
    report = diagnostics.BoundReport(slack=slack, c0=None, delta=inst.delta)
    if inst.certificate is None:
        report.notes.append("skipped: no certificate (tikh_dsym, tikh_feas)")
        return report
    ybar = float(np.linalg.norm(inst.certificate.y_bar))
    report.c0 = ybar
    for i, r in enumerate(rows):
        s = r["s"]
        rhs_d, rhs_f = tikhonov.tikhonov_rhs(ybar, inst.delta, s)
        report.checks.append(diagnostics.BoundCheck(
            "tikh_dsym", i, s, r["bregman_sum"], rhs_d, rhs_d * slack, r["bregman_sum"] <= rhs_d * slack))
        report.checks.append(diagnostics.BoundCheck(
            "tikh_feas", i, s, r["feas_gap"], rhs_f, rhs_f * slack, r["feas_gap"] <= rhs_f * slack))
    return report


def cmd_verify(args) -> int:
    inst = _load_problem(args.problem)
    try:
        header, dict_rows = diagnostics.read_csv(args.diagnostics)
    except (OSError, ValueError, StopIteration) as exc:
        raise UsageError(f"cannot read diagnostics {args.diagnostics}: {exc}")
    if header == tikhonov.PATH_CSV_HEADER:
        report = _verify_path(inst, dict_rows, args.slack)
    elif header == diagnostics.CSV_HEADER:
        if not dict_rows:
            raise UsageError("diagnostics file has no rows")
        try:
            rows = diagnostics.rows_from_dicts(dict_rows)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"malformed diagnostics row: {exc}")
        gamma = rows[0].t / rows[0].k
        c0 = None
        if inst.certificate is not None:
            c0 = args.c0 if args.c0 is not None else float(np.linalg.norm(inst.certificate.y_bar))
        report = diagnostics.bound_report_from_rows(rows, c0, inst.delta, gamma, args.slack)
    else:
        raise UsageError(f"unrecognized CSV header in {args.diagnostics}")

    out = Path(args.report) if args.report else Path(str(args.diagnostics) + ".report.json")
    out.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    for name, s in report.summary().items():
        status = "PASS" if s["failed"] == 0 else "FAIL"
        print(f"{status} {name}: {s['checked'] - s['failed']}/{s['checked']} "
              f"(worst measured/limit = {s['worst_ratio']:.4g})")
    for note in report.notes:
        print(note)
    if not report.passed:
        w = report.worst()
        print(f"worst offender: {w.bound} at k={w.k} t={w.t:.6g}: "
              f"measured {w.measured:.6g} > limit {w.limit:.6g}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _sweep_row(args, delta):
    row = {h: None for h in SWEEP_HEADER}
    row["delta"] = delta
    t0 = time.perf_counter()
    try:
        inst = _make_instance(args, delta)
        gamma = flows.default_gamma(inst) if args.gamma == "auto" else args.gamma
        t_star = flows.oracle_stop_time(inst)
        cfg = flows.FlowConfig(method=args.method, gamma=gamma, horizon_t=max(t_star, gamma),
                               stop="oracle")
        traj = flows.run(inst, cfg)
        last = traj.rows[-1]
        gap_b, feas_b = diagnostics.early_stopping_bounds(traj.c0, delta)
        row.update(t_star=t_star, c0=traj.c0, k=last.k, lagrangian_gap=last.lagrangian_gap_avg,
                   feas_gap=last.feas_gap_avg, gap_bound=gap_b, feas_bound=feas_b, status="ok")
    except DualFlowError as exc:
        log.error("delta=%g failed: %s", delta, exc)
        row["status"] = f"failed:{type(exc).__name__}"
    row["seconds"] = time.perf_counter() - t0
    return row


def cmd_sweep(args) -> int:
    deltas = args.deltas
    if len(deltas) < 2:
        raise UsageError("sweep needs at least two noise levels")
    if any(d <= 0 for d in deltas):
        raise UsageError("noise levels must be positive")
    diffs = np.diff(deltas)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise UsageError("noise levels must be strictly monotone")
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(lambda dl: _sweep_row(args, dl), deltas))
    diagnostics.write_csv(rows, args.out, SWEEP_HEADER)
    for r in rows:
        gap = "" if r["lagrangian_gap"] is None else f"{r['lagrangian_gap']:.6g}"
        print(f"delta={r['delta']:g} status={r['status']} gap={gap}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad usage
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DualFlowError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
