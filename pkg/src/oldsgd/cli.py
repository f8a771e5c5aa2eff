"""Command line entry point: ``oldsgd <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .harness import RunConfig, RunTrace
from .topology import build_mixing

log = logging.getLogger("oldsgd")


def _load(path) -> RunConfig:
    return RunConfig.load(path)


def cmd_run(args) -> int:
    cfg = _load(args.config)
    trace = harness.run(cfg, output=args.output)
    if not (args.output or cfg.output):
        sys.stdout.write(trace.to_csv())
    log.info("status %s after %d rows", trace.status, len(trace.rows))
    return harness.STATUS_EXIT_CODES[trace.status]


def cmd_sweep(args) -> int:
    base = _load(args.config)
    grid = {"tau": args.tau, "c": args.c, "algorithm": args.algorithm or [base.algorithm],
            "seed": args.seed or [base.hp.seed]}
    traces = harness.sweep(base, grid, workers=args.workers)
    outdir = Path(args.outdir)
    failed = 0
    for tr in traces:
        cfg = tr.config
        name = f"{cfg.algorithm}_tau{cfg.hp.tau}_c{cfg.c:g}_seed{cfg.hp.seed}.csv"
        tr.write(outdir / name)
        failed += tr.status == "error"
    log.info("wrote %d traces to %s (%d failed)", len(traces), outdir, failed)
    return 1 if failed else 0


def cmd_report_speedup(args) -> int:
    traces = [RunTrace.read(p) for p in args.traces]
    report = harness.speedup_report(traces, args.target, reference=args.reference)
    out = report.to_json() if args.json else report.to_csv()
    if args.output:
        harness.atomic_write(args.output, out)
    else:
        sys.stdout.write(out if out.endswith("\n") else out + "\n")
    return 0


def cmd_report_scalability(args) -> int:
    base = _load(args.config)
    rows = harness.scalability_report(base, args.n, args.target, seeds=args.seed)
    lines = [f"# target_loss: {args.target!r}", "n,time_to_target,speedup"]
    for r in rows:
        t = "" if r["time_to_target"] is None else f"{r['time_to_target']:.17g}"
        s = "unreachable" if r["speedup"] is None else f"{r['speedup']:.17g}"
        lines.append(f"{r['n']},{t},{s}")
    text = "\n".join(lines) + "\n"
    if args.output:
        harness.atomic_write(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify_bound(args) -> int:
    result = harness.verify_bound(_load(args.config), seeds=args.seeds)
    print(json.dumps(result, sort_keys=True))
    return 0 if result["holds"] else 1


def cmd_verify_invariants(args) -> int:
    result = harness.verify_invariants(_load(args.config))
    print(json.dumps(result, sort_keys=True))
    return 0 if result["all_hold"] else 1


def cmd_print_mixing(args) -> int:
    sys.stdout.write(build_mixing(args.kind, args.n, args.weights).to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oldsgd", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="run one configuration and write its trace")
    s.add_argument("config")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a tau x c x algorithm x seed grid")
    s.add_argument("config")
    s.add_argument("--tau", type=int, nargs="+", default=list(harness.DEFAULT_TAU_GRID))
    s.add_argument("--c", type=float, nargs="+", default=[1.0, 5.0])
    s.add_argument("--algorithm", nargs="+")
    s.add_argument("--seed", type=int, nargs="+")
    s.add_argument("--workers", type=int, default=None,
                   help=f"process pool size (default: ${harness.WORKERS_ENV} or 1)")
    s.add_argument("--outdir", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report-speedup", help="time-to-target speedups from trace files")
    s.add_argument("traces", nargs="+")
    s.add_argument("--target", type=float, required=True)
    s.add_argument("--reference", default="oldsgd")
    s.add_argument("--json", action="store_true")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_report_speedup)

    s = sub.add_parser("report-scalability", help="speedup versus agent count on the ring")
    s.add_argument("config")
    s.add_argument("--n", type=int, nargs="+", default=[2, 4, 8, 16, 32])
    s.add_argument("--target", type=float, required=True)
    s.add_argument("--seed", type=int, nargs="+")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_report_scalability)

    s = sub.add_parser("verify-bound", help="empirical gradient norm against the theoretical bound")
    s.add_argument("config")
    s.add_argument("--seeds", type=int, default=20)
    s.set_defaults(func=cmd_verify_bound)

    s = sub.add_parser("verify-invariants", help="check algorithmic identities on a configuration")
    s.add_argument("config")
    s.set_defaults(func=cmd_verify_invariants)

    s = sub.add_parser("print-mixing", help="print the mixing matrix as CSV")
    s.add_argument("--kind", choices=["ring", "complete"], default="ring")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--weights", choices=["metropolis", "uniform"], default="metropolis")
    s.set_defaults(func=cmd_print_mixing)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, harness.ReportError) as exc:
        log.error("%s", exc)
        return 2
