"""Command line entry point: ``ucs run | oracle | plotdata``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import harness

log = logging.getLogger("ucs")


def _cmd_run(args):
    spec = harness.load_config(args.config, preset=args.preset)
    if args.seed is not None:
        spec = harness.replace(spec, master_seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    log.info("running %s: n=%d, M=%s, SNR=%s, %d trials x %d seeds", spec.source.kind.value,
             spec.n, list(spec.m_grid), list(spec.snr_grid_db), spec.trials, spec.seeds_per_trial)
    rows, traces = harness.run_experiment(spec, threads=args.threads, trace=args.trace)
    harness.emit_csv(rows, os.path.join(args.out, "results.csv"))
    harness.emit_plotdata(rows, os.path.join(args.out, "summary.csv"))
    harness.emit_timings(rows, os.path.join(args.out, "timings.csv"))
    if args.trace:
        harness.emit_traces(spec, traces, os.path.join(args.out, "energy_trace.csv"))
    failed = sum(bool(r.error) for r in rows)
    for rec in harness.aggregate(rows):
        log.info("snr=%g M=%d  MSDR %.2f dB (least squares %.2f dB)", rec[1], rec[2], rec[4], rec[7])
    if failed:
        log.warning("%d row(s) recorded errors", failed)
    return 0


def _cmd_oracle(args):
    from . import oracles

    ok = True
    for res in oracles.run_all(seed=args.seed or 0):
        print(res.line())
        ok &= res.passed
    return 0 if ok else 1


def _cmd_plotdata(args):
    rows = harness.read_results(args.results)
    harness.emit_plotdata(rows, args.out)
    if args.out is None:
        sys.stdout.write(harness.emit_plotdata(rows))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="ucs", description="Universal signal recovery experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment sweep and write CSV tables")
    r.add_argument("config", nargs="?", help="INI file; omitted keys use the preset")
    r.add_argument("-o", "--out", default="results", help="output directory")
    r.add_argument("--preset", choices=sorted(harness.PRESETS), default="desk")
    r.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${harness.THREADS_ENV} or 1)")
    r.add_argument("--seed", type=int, default=None, help="override master_seed")
    r.add_argument("--trace", action="store_true", help="also write per-super-iteration energies")
    r.set_defaults(func=_cmd_run)

    o = sub.add_parser("oracle", help="run the brute-force reference checks")
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=_cmd_oracle)

    d = sub.add_parser("plotdata", help="aggregate results.csv into plot-ready rows")
    d.add_argument("results", help="results.csv written by `ucs run`")
    d.add_argument("-o", "--out", default=None, help="output CSV (default: stdout)")
    d.set_defaults(func=_cmd_plotdata)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "run" else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
