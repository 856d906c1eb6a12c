"""Command-line front end.

Subcommands:

    platoonkey run <scenario-file>    one cycle per seed, report + keys
    platoonkey sweep <scenario-file>  full sweep with CSV outputs
    platoonkey nist <bitstream-file>  randomness battery on an ASCII 0/1 file
    platoonkey plot <summary-csv>     gnuplot data + script files

Exit codes: 0 success, 1 usage error, 2 scenario parse error, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .protocol import CycleAbort, DisseminationFailure, run_cycle
from .randomness import run_battery
from .scenario import ParseError, parse_scenario
from .sweep import emit_plots, run_sweep

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we reserve 2 for parse errors
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="platoonkey", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--seed-base", type=int, default=None,
                       help="replace the scenario seeds with this base onward")
        p.add_argument("--replications", type=int, default=None,
                       help="override the scenario's replications")
        p.add_argument("--parallelism", type=int, default=1,
                       help="worker processes for sweep points")

    p_run = sub.add_parser("run", help="run one scenario point per seed")
    p_run.add_argument("scenario", help="scenario file")
    common(p_run)

    p_sweep = sub.add_parser("sweep", help="run the scenario's sweep")
    p_sweep.add_argument("scenario", help="scenario file")
    common(p_sweep)

    p_nist = sub.add_parser("nist", help="randomness battery on a bitstream")
    p_nist.add_argument("bitstream", help="ASCII 0/1 file")
    p_nist.add_argument("--out-dir", default=None,
                        help="also write nist_report.csv here")

    p_plot = sub.add_parser("plot", help="emit gnuplot files from a summary CSV")
    p_plot.add_argument("csv", help="summary.csv from a sweep")
    p_plot.add_argument("--out-dir", default="out", help="output directory")
    return parser


def _cmd_run(args) -> int:
    text = Path(args.scenario).read_text(encoding="utf-8")
    scenario = parse_scenario(text)
    if scenario.sweep_axis != "none":
        scenario = scenario.points()[0]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = scenario.seeds
    if args.seed_base is not None:
        seeds = tuple(args.seed_base + i for i in range(len(seeds)))

    key_lines = []
    event_buf = io.StringIO()
    writer = csv.writer(event_buf, lineterminator="\r\n")
    writer.writerow(("seed", "slot", "stage", "sender", "receiver",
                     "kind", "outcome"))
    print("seed  bmmr_mean  bmmr_tail  eaves_bmmr  success  key_bits")
    for seed in seeds:
        rep = run_cycle(scenario.channel, scenario.geometry, scenario.protocol,
                        scenario.quantizer, scenario.keygen, scenario.slots,
                        np.random.SeedSequence([seed, 0]))
        print(f"{seed:<5d} {rep.mean_bmmr:9.4f} {rep.tail_bmmr:10.4f} "
              f"{rep.eavesdropper_bmmr:11.4f} {int(rep.dissemination_success):8d} "
              f"{rep.agreed_key_bits:9d}")
        key = rep.leader_key
        key_lines.append(f"seed {seed} bits {key.to01()}")
        key_lines.append(f"seed {seed} hex  {key.to_hex()}")
        for ev in rep.log.events:
            writer.writerow((seed, ev.slot, ev.stage, ev.sender, ev.receiver,
                             ev.kind, ev.outcome))
    (out / "keys.txt").write_text("\n".join(key_lines) + "\n", encoding="ascii")
    (out / "events.csv").write_text(event_buf.getvalue(), encoding="ascii")
    print(f"wrote {out / 'keys.txt'} and {out / 'events.csv'}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    text = Path(args.scenario).read_text(encoding="utf-8")
    scenario = parse_scenario(text)
    report = run_sweep(scenario, args.out_dir, parallelism=args.parallelism,
                       seed_base=args.seed_base, replications=args.replications)
    n_fail = sum(r["failure"] for r in report.rows)
    print(f"{len(report.rows)} cycles across {len(scenario.points())} points; "
          f"{n_fail} failures")
    print(f"reports in {Path(args.out_dir).resolve()}")
    return EXIT_OK


def _cmd_nist(args) -> int:
    raw = Path(args.bitstream).read_text(encoding="ascii")
    bits = np.array([int(c) for c in raw if c in "01"], dtype=np.uint8)
    if bits.size == 0:
        print("error: bitstream file holds no 0/1 characters", file=sys.stderr)
        return EXIT_RUNTIME
    report = run_battery(bits)
    print(f"input length: {report.input_length}")
    print(f"parameters:   {report.parameters}")
    rows = report.rows()
    width = max(len(name) for name, _, _ in rows)
    for name, ps, verdict in rows:
        print(f"{name:<{width}}  {ps:<22} {verdict}")
    print("overall:", "pass" if report.all_passed else "FAIL")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(("test", "p_values", "verdict"))
        writer.writerows(rows)
        (out / "nist_report.csv").write_text(buf.getvalue(), encoding="ascii")
    return EXIT_OK


def _cmd_plot(args) -> int:
    files = emit_plots(args.csv, args.out_dir)
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "nist":
            return _cmd_nist(args)
        return _cmd_plot(args)
    except ParseError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (CycleAbort, DisseminationFailure, ValueError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
