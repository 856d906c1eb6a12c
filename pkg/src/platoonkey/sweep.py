"""Experiment sweeps: deterministic execution, CSV reports, plot files.

A sweep expands the scenario into points along its axis and runs every
(point, seed, replication) as an independent, pure work unit.  Results
are merged in (point, seed, replication) order, so the deterministic
outputs are byte-identical at every parallelism degree:

* ``runs.csv``     one row per executed cycle,
* ``summary.csv``  one row per (point, metric) with mean/stddev,
* ``nist.csv``     randomness battery of each point's key corpus,
* ``corpus_point<k>.txt``  the leader's concatenated agreed keys.

Wall-clock compute time is intentionally kept out of those files and
written to the ``timings.csv`` sidecar instead.  Every deterministic CSV
starts with a ``#``-prefixed provenance block carrying the fully
resolved scenario and seed list.

The key corpus of a point is the leader's agreed key concatenated over
seeds.  Follower keys are near-copies of the leader's, so concatenating
all vehicles would plant long-range repeats that a spectral test reads
as structure; the leader stream is the scheme's actual key material.
"""

from __future__ import annotations

import csv
import io
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .protocol import CycleAbort, DisseminationFailure, run_cycle
from .randomness import RandomnessReport, run_battery
from .scenario import Scenario, serialize_scenario

__all__ = ["SweepReport", "emit_plots", "run_sweep"]

RUN_COLUMNS = (
    "point", "axis", "axis_value", "seed", "replication",
    "bmmr_mean", "bmmr_v2", "bmmr_tail", "eavesdropper_bmmr",
    "success", "failure", "key_bits",
    "cska_latency_ms", "evcd_latency_ms",
    "beacon_transmissions", "retransmissions", "overhead_bits",
)

SUMMARY_METRICS = (
    "bmmr_mean", "bmmr_v2", "bmmr_tail", "eavesdropper_bmmr",
    "success", "key_bits", "cska_latency_ms", "evcd_latency_ms",
    "overhead_bits",
)


def _axis_value_str(axis: str, value) -> str:
    if axis == "none":
        return "-"
    if axis == "eavesdropper":
        tag, dist = value
        return f"{tag}:{dist:g}"
    return f"{value:g}" if isinstance(value, float) else str(value)


def _run_unit(args) -> dict:
    """One (point, seed, replication) cycle; pure given its arguments."""
    point_idx, point, axis, axis_value, seed, repl = args
    ss = np.random.SeedSequence([seed, repl])
    t0 = time.perf_counter()
    row: dict = {
        "point": point_idx, "axis": axis, "axis_value": axis_value,
        "seed": seed, "replication": repl,
    }
    try:
        rep = run_cycle(point.channel, point.geometry, point.protocol,
                        point.quantizer, point.keygen, point.slots, ss)
    except (CycleAbort, DisseminationFailure, ValueError) as exc:
        row.update({k: float("nan") for k in
                    ("bmmr_mean", "bmmr_v2", "bmmr_tail", "eavesdropper_bmmr",
                     "key_bits", "cska_latency_ms", "evcd_latency_ms",
                     "beacon_transmissions", "retransmissions", "overhead_bits")})
        row.update(success=0, failure=1, error=type(exc).__name__,
                   key01="", compute_s=time.perf_counter() - t0)
        return row
    row.update(
        bmmr_mean=rep.mean_bmmr,
        bmmr_v2=rep.bmmr_per_vehicle[2],
        bmmr_tail=rep.tail_bmmr,
        eavesdropper_bmmr=rep.eavesdropper_bmmr,
        success=int(rep.dissemination_success),
        failure=0,
        key_bits=rep.agreed_key_bits,
        cska_latency_ms=rep.log.cska_latency_ms,
        evcd_latency_ms=rep.log.evcd_latency_ms,
        beacon_transmissions=rep.log.beacon_transmissions,
        retransmissions=rep.log.retransmissions,
        overhead_bits=rep.log.overhead_bits,
        error="",
        key01=rep.leader_key.to01() if rep.leader_key else "",
        compute_s=time.perf_counter() - t0,
    )
    return row


@dataclass
class SweepReport:
    scenario: Scenario
    rows: list[dict]
    nist_reports: dict[int, RandomnessReport] = field(default_factory=dict)
    out_dir: Path | None = None

    def point_rows(self, point_idx: int) -> list[dict]:
        return [r for r in self.rows if r["point"] == point_idx]


def _fmt(value) -> str:
    if isinstance(value, float):
        if np.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _provenance_lines(scenario: Scenario) -> list[str]:
    lines = ["# resolved scenario:"]
    lines += [f"# {line}" for line in serialize_scenario(scenario).strip().splitlines()]
    return lines


def _write_csv(path: Path, provenance: list[str], header, rows) -> None:
    buf = io.StringIO()
    for line in provenance:
        buf.write(line + "\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="ascii")


def run_sweep(scenario: Scenario, out_dir, parallelism: int = 1,
              seed_base: int | None = None,
              replications: int | None = None) -> SweepReport:
    """Execute the sweep and write all report files into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = scenario.seeds
    if seed_base is not None:
        seeds = tuple(seed_base + i for i in range(len(seeds)))
    n_repl = scenario.replications if replications is None else replications

    points = scenario.points()
    values = scenario.sweep_values if scenario.sweep_axis != "none" else (None,)
    work = []
    for pi, point in enumerate(points):
        axis_value = _axis_value_str(scenario.sweep_axis,
                                     values[pi] if scenario.sweep_axis != "none" else None)
        for seed in seeds:
            for repl in range(n_repl):
                work.append((pi, point, scenario.sweep_axis, axis_value,
                             seed, repl))

    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(_run_unit, work, chunksize=1))
    else:
        rows = [_run_unit(w) for w in work]
    # merge order is the (point, seed, replication) submission order, so
    # output content does not depend on the parallelism degree
    report = SweepReport(scenario=scenario, rows=rows, out_dir=out)

    provenance = _provenance_lines(scenario)
    provenance.append(f"# seeds = {','.join(str(s) for s in seeds)}")
    provenance.append(f"# replications = {n_repl}")

    _write_csv(out / "runs.csv", provenance, RUN_COLUMNS,
               [[_fmt(r[c]) for c in RUN_COLUMNS] for r in rows])

    summary_rows = []
    for pi in range(len(points)):
        prows = report.point_rows(pi)
        axis_value = prows[0]["axis_value"] if prows else "-"
        ok = [r for r in prows if not r["failure"]]
        summary_rows.append([str(pi), scenario.sweep_axis, axis_value,
                             "failures", str(sum(r["failure"] for r in prows)),
                             "0", str(len(prows))])
        for metric in SUMMARY_METRICS:
            vals = np.array([float(r[metric]) for r in ok], dtype=float)
            if len(vals):
                mean = float(np.mean(vals))
                std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            else:
                mean, std = float("nan"), float("nan")
            summary_rows.append([str(pi), scenario.sweep_axis, axis_value,
                                 metric, _fmt(mean), _fmt(std), str(len(vals))])
    _write_csv(out / "summary.csv", provenance,
               ("point", "axis", "axis_value", "metric", "mean", "stddev", "n"),
               summary_rows)

    from .randomness import _BATTERY_ORDER
    cells: dict[str, list[str]] = {name: [] for name in _BATTERY_ORDER}
    for pi in range(len(points)):
        corpus = "".join(r["key01"] for r in report.point_rows(pi))
        (out / f"corpus_point{pi}.txt").write_text(corpus + "\n", encoding="ascii")
        if corpus:
            rep = run_battery(np.frombuffer(corpus.encode(), dtype=np.uint8) - ord("0"))
            report.nist_reports[pi] = rep
            for res in rep.results:
                cells[res.name].append(
                    ";".join(f"{p:.6f}" for p in res.p_values) or "skipped")
        else:
            for name in cells:
                cells[name].append("skipped")
    header = ["test"] + [f"point_{pi}" for pi in range(len(points))]
    _write_csv(out / "nist.csv", provenance, header,
               [[name] + cells[name] for name in _BATTERY_ORDER])

    timing_rows = [[str(r["point"]), str(r["seed"]), str(r["replication"]),
                    f"{r['compute_s']:.6f}"] for r in rows]
    _write_csv(out / "timings.csv", ["# wall-clock sidecar; not deterministic"],
               ("point", "seed", "replication", "compute_seconds"), timing_rows)
    return report


def emit_plots(summary_csv, out_dir) -> list[Path]:
    """Turn a summary CSV into gnuplot-ready .dat and .gp files.

    No plotting library is involved; the .dat files carry one row per
    sweep point with mean/stddev columns for the BMMR metrics, and the
    .gp script renders them with error bars.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = Path(summary_csv)
    table: dict[tuple[str, str, str], dict[str, tuple[str, str]]] = {}
    axis = "none"
    order: list[tuple[str, str]] = []
    with path.open(newline="", encoding="ascii") as fh:
        content = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(content)
    try:
        header = next(reader)
    except StopIteration:
        header = None
    if header is not None and header != ["point", "axis", "axis_value",
                                         "metric", "mean", "stddev", "n"]:
        from .scenario import ParseError
        raise ParseError(f"unexpected summary header: {header}")
    for row in reader:
        if len(row) != 7:
            from .scenario import ParseError
            raise ParseError(f"malformed summary row: {row}")
        point, ax, axis_value, metric, mean, std, _n = row
        axis = ax
        key = (point, ax, axis_value)
        if (point, axis_value) not in order:
            order.append((point, axis_value))
        table.setdefault(key, {})[metric] = (mean, std)

    metrics = ("bmmr_v2", "bmmr_tail", "bmmr_mean", "eavesdropper_bmmr")
    dat_path = out / f"{axis}_bmmr.dat"
    lines = []
    if axis == "eavesdropper":
        cols = ["position", "distance_m"]
    else:
        cols = [axis]
    for m in metrics:
        cols += [m, f"{m}_std"]
    lines.append("# " + " ".join(cols))
    for point, axis_value in order:
        key = (point, axis, axis_value)
        if axis == "eavesdropper":
            tag, _, dist = axis_value.partition(":")
            fields = [tag, dist]
        else:
            fields = [axis_value]
        for m in metrics:
            mean, std = table[key].get(m, ("nan", "nan"))
            fields += [mean, std]
        lines.append(" ".join(fields))
    if not order:
        print(f"warning: {path} holds no sweep points; wrote empty data file",
              file=sys.stderr)
    dat_path.write_text("\n".join(lines) + "\n", encoding="ascii")

    xcol = 2 if axis == "eavesdropper" else 1
    base = 2 if axis == "eavesdropper" else 1
    gp = [
        "set datafile missing 'nan'",
        "set key outside",
        f"set xlabel '{axis}'",
        "set ylabel 'bit mismatch rate'",
        f"set output '{axis}_bmmr.png'",
        "set terminal pngcairo size 900,600",
        "plot \\",
    ]
    plots = []
    for i, m in enumerate(metrics):
        col = base + 1 + 2 * i
        plots.append(f"  '{dat_path.name}' using {xcol}:{col}:{col + 1} "
                     f"with yerrorlines title '{m}'")
    gp[-1] += " \\\n" + ", \\\n".join(plots)
    gp_path = out / f"{axis}_bmmr.gp"
    gp_path.write_text("\n".join(gp) + "\n", encoding="ascii")
    return [dat_path, gp_path]
