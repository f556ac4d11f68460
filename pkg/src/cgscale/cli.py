"""Command-line driver.

Exit codes: 0 success, 2 usage error, 3 bad input data, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .brokersim import SimConfig, check_trace, run_simulation
from .errors import InputError, InvariantViolation, SimulationFault
from .evaluation import COMPARISON_SET, evaluate_stream, iteration_metrics, resolve_names, run_packer, summarize
from .io import read_stream, write_manifest, write_stream, write_table
from .latency import PERCENTILES, LatencyConfig, parse_kafka, run_latency_experiment
from .metrics import ParetoPoint, pareto_front
from .model import validate_assignment
from .streamgen import InitMode, StreamConfig, generate_stream

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _charts(args) -> bool:
    return args.format == "csv+svg" and not args.no_charts


def _config_echo(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        out[key] = [str(v) for v in value] if isinstance(value, list) else (
            value if isinstance(value, (int, float, bool, type(None))) else str(value))
    return out


def _finish(args, out_dir: Path, inputs, outputs, manifest_name="manifest.json"):
    write_manifest(out_dir / manifest_name, args.command, _config_echo(args), args.seed,
                   __version__, inputs, outputs)


def _split(values) -> list[str]:
    out = []
    for v in values or []:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


# --------------------------------------------------------------------------
# gen-stream


def cmd_gen_stream(args) -> int:
    cfg = StreamConfig(args.partitions, args.iterations, args.delta, args.capacity,
                       InitMode(args.init), args.seed)
    stream = generate_stream(cfg)
    out = Path(args.output) if args.output else Path(args.out_dir) / "stream.csv"
    write_stream(out, stream)
    _finish(args, out.parent, [], [out], out.stem + ".manifest.json")
    print(f"partitions={stream.n_partitions} iterations={stream.n_iterations} "
          f"delta={stream.delta:g} clamp_count={stream.clamp_count} -> {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# pack


def cmd_pack(args) -> int:
    (name,) = _names([args.algorithm], args.adapted)
    stream = read_stream(args.stream)
    out_dir = Path(args.out_dir)
    assignments = run_packer(stream, name)
    rows, bad = [], []
    for k, a in enumerate(assignments, start=1):
        if not validate_assignment(a, stream.speeds[k - 1], stream.capacity):
            bad.append(k)
        rows.extend((k, j, int(c)) for j, c in enumerate(a.owners))
    metrics = iteration_metrics(name, assignments, stream)
    outs = [
        write_table(out_dir / "assignments.csv", ("iteration", "partition", "consumer"), rows),
        write_table(out_dir / "pack_metrics.csv", ("iteration", "algorithm", "bins", "rscore"),
                    [(m.iteration, m.algorithm, m.bins_used, m.rscore) for m in metrics]),
    ]
    _finish(args, out_dir, [args.stream], outs)
    if bad:
        print(f"invalid assignments at iterations {bad[:10]}", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"{name}: {len(assignments)} iterations, "
          f"avg bins {np.mean([m.bins_used for m in metrics]):.3f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# evaluate


def _names(names, adapted) -> list[str]:
    try:
        return resolve_names(names, adapted)
    except InputError as exc:
        raise UsageError(str(exc)) from None


def _eval_one(job):
    path, names = job
    stream = read_stream(path)
    return stream.delta, evaluate_stream(stream, names)


def cmd_evaluate(args) -> int:
    names = _names(_split(args.algorithms) or list(COMPARISON_SET), args.adapted)
    out_dir = Path(args.out_dir)
    jobs = [(p, names) for p in args.stream]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_eval_one, jobs))
    else:
        results = [_eval_one(j) for j in jobs]
    deltas = [d for d, _ in results]
    if len(set(deltas)) != len(deltas):
        raise InputError("each stream must have a distinct delta")

    per_rows, sum_rows, front_rows = [], [], []
    for delta, per in sorted(results, key=lambda r: r[0]):
        for name in names:
            per_rows.extend((delta, m.iteration, name, m.bins_used, m.rscore) for m in per[name])
        summaries = summarize(per)
        sum_rows.extend((delta, s.algorithm, s.cbs, s.avg_rscore, s.avg_bins) for s in summaries)
        front = pareto_front([ParetoPoint(s.algorithm, s.cbs, s.avg_rscore) for s in summaries])
        front_rows.extend((delta, p.algorithm, p.cbs, p.avg_rscore) for p in front)

    outs = [
        write_table(out_dir / "per_iteration.csv",
                    ("delta", "iteration", "algorithm", "bins", "rscore"), per_rows),
        write_table(out_dir / "summary.csv",
                    ("delta", "algorithm", "cbs", "avg_rscore", "avg_bins"), sum_rows),
        write_table(out_dir / "pareto.csv", ("delta", "algorithm", "cbs", "avg_rscore"), front_rows),
    ]
    if _charts(args):
        from . import plotting
        outs.append(plotting.plot_cbs(outs[1], out_dir / "cbs.svg"))
        outs.append(plotting.plot_rscore(outs[1], out_dir / "rscore.svg"))
        for delta in sorted(set(deltas)):
            outs.append(plotting.plot_pareto(outs[1], outs[2], repr(float(delta)),
                                             out_dir / f"pareto_d{delta:g}.svg"))
    _finish(args, out_dir, args.stream, outs)
    for delta, name, cbs_v, rs, bins in sum_rows:
        print(f"delta={delta:g} {name:8s} cbs={cbs_v:.4f} avg_rscore={rs:.4f} avg_bins={bins:.3f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# latency


def _assigners(specs, n_partitions) -> list[str]:
    out = []
    for spec in specs:
        key = spec.lower()
        n = None
        if key.startswith("kafka_") and "-" in key[6:]:
            lo, _, hi = key[6:].partition("-")
            try:
                rng = range(int(lo), int(hi) + 1)
            except ValueError:
                raise UsageError(f"bad kafka range {spec!r}") from None
            out.extend(f"kafka_{i}" for i in rng)
            n = max(rng, default=0)
        else:
            try:
                n = parse_kafka(key)
            except InputError as exc:
                raise UsageError(str(exc)) from None
            out.append(f"kafka_{n}" if n is not None else _names([key], False)[0])
        if n is not None and not 1 <= n <= n_partitions:
            raise UsageError(f"{spec}: kafka consumers must be in 1..{n_partitions}")
    return list(dict.fromkeys(out))


def _hist_edges(max_value: float, width: float, max_bins: int = 1000) -> list[float]:
    if max_value <= 0:
        return [0.0, width]
    n = math.ceil(max_value / width)
    if n > max_bins:
        width = math.ceil(max_value / max_bins)
        n = math.ceil(max_value / width)
    return [i * width for i in range(n + 1)]


def cmd_latency(args) -> int:
    stream = read_stream(args.stream)
    assigners = _assigners(_split(args.assigners) or ["mwf"], stream.n_partitions)
    cfg = LatencyConfig(args.consumer_capacity, args.iteration_secs, args.rebalance_secs,
                        args.stride)
    reports = [run_latency_experiment(stream, a, cfg, args.bytes_per_unit) for a in assigners]
    out_dir = Path(args.out_dir)
    edges = _hist_edges(max(r.max for r in reports), args.bin_width)

    summary = [
        (r.algorithm, r.avg_consumers, r.positive_samples, r.total_samples,
         *(r.percentile(q) for q in PERCENTILES), r.max)
        for r in reports
    ]
    hist, box = [], []
    for r in reports:
        counts = r.histogram(edges)
        hist.extend((r.algorithm, edges[i], edges[i + 1], c) for i, c in enumerate(counts))
        b = r.series.box_stats()
        box.append((r.algorithm, b["whislo"], b["q1"], b["med"], b["q3"], b["whishi"]))
    outs = [
        write_table(out_dir / "latency_summary.csv",
                    ("algorithm", "avg_consumers", "positive_samples", "total_samples",
                     *(f"p{q}" for q in PERCENTILES), "max"), summary),
        write_table(out_dir / "latency_hist.csv", ("algorithm", "bin_lo", "bin_hi", "count"), hist),
        write_table(out_dir / "latency_box.csv",
                    ("algorithm", "whislo", "q1", "med", "q3", "whishi"), box),
        write_table(out_dir / "consumers.csv", ("algorithm", "iteration", "consumers"),
                    [(r.algorithm, k, c) for r in reports for k, c in enumerate(r.consumers, 1)]),
    ]
    if _charts(args):
        from . import plotting
        outs.append(plotting.plot_latency_hist(outs[1], out_dir / "latency_hist.svg"))
        outs.append(plotting.plot_latency_box(outs[2], out_dir / "latency_box.svg"))
    _finish(args, out_dir, [args.stream], outs)
    for row in summary:
        print(f"{row[0]:10s} consumers={row[1]:.2f} positive={row[2]} "
              f"p50={row[4]:.3f} p90={row[5]:.3f} p99={row[6]:.3f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    (packer,) = _names([args.packer], args.adapted)
    stream = read_stream(args.stream)
    cfg = SimConfig(
        consumer_capacity=args.consumer_capacity,
        batch_size=args.batch_size,
        wait_time_secs=args.wait_time,
        measurement_interval=args.interval,
        bytes_per_unit=args.bytes_per_unit,
        saturated=args.saturated,
        reevaluate_secs=None if args.reevaluate_secs < 0 else args.reevaluate_secs,
        live_monitor=args.live_monitor,
    )
    timing, trace, metrics = [], [], []
    violations = 0
    for run in range(args.runs):
        seed = args.seed + run
        res = run_simulation(stream, packer, cfg, seed)
        check = check_trace(res.trace)
        violations += len(check.mutual_exclusion) + len(check.ordering)
        timing.extend((run, r.event, r.duration, r.iteration) for r in res.timings)
        trace.extend((run, e.time, e.actor, e.kind, e.partition, e.consumer) for e in res.trace)
        metrics.extend((run, m.iteration, m.algorithm, m.bins_used, m.rscore) for m in res.metrics)

    out_dir = Path(args.out_dir)
    summary = []
    for event in sorted({t[1] for t in timing}):
        vals = np.array([t[2] for t in timing if t[1] == event])
        lo = mode_bin(vals, args.bin_width)
        summary.append((event, len(vals), float(vals.mean()), float(np.median(vals)),
                        float(np.percentile(vals, 90)), float(vals.max()), lo, lo + args.bin_width))
    outs = [
        write_table(out_dir / "timing.csv", ("run", "event", "duration", "iteration"), timing),
        write_table(out_dir / "trace.csv",
                    ("run", "time", "actor", "kind", "partition", "consumer"), trace),
        write_table(out_dir / "sim_metrics.csv",
                    ("run", "iteration", "algorithm", "bins", "rscore"), metrics),
        write_table(out_dir / "timing_summary.csv",
                    ("event", "count", "mean", "median", "p90", "max", "mode_lo", "mode_hi"), summary),
    ]
    if _charts(args):
        from . import plotting
        outs.extend(plotting.plot_timings(outs[0], out_dir, args.bin_width))
    _finish(args, out_dir, [args.stream], outs)
    for row in summary:
        print(f"{row[0]} n={row[1]} mean={row[2]:.3f} median={row[3]:.3f} "
              f"mode=[{row[6]:g},{row[7]:g})")
    if violations:
        print(f"trace check failed: {violations} violations", file=sys.stderr)
        return EXIT_INVARIANT
    print("trace check passed")
    return EXIT_OK


def mode_bin(values, width: float) -> float:
    """Lower edge of the most populated ``[i*width, (i+1)*width)`` bin (lowest on ties)."""
    idx = np.floor(np.asarray(values, dtype=float) / width).astype(np.int64)
    uniq, counts = np.unique(idx, return_counts=True)
    return float(uniq[int(np.argmax(counts))] * width)


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default="out")
    common.add_argument("--format", choices=("csv", "csv+svg"), default="csv+svg")
    common.add_argument("--no-charts", action="store_true", help="write CSV only")

    p = argparse.ArgumentParser(prog="cgscale", description="Consumer-group autoscaling experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-stream", parents=[common], help="generate a synthetic speed stream")
    g.add_argument("--partitions", type=int, default=32)
    g.add_argument("--iterations", type=int, default=500)
    g.add_argument("--delta", type=float, default=5.0)
    g.add_argument("--capacity", type=float, default=1.0)
    g.add_argument("--init", choices=[m.value for m in InitMode], default="uniform")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_stream)

    k = sub.add_parser("pack", parents=[common], help="pack every iteration of a stream")
    k.add_argument("--stream", required=True)
    k.add_argument("--algorithm", default="mwf")
    k.add_argument("--adapted", action="store_true", help="use adapted forms of classic packers")
    k.set_defaults(func=cmd_pack)

    e = sub.add_parser("evaluate", parents=[common], help="compare packers over streams")
    e.add_argument("--stream", action="append", required=True, help="repeat for several deltas")
    e.add_argument("--algorithms", action="append", help="comma separated; default: comparison set")
    e.add_argument("--adapted", action="store_true")
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_evaluate)

    lt = sub.add_parser("latency", parents=[common], help="consumption latency experiment")
    lt.add_argument("--stream", required=True)
    lt.add_argument("--assigners", action="append",
                    help="packer names or kafka_N / kafka_A-B; comma separated")
    lt.add_argument("--consumer-capacity", type=float, default=1.2, help="in stream units")
    lt.add_argument("--iteration-secs", type=float, default=30.0)
    lt.add_argument("--rebalance-secs", type=float, default=5.0)
    lt.add_argument("--bytes-per-unit", type=float, default=1000.0)
    lt.add_argument("--stride", type=int, default=1, help="sample every n-th byte")
    lt.add_argument("--bin-width", type=float, default=1.0)
    lt.set_defaults(func=cmd_latency)

    s = sub.add_parser("simulate", parents=[common], help="discrete-event broker simulation")
    s.add_argument("--stream", required=True)
    s.add_argument("--packer", default="mwf")
    s.add_argument("--adapted", action="store_true")
    s.add_argument("--runs", type=int, default=1, help="seeds seed..seed+runs-1")
    s.add_argument("--consumer-capacity", type=float, default=2e6, help="bytes/s")
    s.add_argument("--batch-size", type=float, default=5e6, help="bytes")
    s.add_argument("--wait-time", type=float, default=1.0)
    s.add_argument("--interval", type=float, default=30.0, help="seconds between measurements")
    s.add_argument("--bytes-per-unit", type=float, default=None)
    s.add_argument("--saturated", action="store_true", help="consumers always find a full batch")
    s.add_argument("--reevaluate-secs", type=float, default=30.0, help="negative disables the timer")
    s.add_argument("--live-monitor", action="store_true")
    s.add_argument("--bin-width", type=float, default=0.5)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cgscale: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"cgscale: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantViolation, SimulationFault) as exc:
        print(f"cgscale: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
