"""Static SVG charts rendered from the CSV tables the CLI writes.

Every function reads CSV files only, so a chart can be regenerated from the
tables alone.  Output is byte-stable: fixed hash salt, no date metadata and
text kept as SVG text elements.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .io import read_table  # noqa: E402

STYLE = {
    "svg.hashsalt": "cgscale",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _delta_label(d: str) -> str:
    return f"delta={float(d):g}"


def plot_cbs(summary_csv: Path, out: Path) -> Path:
    """Grouped bars: CBS per algorithm, one group per delta."""
    rows = read_table(summary_csv)
    deltas = sorted({r["delta"] for r in rows}, key=float)
    algos = list(dict.fromkeys(r["algorithm"] for r in rows))
    value = {(r["delta"], r["algorithm"]): float(r["cbs"]) for r in rows}
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(algos) * len(deltas) / 2), 3.5))
        width = 0.8 / max(len(algos), 1)
        for i, a in enumerate(algos):
            xs = [g + i * width for g in range(len(deltas))]
            ax.bar(xs, [100 * value.get((d, a), 0.0) for d in deltas], width, label=a)
        ax.set_xticks([g + 0.4 - width / 2 for g in range(len(deltas))])
        ax.set_xticklabels([_delta_label(d) for d in deltas])
        ax.set_ylabel("CBS (% above per-iteration minimum)")
        ax.legend(ncol=4, fontsize=7)
        fig.tight_layout()
        return _save(fig, out)


def plot_rscore(summary_csv: Path, out: Path) -> Path:
    """Average Rscore against delta, one line per algorithm."""
    rows = read_table(summary_csv)
    series = defaultdict(list)
    for r in rows:
        series[r["algorithm"]].append((float(r["delta"]), float(r["avg_rscore"])))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for a, pts in series.items():
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=a)
        ax.set_xlabel("delta")
        ax.set_ylabel("average Rscore")
        ax.legend(ncol=4, fontsize=7)
        fig.tight_layout()
        return _save(fig, out)


def plot_pareto(summary_csv: Path, pareto_csv: Path, delta: str, out: Path) -> Path:
    """CBS vs average Rscore for one delta, front members highlighted."""
    rows = [r for r in read_table(summary_csv) if float(r["delta"]) == float(delta)]
    front = [r for r in read_table(pareto_csv) if float(r["delta"]) == float(delta)]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.scatter([100 * float(r["cbs"]) for r in rows], [float(r["avg_rscore"]) for r in rows],
                   color="tab:gray", label="dominated")
        for r in rows:
            ax.annotate(r["algorithm"], (100 * float(r["cbs"]), float(r["avg_rscore"])),
                        fontsize=7, xytext=(3, 3), textcoords="offset points")
        fx = [100 * float(r["cbs"]) for r in front]
        fy = [float(r["avg_rscore"]) for r in front]
        ax.plot(fx, fy, color="tab:red", marker="o", label="pareto front")
        ax.set_xlabel("CBS (%)")
        ax.set_ylabel("average Rscore")
        ax.set_title(_delta_label(delta))
        ax.legend(fontsize=7)
        fig.tight_layout()
        return _save(fig, out)


def plot_latency_hist(hist_csv: Path, out: Path) -> Path:
    rows = read_table(hist_csv)
    by_algo = defaultdict(list)
    for r in rows:
        by_algo[r["algorithm"]].append((float(r["bin_lo"]), float(r["bin_hi"]), int(r["count"])))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for a, bins in by_algo.items():
            edges = [b[0] for b in bins] + [bins[-1][1]] if bins else []
            if bins:
                ax.stairs([b[2] for b in bins], edges, label=a)
        ax.set_yscale("symlog")
        ax.set_xlabel("latency (s)")
        ax.set_ylabel("positive samples")
        ax.legend(ncol=3, fontsize=7)
        fig.tight_layout()
        return _save(fig, out)


def plot_latency_box(box_csv: Path, out: Path) -> Path:
    rows = read_table(box_csv)
    stats = [
        dict(label=r["algorithm"], whislo=float(r["whislo"]), q1=float(r["q1"]),
             med=float(r["med"]), q3=float(r["q3"]), whishi=float(r["whishi"]), fliers=[])
        for r in rows
    ]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(stats)), 3.5))
        if stats:
            ax.bxp(stats, showfliers=False)
        ax.set_yscale("symlog")
        ax.set_ylabel("latency (s)")
        ax.tick_params(axis="x", labelrotation=90, labelsize=7)
        fig.tight_layout()
        return _save(fig, out)


def plot_timings(timing_csv: Path, out_dir: Path, bin_width: float = 0.5) -> list[Path]:
    """One histogram per response-time phase present in the timing table."""
    rows = read_table(timing_csv)
    by_event = defaultdict(list)
    for r in rows:
        by_event[r["event"]].append(float(r["duration"]))
    written = []
    for event in sorted(by_event):
        values = by_event[event]
        n_bins = int(max(values) / bin_width) + 1
        # very long tails (creation delays) fall back to a fixed bin count
        bins = [i * bin_width for i in range(n_bins + 1)] if n_bins <= 200 else 50
        with plt.rc_context(STYLE):
            fig, ax = plt.subplots(figsize=(5, 3.2))
            ax.hist(values, bins=bins, color="tab:blue")
            ax.set_xlabel(f"{event} (s)")
            ax.set_ylabel("count")
            fig.tight_layout()
            written.append(_save(fig, Path(out_dir) / f"{event}_hist.svg"))
    return written
