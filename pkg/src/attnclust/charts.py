"""Static vector-graphic charts for result tables.

Two kinds: an Avg.Ev. bar chart over the seven algorithms of one variation,
and a line chart of one metric for one algorithm across the fractions of a
single family. Every chart gets a CSV sidecar holding the exact numbers.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import ALGORITHMS, atomic_write_text  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "attnclust"

METRIC_FIELDS = ("homo", "comp", "v_measure", "ari", "ami", "silhouette",
                 "avg_ev")


class ChartError(Exception):
    pass


def _save(fig, out_path):
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _sidecar_path(out_path):
    root, _ = os.path.splitext(out_path)
    return root + ".csv"


def avg_ev_bar_chart(table, out_path):
    """One bar per algorithm showing Avg.Ev. for a single variation."""
    values = [report.avg_ev for _, report in table.rows]
    names = [name for name, _ in table.rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(names, values, color="#4878a8")
    ax.set_ylabel("Avg.Ev.")
    ax.set_title(f"Average evaluation per algorithm ({table.code})")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    _save(fig, out_path)
    lines = ["algorithm,avg_ev"]
    lines += [f"{name},{value!r}" for name, value in zip(names, values)]
    atomic_write_text(_sidecar_path(out_path), "\n".join(lines) + "\n")
    return out_path


def metric_line_chart(tables, metric, algorithm, out_path):
    """One metric for one algorithm across the fractions of one family."""
    if not tables:
        raise ChartError("no tables to chart")
    if metric not in METRIC_FIELDS:
        raise ChartError(f"unknown metric {metric!r}; "
                         f"choose from {METRIC_FIELDS}")
    if algorithm not in ALGORITHMS:
        raise ChartError(f"unknown algorithm {algorithm!r}")
    families = {t.family for t in tables}
    if len(families) != 1 or "PLAIN" in families:
        raise ChartError(f"metric_line needs tables from one AS/AP family, "
                         f"got {sorted(families)}")
    family = families.pop()
    points = sorted((t.fraction_tenths, t.report(algorithm)) for t in tables)
    xs = [frac for frac, _ in points]
    ys = [getattr(report, metric) for _, report in points]
    if any(y is None for y in ys):
        raise ChartError(f"{metric} is undefined for some fractions")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, marker="o", color="#a85048")
    ax.set_xlabel("training fraction (tenths)")
    ax.set_ylabel(metric)
    ax.set_xticks(xs)
    ax.set_title(f"{metric} of {algorithm} across {family} fractions")
    fig.tight_layout()
    _save(fig, out_path)
    lines = ["fraction_tenths,value"]
    lines += [f"{x},{y!r}" for x, y in zip(xs, ys)]
    atomic_write_text(_sidecar_path(out_path), "\n".join(lines) + "\n")
    return out_path


def emit_charts(tables, kind, out_path, metric="avg_ev", algorithm="k-means"):
    """Dispatch on chart kind; `tables` is a list of ResultTables."""
    if kind == "avg_ev_bars":
        if len(tables) != 1:
            raise ChartError("avg_ev_bars charts exactly one table")
        return avg_ev_bar_chart(tables[0], out_path)
    if kind == "metric_line":
        return metric_line_chart(tables, metric, algorithm, out_path)
    raise ChartError(f"unknown chart kind {kind!r}")
