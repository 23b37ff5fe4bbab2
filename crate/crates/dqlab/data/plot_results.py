#!/usr/bin/env python3
"""Plot a dqlab results.csv: one panel per observable, one line per lane.

Usage: python plot_results.py [results.csv] [output.png]
Defaults to results.csv next to this script and results.png beside it.
"""
import csv
import math
import os
import sys

LANES = [
    ("exact", "exact", {"color": "black", "lw": 1.5}),
    ("trotter_ideal", "ideal circuit", {"color": "tab:blue", "ls": "--", "lw": 1.0}),
    ("noisy_raw", "noisy raw", {"color": "tab:red", "marker": "o", "ms": 3, "ls": ""}),
    ("mitigated", "mitigated", {"color": "tab:green", "marker": "s", "ms": 3, "ls": ""}),
]


def load(path):
    series = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            series.setdefault(row["observable"], []).append(row)
    for rows in series.values():
        rows.sort(key=lambda r: float(r["t"]))
    return series


def column(rows, name):
    ts, vs, errs = [], [], []
    for r in rows:
        if r[name] == "":
            continue
        ts.append(float(r["t"]))
        vs.append(float(r[name]))
        errs.append(float(r["sigma"]) if r.get("sigma") else 0.0)
    return ts, vs, errs


def main():
    csv_path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "results.csv"
    )
    out_path = sys.argv[2] if len(sys.argv) > 2 else os.path.splitext(csv_path)[0] + ".png"

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series = load(csv_path)
    names = list(series)
    ncols = min(3, max(1, len(names)))
    nrows = math.ceil(len(names) / ncols)
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(4.2 * ncols, 3.0 * nrows), squeeze=False, sharex=True
    )

    for idx, name in enumerate(names):
        ax = axes[idx // ncols][idx % ncols]
        rows = series[name]
        for lane, label, style in LANES:
            ts, vs, errs = column(rows, lane)
            if not ts:
                continue
            if lane == "noisy_raw" and any(errs):
                ax.errorbar(ts, vs, yerr=errs, label=label, capsize=2, **style)
            else:
                ax.plot(ts, vs, label=label, **style)
        ax.set_title(name)
        ax.set_xlabel("t")
        ax.grid(alpha=0.3)
        if idx == 0:
            ax.legend(fontsize=8)
    for idx in range(len(names), nrows * ncols):
        axes[idx // ncols][idx % ncols].axis("off")

    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    print(f"wrote {out_path}")


if __name__ == "__main__":
    main()
