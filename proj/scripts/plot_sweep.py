#!/usr/bin/env python3
"""Plot a sweep/ablation CSV emitted by the rsq CLI.

Usage: plot_sweep.py table.csv out.png [--log-x]
"""

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv_path")
    ap.add_argument("out_path")
    ap.add_argument("--log-x", action="store_true", help="logarithmic x axis (r_min sweeps)")
    args = ap.parse_args()

    with open(args.csv_path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        print("empty table", file=sys.stderr)
        return 1

    x_key = "value" if "value" in rows[0] else "config"
    xs = [row[x_key] for row in rows]
    ys = [float(row["perplexity_mean"]) for row in rows]
    errs = [float(row["perplexity_std"]) for row in rows]

    fig, ax = plt.subplots(figsize=(5, 3.2))
    if x_key == "value":
        xnum = [float(v) for v in xs]
        ax.errorbar(xnum, ys, yerr=errs, marker="o", capsize=3)
        if args.log_x:
            ax.set_xscale("log")
        ax.set_xlabel("swept value")
    else:
        ax.errorbar(range(len(xs)), ys, yerr=errs, marker="o", capsize=3)
        ax.set_xticks(range(len(xs)), xs, rotation=20)
        ax.set_xlabel("configuration")
    ax.set_ylabel("perplexity")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out_path, dpi=150)
    print(f"wrote {args.out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
