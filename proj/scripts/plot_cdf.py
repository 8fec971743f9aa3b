#!/usr/bin/env python3
"""Step plot of per-file location CDFs from `fsgtool analyze --metric cdf`."""
import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("--file", action="append", help="path to plot (repeatable; default all)")
    ap.add_argument("--disk-blocks", type=int, help="draw the uniform reference up to this block")
    ap.add_argument("-o", "--output", default="cdf.png")
    args = ap.parse_args()

    series = defaultdict(lambda: ([], []))
    with open(args.csv, newline="") as f:
        for row in csv.DictReader(f):
            if args.file and row["path"] not in args.file:
                continue
            xs, ys = series[row["path"]]
            xs.append(int(row["location"]))
            ys.append(float(row["cumulative"]))

    fig, ax = plt.subplots(figsize=(8, 5))
    for path, (xs, ys) in series.items():
        ax.step([0] + xs, [0.0] + ys, where="post", label=path)
    if args.disk_blocks:
        ax.plot([0, args.disk_blocks], [0, 1], "k--", linewidth=0.8, label="uniform")
    ax.set_xlabel("block location")
    ax.set_ylabel("cumulative probability")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
