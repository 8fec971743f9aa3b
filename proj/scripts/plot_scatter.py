#!/usr/bin/env python3
"""Scatter of first-block locations coloured by top-level directory.

Input is the CSV written by `fsgtool scatter`.
"""
import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

COLOURS = {
    "boot": "tab:red",
    "etc": "tab:orange",
    "lib": "tab:green",
    "root": "tab:purple",
    "usr": "tab:blue",
    "var": "tab:brown",
    "other": "tab:gray",
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("-o", "--output", default="scatter.png")
    args = ap.parse_args()

    points = {}
    with open(args.csv, newline="") as f:
        for row in csv.DictReader(f):
            xs, ys = points.setdefault(row["top_dir"], ([], []))
            xs.append(int(row["file_index"]))
            ys.append(int(row["first_block"]))

    fig, ax = plt.subplots(figsize=(9, 5))
    for top, (xs, ys) in sorted(points.items()):
        ax.scatter(xs, ys, s=4, label=top, color=COLOURS.get(top, "black"))
    ax.set_xlabel("file index")
    ax.set_ylabel("first block")
    ax.legend(markerscale=3)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
