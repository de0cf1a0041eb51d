#!/usr/bin/env python3
"""Plot ground tracks from a tracks.csv produced by the eval command.

    python scripts/plot_tracks.py runs/desk/eval/tracks.csv -o tracks.png
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv")
    parser.add_argument("-o", "--out", default=None)
    parser.add_argument("--episode", type=int, default=0)
    args = parser.parse_args()

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    tracks = defaultdict(list)
    with open(args.csv) as fh:
        for row in csv.DictReader(fh):
            if int(row["episode"]) != args.episode:
                continue
            tracks[int(row["agent_id"])].append((float(row["x_m"]), float(row["y_m"])))

    fig, ax = plt.subplots(figsize=(6, 6))
    for agent_id, points in sorted(tracks.items()):
        xs, ys = zip(*points)
        ax.plot(xs, ys, label=f"agent {agent_id}")
        ax.plot(xs[0], ys[0], "ko", markersize=4)
        ax.plot(xs[-1], ys[-1], "kx", markersize=6)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(fontsize=8)
    out = args.out or str(Path(args.csv).with_suffix(".png"))
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
