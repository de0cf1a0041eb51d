#!/usr/bin/env python3
"""Render a commanded-turn heatmap CSV (plus JSON sidecar) with matplotlib.

Dev convenience only; the package itself never imports matplotlib.

    python scripts/plot_heatmap.py runs/desk/eval/heatmap.csv -o heatmap.png
"""

import argparse
import json
from pathlib import Path

import numpy as np


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", help="heatmap matrix written by the heatmap command")
    parser.add_argument("-o", "--out", default=None)
    args = parser.parse_args()

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    grid = np.loadtxt(args.csv, delimiter=",")
    meta = json.loads(Path(args.csv).with_suffix(".json").read_text())
    xmin, xmax, ymin, ymax = meta["bounds"]
    clip = meta.get("color_scale_deg", 10.0)

    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(grid, origin="lower", extent=(xmin, xmax, ymin, ymax),
                   cmap="coolwarm", vmin=-clip, vmax=clip)
    for (x, y), heading in meta.get("fixed_agents", []):
        ax.plot(x, y, "k^", markersize=8)
        ax.annotate("", xy=(x + 3 * np.cos(heading), y + 3 * np.sin(heading)),
                    xytext=(x, y), arrowprops={"arrowstyle": "->"})
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.colorbar(im, ax=ax, label="commanded turn [deg]")
    out = args.out or str(Path(args.csv).with_suffix(".png"))
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
