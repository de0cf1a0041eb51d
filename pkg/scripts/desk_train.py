#!/usr/bin/env python3
"""Desk-scale training run: up to three vehicles, 60 m x 60 m arena.

Writes metrics, checkpoints and a resolved config snapshot into the given
run directory. The same configuration backs the acceptance suite.
"""

import argparse
import sys
from dataclasses import replace

from swarmnav.config import desk_run_config
from swarmnav.ppo import train


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--iterations", type=int, default=None)
    parser.add_argument("--encoder", choices=["lstm", "occupancy"], default="lstm")
    parser.add_argument("--out-dir", default="runs/desk")
    args = parser.parse_args()

    cfg = desk_run_config(seed=args.seed)
    if args.iterations is not None:
        cfg = replace(cfg, ppo=replace(cfg.ppo, iterations=args.iterations))
    if args.encoder != "lstm":
        cfg = replace(cfg, arch=replace(cfg.arch, encoder=args.encoder))

    result = train(cfg, args.out_dir, log=print)
    print("aborted" if result.aborted else "done", result.run_dir)
    sys.exit(4 if result.aborted else 0)


if __name__ == "__main__":
    main()
