"""Command-line surface: train, eval, heatmap, flops, export.

Exit codes: 0 success, 2 configuration error, 3 checkpoint error, 4 numeric
abort during training. The default output root is `runs/`, overridable with
the SWARMNAV_RUNS environment variable or --out-dir.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checkpoints import CheckpointError, export_network, load_manifest, load_network
from .config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    default_output_root,
    load_config,
)
from .evaluate import (
    FOUR_AGENT_PRESET,
    HEAD_ON_PRESET,
    HeatmapSpec,
    aggregate_metrics,
    commanded_angle_map,
    run_ground_tracks,
    save_heatmap,
)
from .networks import Architecture, NumericsError, count_flops
from .policy import GaussianPolicy
from .ppo import train
from .scenarios import generate_fixed_count, load_scenario, make_rng
from .simulation import SimParams, write_tracks


def _build_run_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    overrides = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        overrides[key.strip()] = raw
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed,
                      scenario=replace(cfg.scenario, seed=args.seed))
    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, ppo=replace(cfg.ppo, workers=args.workers))
    return cfg.validate()


def cmd_train(args) -> int:
    cfg = _build_run_config(args)
    if args.out_dir:
        run_dir = Path(args.out_dir)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        run_dir = default_output_root() / f"train_{stamp}_seed{cfg.seed}"
    result = train(cfg, run_dir, resume=args.resume,
                   log=None if args.quiet else print)
    if result.aborted:
        print(f"training aborted: {result.abort_reason}", file=sys.stderr)
        if result.last_checkpoint is not None:
            print(f"last good checkpoint: {result.last_checkpoint}", file=sys.stderr)
        return 4
    print(f"run complete: {result.run_dir} "
          f"({result.iterations_run} iterations, {result.episodes_seen} episodes)")
    return 0


def _load_policy(checkpoint: str) -> GaussianPolicy:
    params = load_network(checkpoint)
    if not hasattr(params, "log_std"):
        raise CheckpointError(f"{checkpoint} holds a value network, expected a policy")
    return GaussianPolicy(params)


def cmd_eval(args) -> int:
    policy = _load_policy(args.checkpoint)
    sim = SimParams(max_steps=args.max_steps)
    zones = RunConfig().reward
    rng = make_rng(args.seed)
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent / "eval"

    if args.scenario:
        worlds = [load_scenario(args.scenario)]
    else:
        from .scenarios import ScenarioConfig

        scen = ScenarioConfig(arena=(args.arena[0], args.arena[1]),
                              max_agents=args.agents)
        worlds = [generate_fixed_count(rng, scen, args.agents)
                  for _ in range(args.episodes)]

    all_rows = []
    per_episode = []
    for episode, world in enumerate(worlds):
        rows, metrics = run_ground_tracks(
            policy, world, sim, zones,
            deterministic=not args.stochastic, rng=rng)
        for row in rows:
            row[0] = episode
        all_rows.extend(rows)
        per_episode.append(metrics)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_tracks(out_dir / "tracks.csv", all_rows)
    summary = aggregate_metrics(per_episode)
    (out_dir / "metrics.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return 0


def cmd_heatmap(args) -> int:
    policy = _load_policy(args.checkpoint)
    if args.preset == "head-on":
        spec = HEAD_ON_PRESET
    elif args.preset == "four-agent":
        spec = FOUR_AGENT_PRESET
    else:
        fixed = []
        for raw in args.fixed or []:
            x, y, heading = (float(v) for v in raw.split(","))
            fixed.append(((x, y), heading))
        if not fixed:
            raise ConfigError("heatmap needs --preset or at least one --fixed x,y,heading")
        spec = HeatmapSpec(fixed_agents=tuple(fixed))
    if args.bounds:
        spec = replace(spec, bounds=tuple(args.bounds))
    if args.resolution:
        spec = replace(spec, resolution=args.resolution)
    grid = commanded_angle_map(policy, spec)
    out = Path(args.out) if args.out else Path(args.checkpoint).parent / "heatmap"
    csv_path, json_path = save_heatmap(out, grid, spec)
    print(f"wrote {csv_path} and {json_path}")
    return 0


def cmd_flops(args) -> int:
    if args.checkpoint:
        arch = load_network(args.checkpoint).arch
    else:
        arch = Architecture(hidden_size=args.hidden,
                            layer_sizes=tuple(args.layers),
                            input_size=args.input_size,
                            action_dim=args.action_dim)
    print(count_flops(args.agents, arch))
    return 0


def cmd_export(args) -> int:
    out = Path(args.out) if args.out else Path(str(args.checkpoint) + ".f32")
    path = export_network(args.checkpoint, out)
    manifest = load_manifest(path)
    print(f"exported {path} ({manifest.get('dtype')}, encoder {manifest.get('encoder')})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmnav",
        description="Multi-agent path planning: training, evaluation, export.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run PPO training")
    p_train.add_argument("--config", help="key = value config file")
    p_train.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override one config field (repeatable)")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out-dir", help="run directory (default: timestamped)")
    p_train.add_argument("--resume", help="checkpoint directory to continue from")
    p_train.add_argument("--workers", type=int, default=None,
                         help="rollout processes (default 1, deterministic)")
    p_train.add_argument("--quiet", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="ground tracks and metrics for a checkpoint")
    p_eval.add_argument("--checkpoint", required=True, help="policy .net file")
    p_eval.add_argument("--scenario", help="scenario JSON to replay")
    p_eval.add_argument("--agents", type=int, default=3)
    p_eval.add_argument("--arena", type=float, nargs=2, default=(60.0, 60.0))
    p_eval.add_argument("--episodes", type=int, default=1)
    p_eval.add_argument("--max-steps", type=int, default=600)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--stochastic", action="store_true",
                        help="sample actions instead of using the mean")
    p_eval.add_argument("--out", help="output directory")
    p_eval.set_defaults(func=cmd_eval)

    p_heat = sub.add_parser("heatmap", help="commanded-turn map around fixed traffic")
    p_heat.add_argument("--checkpoint", required=True)
    p_heat.add_argument("--preset", choices=["head-on", "four-agent"])
    p_heat.add_argument("--fixed", action="append", metavar="X,Y,HEADING")
    p_heat.add_argument("--bounds", type=float, nargs=4,
                        metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p_heat.add_argument("--resolution", type=float)
    p_heat.add_argument("--out", help="output path prefix")
    p_heat.set_defaults(func=cmd_heatmap)

    p_flops = sub.add_parser("flops", help="evaluation cost for an agent count")
    p_flops.add_argument("--agents", type=int, required=True)
    p_flops.add_argument("--checkpoint", help="read the architecture from a checkpoint")
    p_flops.add_argument("--hidden", type=int, default=63)
    p_flops.add_argument("--layers", type=int, nargs="+", default=[64, 64])
    p_flops.add_argument("--input-size", type=int, default=3)
    p_flops.add_argument("--action-dim", type=int, default=2)
    p_flops.set_defaults(func=cmd_flops)

    p_export = sub.add_parser("export", help="single-precision weights for onboard use")
    p_export.add_argument("--checkpoint", required=True)
    p_export.add_argument("--out")
    p_export.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except CheckpointError as err:
        print(f"checkpoint error: {err}", file=sys.stderr)
        return 3
    except NumericsError as err:
        print(f"numeric abort: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
