"""Evaluation artifacts: commanded-angle maps, ground tracks, scalability.

The commanded-angle map sweeps the ego vehicle over a grid of positions
(nose along +x, destination far ahead so the destination bearing stays near
zero), evaluates the deterministic policy at each cell against a set of
frozen traffic agents, and records the commanded turn in degrees.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .geometry import body_to_world, commanded_turn
from .policy import GaussianPolicy
from .rewards import RewardConfig
from .scenarios import generate_fixed_count
from .simulation import (
    AgentState,
    SimParams,
    WorldState,
    episode_done,
    make_agent,
    observe,
    step,
    track_rows,
    write_tracks,
)


@dataclass(frozen=True)
class HeatmapSpec:
    fixed_agents: tuple[tuple[tuple[float, float], float], ...]  # ((x, y), heading)
    bounds: tuple[float, float, float, float] = (-30.0, 30.0, -30.0, 30.0)
    resolution: float = 0.5
    ego_heading: float = 0.0
    dest_distance: float = 1e4  # puts the destination bearing at ~0 everywhere
    clip_deg: float = 10.0      # color-scale metadata for exports

    def validate(self) -> None:
        xmin, xmax, ymin, ymax = self.bounds
        if self.resolution <= 0.0 or xmax <= xmin or ymax <= ymin:
            raise ValueError("degenerate heatmap grid")


HEAD_ON_PRESET = HeatmapSpec(fixed_agents=(((0.0, 0.0), np.pi),))

# one approaching and two receding agents stacked diagonally
FOUR_AGENT_PRESET = HeatmapSpec(
    fixed_agents=(
        ((-20.0, -20.0), 0.0),
        ((10.0, 10.0), np.pi),
        ((20.0, 20.0), np.pi),
    ),
    bounds=(-40.0, 40.0, -40.0, 40.0),
)


def _fixed_agent_states(spec: HeatmapSpec) -> list[AgentState]:
    agents = []
    for (x, y), heading in spec.fixed_agents:
        position = np.array([x, y], dtype=float)
        agents.append(
            AgentState(
                position=position,
                velocity=np.array([np.cos(heading), np.sin(heading)]),
                heading=float(heading),
                destination=position + 1e6,  # irrelevant, never stepped
            )
        )
    return agents


def grid_axes(spec: HeatmapSpec) -> tuple[np.ndarray, np.ndarray]:
    xmin, xmax, ymin, ymax = spec.bounds
    xs = np.arange(xmin + spec.resolution / 2.0, xmax, spec.resolution)
    ys = np.arange(ymin + spec.resolution / 2.0, ymax, spec.resolution)
    return xs, ys


def commanded_angle_map(policy: GaussianPolicy, spec: HeatmapSpec) -> np.ndarray:
    """Commanded turn, degrees in (-180, 180], at every grid cell.

    Returned grid is indexed [iy, ix] with both axes ascending.
    """
    spec.validate()
    xs, ys = grid_axes(spec)
    fixed = _fixed_agent_states(spec)
    grid = np.empty((ys.size, xs.size))
    dest_offset = spec.dest_distance * np.array(
        [np.cos(spec.ego_heading), np.sin(spec.ego_heading)])

    row_obs = []
    for iy, y in enumerate(ys):
        row_obs.clear()
        for x in xs:
            position = np.array([x, y])
            ego = AgentState(
                position=position,
                velocity=np.array([np.cos(spec.ego_heading), np.sin(spec.ego_heading)]),
                heading=spec.ego_heading,
                destination=position + dest_offset,
            )
            world = WorldState(agents=[ego] + list(fixed))
            row_obs.append(observe(world, 0))
        means = policy.means(row_obs)
        for ix in range(xs.size):
            grid[iy, ix] = np.degrees(commanded_turn(means[ix]))
    return grid


def save_heatmap(out_prefix, grid: np.ndarray, spec: HeatmapSpec) -> tuple[Path, Path]:
    """CSV matrix plus JSON sidecar describing the grid geometry."""
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out_prefix.with_suffix(".csv")
    np.savetxt(csv_path, grid, delimiter=",", fmt="%.6f")
    meta = {
        "bounds": list(spec.bounds),
        "resolution": spec.resolution,
        "ego_heading": spec.ego_heading,
        "fixed_agents": [[list(p), h] for p, h in spec.fixed_agents],
        "layout": "rows: y ascending, columns: x ascending, cell centers",
        "units": "degrees, clockwise-positive commanded turn",
        "color_scale_deg": spec.clip_deg,
    }
    json_path = out_prefix.with_suffix(".json")
    json_path.write_text(json.dumps(meta, indent=2))
    return csv_path, json_path


@dataclass
class EvalMetrics:
    arrival_rate: float
    collision_events: int    # distinct pairs that touched the hard zone
    delta_zone_steps: int    # (step, pair) entries into the tolerance zone
    mean_path_ratio: float   # (arc length + final gap) / straight distance
    mean_abs_dv: float       # m/s per step

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def run_ground_tracks(policy: GaussianPolicy, world: WorldState, sim: SimParams,
                      zones: RewardConfig, deterministic: bool = True,
                      rng=None) -> tuple[list[list], EvalMetrics]:
    """Simulate one scenario to completion under the policy.

    Returns the ground-track rows (one per agent per step, simulator CSV
    layout) and the aggregate metrics.
    """
    n = len(world.agents)
    straight = [a.dist_to_destination() for a in world.agents]
    path_len = np.zeros(n)
    collided_pairs: set[tuple[int, int]] = set()
    delta_zone_steps = 0
    sum_abs_dv = 0.0
    dv_count = 0
    rows = track_rows(world, episode=0)

    while True:
        done, _ = episode_done(world, sim.max_steps)
        if done:
            break
        active = world.active_indices()
        obs = [observe(world, i) for i in active]
        if deterministic:
            actions = policy.means(obs)
        else:
            actions, _, _ = policy.act(obs, rng)
        world_actions = [np.zeros(2)] * n
        for pos, i in enumerate(active):
            world_actions[i] = body_to_world(actions[pos], world.agents[i].heading)
        prev = world
        world = step(world, world_actions, sim)
        rows.extend(track_rows(world, episode=0))

        for pos, i in enumerate(active):
            moved = world.agents[i].position - prev.agents[i].position
            path_len[i] += float(np.linalg.norm(moved))
            dv = world.agents[i].velocity - prev.agents[i].velocity
            if not world.agents[i].arrived:
                sum_abs_dv += float(np.linalg.norm(dv))
                dv_count += 1
        act_now = world.active_indices()
        for a_pos, i in enumerate(act_now):
            for j in act_now[a_pos + 1:]:
                d = float(np.linalg.norm(world.agents[i].position - world.agents[j].position))
                if d <= zones.eps_cav:
                    collided_pairs.add((i, j))
                elif d <= zones.delta_cav:
                    delta_zone_steps += 1

    ratios = []
    for k, agent in enumerate(world.agents):
        if agent.arrived and straight[k] > 0.0:
            gap = agent.dist_to_destination()
            ratios.append((path_len[k] + gap) / straight[k])
    metrics = EvalMetrics(
        arrival_rate=sum(a.arrived for a in world.agents) / n,
        collision_events=len(collided_pairs),
        delta_zone_steps=delta_zone_steps,
        mean_path_ratio=float(np.mean(ratios)) if ratios else float("nan"),
        mean_abs_dv=sum_abs_dv / max(1, dv_count),
    )
    return rows, metrics


def save_eval(out_dir, rows, metrics: EvalMetrics) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tracks_path = out_dir / "tracks.csv"
    write_tracks(tracks_path, rows)
    metrics_path = out_dir / "metrics.json"
    metrics_path.write_text(metrics.to_json())
    return tracks_path, metrics_path


def aggregate_metrics(per_episode: list[EvalMetrics]) -> dict:
    ratios = [m.mean_path_ratio for m in per_episode if np.isfinite(m.mean_path_ratio)]
    return {
        "episodes": len(per_episode),
        "arrival_rate": float(np.mean([m.arrival_rate for m in per_episode])),
        "collision_free_fraction": float(
            np.mean([m.collision_events == 0 for m in per_episode])),
        "collision_events": int(sum(m.collision_events for m in per_episode)),
        "delta_zone_steps": int(sum(m.delta_zone_steps for m in per_episode)),
        "mean_path_ratio": float(np.mean(ratios)) if ratios else float("nan"),
        "mean_abs_dv": float(np.mean([m.mean_abs_dv for m in per_episode])),
    }


# ---------------------------------------------------------------------------
# scalability

def measure_policy_step_time(policy: GaussianPolicy, counts, repeats: int = 300,
                             rng=None) -> list[tuple[int, float]]:
    """Median wall time of one policy evaluation at each agent count.

    The ego sees `count - 1` synthetic neighbors; geometry is arbitrary but
    fixed, only the sequence length matters for cost.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    timings = []
    for count in counts:
        world = _ring_world(count, radius=20.0)
        obs = observe(world, 0)
        policy.mean(obs)  # warm up
        samples = []
        for _ in range(5):
            t0 = time.perf_counter()
            for _ in range(repeats):
                policy.mean(obs)
            samples.append((time.perf_counter() - t0) / repeats)
        timings.append((count, float(np.median(samples))))
    return timings


def _ring_world(count: int, radius: float) -> WorldState:
    agents = []
    for k in range(count):
        angle = 2.0 * np.pi * k / count
        start = radius * np.array([np.cos(angle), np.sin(angle)])
        agents.append(make_agent(start, -start))
    return WorldState(agents=agents)


def linear_fit_r2(xs, ys) -> tuple[float, float, float]:
    """Least-squares slope, intercept and coefficient of determination."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    residuals = ys - (slope * xs + intercept)
    ss_res = float(np.sum(residuals ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return float(slope), float(intercept), r2


def scalability_sweep(policy: GaussianPolicy, counts, arena_factors,
                      base_scenario_cfg, sim: SimParams, zones: RewardConfig,
                      rng, episodes_per_cell: int = 5) -> list[dict]:
    """Evaluate the policy across agent counts and arena sizes.

    Returns one record per (count, factor) cell with aggregate metrics and
    the measured per-evaluation policy time.
    """
    table = []
    for factor in arena_factors:
        arena = (base_scenario_cfg.arena[0] * factor,
                 base_scenario_cfg.arena[1] * factor)
        for count in counts:
            cfg = replace(base_scenario_cfg, arena=arena, max_agents=count)
            cell_metrics = []
            for _ in range(episodes_per_cell):
                world = generate_fixed_count(rng, cfg, count)
                _, metrics = run_ground_tracks(policy, world, sim, zones)
                cell_metrics.append(metrics)
            timing = measure_policy_step_time(policy, [count], repeats=100)[0][1]
            record = {"count": count, "arena_factor": factor,
                      "policy_step_seconds": timing}
            record.update(aggregate_metrics(cell_metrics))
            table.append(record)
    return table
