"""Randomized episode construction: agent counts, starts, destinations.

Agent counts follow a geometric distribution truncated by resampling, so
most training episodes stay small and cheap while larger encounters still
appear. Placement is rejection sampling under separation constraints.

Reproducibility: all draws come from a caller-supplied
`numpy.random.Generator`; `make_rng` builds one backed by PCG64, which is
the fixed, platform-independent generator for every scenario stream in this
package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .simulation import WorldState, make_agent


class PlacementError(RuntimeError):
    """Scenario constraints could not be satisfied within the retry budget."""


@dataclass(frozen=True)
class ScenarioConfig:
    p_geo: float = 1.0 / 3.0          # geometric success probability
    max_agents: int = 5
    arena: tuple[float, float] = (60.0, 60.0)
    min_separation: float = 8.0       # pairwise, starts and destinations, m
    min_route_length: float = 10.0    # start-to-destination, m
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.p_geo < 1.0:
            raise ValueError("scenario.p_geo must lie in (0, 1)")
        if self.max_agents < 1:
            raise ValueError("scenario.max_agents must be >= 1")
        if min(self.arena) <= 0.0:
            raise ValueError("scenario.arena sides must be positive")
        if self.min_route_length <= 0.0:
            raise ValueError("scenario.min_route_length must be positive")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def sample_agent_count(rng: np.random.Generator, cfg: ScenarioConfig) -> int:
    """Geometric draw on {1, 2, ...}, resampled until it fits `max_agents`.

    Resampling (rather than clamping) preserves the relative probabilities of
    the surviving counts.
    """
    for _ in range(100_000):
        n = int(rng.geometric(cfg.p_geo))
        if n <= cfg.max_agents:
            return n
    raise PlacementError("agent-count resampling budget exhausted")


def _sample_point(rng, arena) -> np.ndarray:
    return np.array([rng.uniform(0.0, arena[0]), rng.uniform(0.0, arena[1])])


def _place_separated(rng, arena, count, min_sep, tries) -> list[np.ndarray]:
    points: list[np.ndarray] = []
    for _ in range(tries):
        candidate = _sample_point(rng, arena)
        if all(np.linalg.norm(candidate - p) >= min_sep for p in points):
            points.append(candidate)
            if len(points) == count:
                return points
    raise PlacementError(
        f"could not place {count} points {min_sep} m apart in "
        f"{arena[0]} m x {arena[1]} m arena"
    )


def _place_scenario(rng, cfg: ScenarioConfig, n: int) -> WorldState:
    starts = _place_separated(rng, cfg.arena, n, cfg.min_separation,
                              tries=200 * n)
    destinations: list[np.ndarray] = []
    for k in range(n):
        placed = False
        for _ in range(400):
            candidate = _sample_point(rng, cfg.arena)
            if np.linalg.norm(candidate - starts[k]) < cfg.min_route_length:
                continue
            if any(np.linalg.norm(candidate - d) < cfg.min_separation
                   for d in destinations):
                continue
            destinations.append(candidate)
            placed = True
            break
        if not placed:
            raise PlacementError(
                f"could not place destination {k} with route >= "
                f"{cfg.min_route_length} m and separation >= "
                f"{cfg.min_separation} m"
            )
    agents = [make_agent(s, d) for s, d in zip(starts, destinations)]
    return WorldState(agents=agents, bounds=cfg.arena)


def generate_scenario(rng: np.random.Generator, cfg: ScenarioConfig) -> WorldState:
    """World with geometric agent count, separated starts and destinations,
    routes at least `min_route_length` long, agents at rest facing their
    destination."""
    last_error: PlacementError | None = None
    for _ in range(20):
        n = sample_agent_count(rng, cfg)
        try:
            return _place_scenario(rng, cfg, n)
        except PlacementError as err:
            last_error = err  # arena too full for this count; draw again
    raise last_error if last_error is not None else PlacementError("scenario generation failed")


def generate_fixed_count(rng: np.random.Generator, cfg: ScenarioConfig,
                         count: int) -> WorldState:
    """Scenario with an exact agent count (evaluation sweeps)."""
    return _place_scenario(rng, cfg, count)


def fixed_scenario(starts, destinations, arena=(60.0, 60.0)) -> WorldState:
    agents = [make_agent(s, d) for s, d in zip(starts, destinations)]
    return WorldState(agents=agents, bounds=tuple(arena))


def scenario_to_json(world: WorldState, seed: int | None = None) -> str:
    payload = {
        "arena": list(world.bounds),
        "starts": [list(map(float, a.position)) for a in world.agents],
        "destinations": [list(map(float, a.destination)) for a in world.agents],
    }
    if seed is not None:
        payload["seed"] = seed
    return json.dumps(payload, indent=2)


def scenario_from_json(text: str) -> WorldState:
    payload = json.loads(text)
    return fixed_scenario(payload["starts"], payload["destinations"],
                          arena=payload.get("arena", (60.0, 60.0)))


def save_scenario(path, world: WorldState, seed: int | None = None) -> None:
    Path(path).write_text(scenario_to_json(world, seed))


def load_scenario(path) -> WorldState:
    return scenario_from_json(Path(path).read_text())
