"""2D point-mass multi-agent world: propagation, observations, episode lifecycle.

Vehicles are kinematic point masses whose velocity tracks the commanded
velocity exactly; positions integrate with explicit Euler steps. Agents that
reach the arrival zone around their destination stop moving and disappear
from every other agent's observations and from collision accounting.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .geometry import bearing_to, heading_of, wrap_angle


class ContractViolation(ValueError):
    """An operation was invoked outside its stated preconditions."""


@dataclass(frozen=True)
class SimParams:
    """Physical stepping parameters of the world."""

    dt: float = 0.1          # Euler step, seconds
    v_max: float = 2.0       # commanded-speed ceiling, m/s
    eps_arr: float = 2.0     # arrival zone radius, meters
    max_steps: int = 600


@dataclass
class AgentState:
    position: np.ndarray     # meters
    velocity: np.ndarray     # m/s
    heading: float           # radians in (-pi, pi]
    destination: np.ndarray  # meters
    arrived: bool = False

    def dist_to_destination(self) -> float:
        return math.hypot(self.destination[0] - self.position[0],
                          self.destination[1] - self.position[1])


def make_agent(start, destination) -> AgentState:
    """Agent at rest at `start`, nose pointing at its destination."""
    start = np.asarray(start, dtype=float)
    destination = np.asarray(destination, dtype=float)
    heading = heading_of(destination - start, fallback=0.0)
    return AgentState(
        position=start.copy(),
        velocity=np.zeros(2),
        heading=heading,
        destination=destination.copy(),
    )


@dataclass
class WorldState:
    agents: list[AgentState]
    step_count: int = 0
    dt: float = 0.1
    bounds: tuple[float, float] = (60.0, 60.0)  # spawn region only, no walls

    @property
    def time(self) -> float:
        return self.step_count * self.dt

    def active_indices(self) -> list[int]:
        return [k for k, a in enumerate(self.agents) if not a.arrived]


class ObservationTuple(NamedTuple):
    """What one agent knows about one other agent."""

    distance: float                # meters, >= 0
    bearing_to_other: float        # clockwise from own nose, (-pi, pi]
    other_relative_heading: float  # other's nose vs. line of sight back, (-pi, pi]


@dataclass
class EgoObservation:
    neighbors: list[ObservationTuple]
    bearing_to_destination: float


class DoneReason(Enum):
    ALL_ARRIVED = "all_arrived"
    TIMEOUT = "timeout"


def step(world: WorldState, actions, params: SimParams) -> WorldState:
    """Advance the world one Euler step under per-agent commanded velocities.

    Commands faster than `params.v_max` are rescaled to that speed. Arrived
    agents ignore their command and stay frozen. The arrival flag latches as
    soon as an agent's position enters the arrival zone.
    """
    if len(actions) != len(world.agents):
        raise ContractViolation(
            f"expected {len(world.agents)} actions, got {len(actions)}"
        )
    new_agents = []
    for agent, action in zip(world.agents, actions):
        if agent.arrived:
            new_agents.append(agent)
            continue
        a = np.asarray(action, dtype=float)
        if a.shape != (2,) or not (math.isfinite(a[0]) and math.isfinite(a[1])):
            raise ContractViolation(f"bad action {action!r}")
        speed = math.hypot(a[0], a[1])
        if speed > params.v_max:
            a = a * (params.v_max / speed)
        position = agent.position + a * params.dt
        heading = heading_of(a, fallback=agent.heading)
        arrived = math.hypot(agent.destination[0] - position[0],
                             agent.destination[1] - position[1]) <= params.eps_arr
        new_agents.append(
            AgentState(
                position=position,
                velocity=np.zeros(2) if arrived else a,
                heading=heading,
                destination=agent.destination,
                arrived=arrived,
            )
        )
    return WorldState(
        agents=new_agents,
        step_count=world.step_count + 1,
        dt=params.dt,
        bounds=world.bounds,
    )


def observe(world: WorldState, ego_index: int) -> EgoObservation:
    """Relative view of the world from one non-arrived agent.

    Each other non-arrived agent contributes a (distance, bearing,
    relative-heading) tuple; the destination contributes a bearing. All
    angles are clockwise-positive from the observer's nose.
    """
    if not 0 <= ego_index < len(world.agents):
        raise ContractViolation(f"ego index {ego_index} out of range")
    ego = world.agents[ego_index]
    if ego.arrived:
        raise ContractViolation(f"agent {ego_index} has arrived, nothing to observe")

    neighbors = []
    for k, other in enumerate(world.agents):
        if k == ego_index or other.arrived:
            continue
        offset = other.position - ego.position
        neighbors.append(
            ObservationTuple(
                distance=math.hypot(offset[0], offset[1]),
                bearing_to_other=bearing_to(ego.heading, offset),
                other_relative_heading=bearing_to(other.heading, -offset),
            )
        )
    return EgoObservation(
        neighbors=neighbors,
        bearing_to_destination=bearing_to(ego.heading, ego.destination - ego.position),
    )


def episode_done(world: WorldState, max_steps: int) -> tuple[bool, DoneReason | None]:
    if all(a.arrived for a in world.agents):
        return True, DoneReason.ALL_ARRIVED
    if world.step_count >= max_steps:
        return True, DoneReason.TIMEOUT
    return False, None


TRACK_COLUMNS = [
    "episode", "step", "time_s", "agent_id", "x_m", "y_m", "vx", "vy", "arrived",
]


def track_rows(world: WorldState, episode: int) -> list[list]:
    """One ground-track CSV row per agent for the current step."""
    rows = []
    for k, a in enumerate(world.agents):
        rows.append(
            [
                episode,
                world.step_count,
                round(world.time, 9),
                k,
                a.position[0],
                a.position[1],
                a.velocity[0],
                a.velocity[1],
                int(a.arrived),
            ]
        )
    return rows


def write_tracks(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_COLUMNS)
        writer.writerows(rows)


def rotated_world(world: WorldState, angle: float) -> WorldState:
    """World with every position, velocity and destination rotated about the
    origin (observation-invariance probes)."""
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    agents = [
        AgentState(
            position=rot @ a.position,
            velocity=rot @ a.velocity,
            heading=float(wrap_angle(a.heading + angle)),
            destination=rot @ a.destination,
            arrived=a.arrived,
        )
        for a in world.agents
    ]
    return WorldState(agents, world.step_count, world.dt, world.bounds)


def translated_world(world: WorldState, offset) -> WorldState:
    offset = np.asarray(offset, dtype=float)
    agents = [
        AgentState(
            position=a.position + offset,
            velocity=a.velocity.copy(),
            heading=a.heading,
            destination=a.destination + offset,
            arrived=a.arrived,
        )
        for a in world.agents
    ]
    return WorldState(agents, world.step_count, world.dt, world.bounds)
