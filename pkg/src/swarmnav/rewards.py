"""Per-agent, per-step reward shaping: arrival, collision, time, acceleration.

All four components are pure functions; the trainer decides when to evaluate
them. The collision penalty is shared by both members of a conflicting pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .simulation import WorldState


@dataclass(frozen=True)
class RewardConfig:
    eps_arr: float = 2.0        # arrival zone radius, m
    eps_cav: float = 3.0        # hard collision zone radius, m
    delta_cav: float = 10.0     # outer tolerance zone radius, m
    r_arr: float = 100.0        # one-off arrival bonus
    r_cav: float = -200.0       # full collision penalty, per pair
    r_tme_total: float = -10.0  # time penalty accumulated on an ideal flight
    w_arr: float = 1.0
    w_cav: float = 1.0
    w_tme: float = 1.0
    w_acc: float = 1.0

    def validate(self) -> None:
        if not (self.delta_cav > self.eps_cav > 0.0):
            raise ValueError("reward.delta_cav must exceed reward.eps_cav > 0")
        if self.eps_arr <= 0.0:
            raise ValueError("reward.eps_arr must be positive")
        if self.r_arr <= 0.0:
            raise ValueError("reward.r_arr must be positive")
        if self.r_cav >= 0.0:
            raise ValueError("reward.r_cav must be negative")
        for name in ("w_arr", "w_cav", "w_tme", "w_acc"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"reward.{name} must be non-negative")


@dataclass(frozen=True)
class StepReward:
    arrival: float
    collision: float
    time: float
    acceleration: float
    total: float

    @classmethod
    def combine(cls, cfg: RewardConfig, arrival, collision, time, acceleration):
        total = (
            cfg.w_arr * arrival
            + cfg.w_cav * collision
            + cfg.w_tme * time
            + cfg.w_acc * acceleration
        )
        return cls(arrival, collision, time, acceleration, total)


def arrival_reward(dist_to_dest: float, cfg: RewardConfig) -> float:
    """Full bonus inside the arrival zone, zero outside. Binary on purpose:
    the trainer grants it once, on the step the agent first enters the zone."""
    return cfg.r_arr if dist_to_dest <= cfg.eps_arr else 0.0


def collision_pair_reward(distance: float, cfg: RewardConfig) -> float:
    """Penalty contributed by a single neighbor at the given distance.

    Full penalty inside the hard zone, linear ramp to zero across the
    tolerance annulus, zero beyond it.
    """
    if distance <= cfg.eps_cav:
        return cfg.r_cav
    if distance <= cfg.delta_cav:
        return cfg.r_cav * (cfg.delta_cav - distance) / (cfg.delta_cav - cfg.eps_cav)
    return 0.0


def collision_reward(ego_index: int, world: WorldState, cfg: RewardConfig) -> float:
    """Sum of pairwise penalties between the ego and every other non-arrived
    agent."""
    ego = world.agents[ego_index]
    total = 0.0
    for k, other in enumerate(world.agents):
        if k == ego_index or other.arrived:
            continue
        d = math.hypot(other.position[0] - ego.position[0],
                       other.position[1] - ego.position[1])
        total += collision_pair_reward(d, cfg)
    return total


def time_reward(start_to_dest_dist: float, cfg: RewardConfig, dt: float, v_max: float) -> float:
    """Per-step time penalty, normalized by route length so that a straight
    flight at full speed accumulates exactly `r_tme_total` regardless of how
    far the destination is."""
    if start_to_dest_dist <= 0.0:
        raise ValueError("degenerate scenario: start coincides with destination")
    return cfg.r_tme_total * (dt * v_max / start_to_dest_dist)


def acceleration_reward(prev_velocity, new_velocity, dt: float) -> float:
    """Negative magnitude of the velocity change over one step (the discrete
    form of integrating |acceleration| over the step)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return -math.hypot(float(new_velocity[0]) - float(prev_velocity[0]),
                       float(new_velocity[1]) - float(prev_velocity[1]))
