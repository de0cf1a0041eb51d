"""Planar geometry helpers shared by the simulator and the evaluation code.

Angle convention used throughout the package: bearings are measured
clockwise-positive from the reference direction and wrapped to (-pi, pi].
A target directly to the right of an agent heading along +x sits at
bearing +pi/2; directly to the left at -pi/2.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Wrap an angle (scalar or array) into the interval (-pi, pi]."""
    if isinstance(theta, (float, int)):
        return -((-theta + math.pi) % TWO_PI - math.pi)
    return -((-np.asarray(theta) + np.pi) % TWO_PI - np.pi)


def bearing_to(heading: float, vector) -> float:
    """Clockwise-positive angle from `heading` to the direction of `vector`.

    Returns the wrapped heading for a zero vector (atan2(0, 0) convention).
    """
    return wrap_angle(heading - math.atan2(vector[1], vector[0]))


def heading_of(velocity, fallback: float) -> float:
    """Direction of travel of a velocity vector; `fallback` when at rest."""
    vx, vy = float(velocity[0]), float(velocity[1])
    if vx == 0.0 and vy == 0.0:
        return fallback
    return math.atan2(vy, vx)


def body_to_world(action, heading: float) -> np.ndarray:
    """Rotate a body-frame (forward, right) vector into the world frame."""
    c, s = np.cos(heading), np.sin(heading)
    fwd, right = float(action[0]), float(action[1])
    return np.array([fwd * c + right * s, fwd * s - right * c])


def world_to_body(vector, heading: float) -> np.ndarray:
    """Express a world-frame vector in body (forward, right) coordinates."""
    c, s = np.cos(heading), np.sin(heading)
    vx, vy = float(vector[0]), float(vector[1])
    return np.array([vx * c + vy * s, vx * s - vy * c])


def commanded_turn(action_body) -> float:
    """Clockwise-positive angle between a body-frame action and the nose."""
    return float(np.arctan2(action_body[1], action_body[0]))


def rotate(points, angle: float):
    """Rotate 2-vectors (counterclockwise, standard math convention)."""
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return np.asarray(points) @ rot.T
