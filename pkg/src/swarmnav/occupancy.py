"""Polar occupancy-map baseline encoder.

Neighbors are binned into an 8 x 25 (radial x angular) grid of binary flags;
the flattened grid replaces the recurrent encoding in the baseline policy.
Relative headings are discarded: the map carries positions only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .networks import Architecture, MlpParams, mlp_forward
from .simulation import ObservationTuple


@dataclass
class OccupancyGrid:
    bins: np.ndarray  # (radial, angular) of {0, 1}
    r_max: float      # sensing range, meters

    def flattened(self) -> np.ndarray:
        return self.bins.reshape(-1).astype(float)


def encode_occupancy(neighbors: list[ObservationTuple], r_max: float,
                     radial_bins: int = 8, angular_bins: int = 25) -> OccupancyGrid:
    """Mark the cell under each neighbor closer than the sensing range.

    Radial bin 0 starts at distance zero; angular bin 0 is anchored at a
    bearing of -pi, so a neighbor dead ahead lands in the middle angular bin.
    Occupancy is binary: several neighbors in one cell still mark it once.
    """
    if r_max <= 0.0:
        raise ValueError("r_max must be positive")
    bins = np.zeros((radial_bins, angular_bins), dtype=np.uint8)
    radial_width = r_max / radial_bins
    angular_width = 2.0 * np.pi / angular_bins
    for obs in neighbors:
        if obs.distance >= r_max:
            continue
        r_idx = int(obs.distance // radial_width)
        a_idx = min(int((obs.bearing_to_other + np.pi) // angular_width),
                    angular_bins - 1)
        bins[r_idx, a_idx] = 1
    return OccupancyGrid(bins, r_max)


def grid_vector(neighbors: list[ObservationTuple], arch: Architecture) -> np.ndarray:
    grid = encode_occupancy(neighbors, arch.occ_r_max,
                            arch.occ_radial_bins, arch.occ_angular_bins)
    return grid.flattened()


def baseline_policy_forward(grid: OccupancyGrid, psi_d: float, mlp: MlpParams):
    """Action mean of the occupancy baseline: flattened grid stacked with the
    destination bearing (normalized by pi), through the shared MLP shape."""
    inp = np.concatenate([grid.flattened(), [psi_d / np.pi]])[None, :]
    out, _ = mlp_forward(inp, mlp)
    return out[0]
