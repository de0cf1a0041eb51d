import numpy as np
import pytest

from swarmnav.networks import Architecture
from swarmnav.simulation import EgoObservation, ObservationTuple


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_arch():
    return Architecture(hidden_size=4, layer_sizes=(8, 8))


def random_observation(rng, n_neighbors, max_dist=60.0):
    neighbors = [
        ObservationTuple(
            distance=float(rng.uniform(0.1, max_dist)),
            bearing_to_other=float(rng.uniform(-np.pi, np.pi)),
            other_relative_heading=float(rng.uniform(-np.pi, np.pi)),
        )
        for _ in range(n_neighbors)
    ]
    return EgoObservation(neighbors, float(rng.uniform(-np.pi, np.pi)))
