"""Observation-facing policy and value wrappers.

This layer turns raw observations into network inputs (neighbor ordering and
normalization), dispatches between the recurrent and the occupancy encoder,
and handles the Gaussian action distribution. Network math lives in
`networks`; nothing here owns trainable state beyond the parameter
containers themselves.

Neighbor ordering: the encoder consumes neighbors sorted by distance,
farthest first, so the nearest one is encoded last and attenuated least.
The ordering is fixed; training and evaluation must agree on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import occupancy
from .networks import (
    ENCODER_LSTM,
    ForwardTape,
    PolicyParams,
    ValueParams,
    network_backward,
    network_forward,
    zeros_like_policy,
    zeros_like_value,
)
from .simulation import EgoObservation

LOG_2PI = math.log(2.0 * math.pi)


def neighbor_sequence(obs: EgoObservation, arch) -> np.ndarray:
    """Normalized (T, 3) encoder input, farthest neighbor first.

    Distances are scaled by `arch.d_norm` and saturate at `arch.d_clip` so
    far-away traffic in oversized arenas cannot push the gates outside the
    regime seen in training; angles are scaled by pi.
    """
    ordered = sorted(obs.neighbors, key=lambda t: t.distance, reverse=True)
    seq = np.empty((len(ordered), 3))
    for t, nb in enumerate(ordered):
        seq[t, 0] = min(nb.distance / arch.d_norm, arch.d_clip)
        seq[t, 1] = nb.bearing_to_other / np.pi
        seq[t, 2] = nb.other_relative_heading / np.pi
    return seq


def destination_input(obs: EgoObservation) -> float:
    return obs.bearing_to_destination / np.pi


@dataclass
class BatchTape:
    """Forward records for one update minibatch, grouped by sequence length."""

    buckets: list[tuple[np.ndarray, ForwardTape]]  # (original indices, tape)
    out: np.ndarray  # (B, out_dim) reassembled in input order


def forward_obs_batch(params, obs_list: list[EgoObservation],
                      input_cache: dict | None = None) -> BatchTape:
    """Evaluate a policy or value network over a batch of observations.

    Recurrent inputs are bucketed by neighbor count so each bucket runs as
    one batched recurrence; the occupancy path is a single fixed-width batch.
    `input_cache` (keyed by observation identity) skips re-encoding when the
    same observations are visited across several update epochs.
    """
    arch = params.arch
    psi = np.array([destination_input(o) for o in obs_list])
    out_dim = params.mlp.biases[-1].size
    out = np.empty((len(obs_list), out_dim))
    buckets = []
    if arch.encoder == ENCODER_LSTM:
        by_len: dict[int, list[int]] = {}
        for idx, o in enumerate(obs_list):
            by_len.setdefault(len(o.neighbors), []).append(idx)
        for length in sorted(by_len):
            idxs = np.array(by_len[length], dtype=int)
            x_seq = np.empty((length, idxs.size, 3))
            for col, idx in enumerate(idxs):
                x_seq[:, col, :] = _encoder_input(obs_list[idx], arch, input_cache)
            tape = network_forward(x_seq, psi[idxs], params.lstm, params.mlp)
            out[idxs] = tape.out
            buckets.append((idxs, tape))
    else:
        grid = np.stack([_encoder_input(o, arch, input_cache) for o in obs_list])
        tape = network_forward(None, psi, None, params.mlp, encoded=grid)
        idxs = np.arange(len(obs_list))
        out[:] = tape.out
        buckets.append((idxs, tape))
    return BatchTape(buckets, out)


def _encoder_input(obs: EgoObservation, arch, cache: dict | None) -> np.ndarray:
    if cache is None:
        return (neighbor_sequence(obs, arch) if arch.encoder == ENCODER_LSTM
                else occupancy.grid_vector(obs.neighbors, arch))
    key = id(obs)
    hit = cache.get(key)
    if hit is None:
        hit = (neighbor_sequence(obs, arch) if arch.encoder == ENCODER_LSTM
               else occupancy.grid_vector(obs.neighbors, arch))
        cache[key] = hit
    return hit


def backward_obs_batch(params, batch_tape: BatchTape, dout: np.ndarray):
    """Parameter gradients for a batch forward pass; `dout` is (B, out_dim)."""
    grads = (zeros_like_policy(params) if isinstance(params, PolicyParams)
             else zeros_like_value(params))
    for idxs, tape in batch_tape.buckets:
        network_backward(tape, dout[idxs], params.lstm, params.mlp,
                         grads.lstm, grads.mlp)
    return grads


def policy_forward(obs: EgoObservation, params: PolicyParams):
    """Deterministic action mean (body frame: forward, right) plus the tape."""
    tape = forward_obs_batch(params, [obs])
    return tape.out[0], tape


def policy_backward(batch_tape: BatchTape, dmean, params: PolicyParams):
    dmean = np.atleast_2d(np.asarray(dmean, dtype=float))
    return backward_obs_batch(params, batch_tape, dmean)


def value_forward(obs: EgoObservation, params: ValueParams) -> float:
    tape = forward_obs_batch(params, [obs])
    return float(tape.out[0, 0])


def gaussian_log_prob(actions, means, log_std) -> np.ndarray:
    """Log density of a diagonal Gaussian, one scalar per row."""
    actions = np.atleast_2d(actions)
    means = np.atleast_2d(means)
    var = np.exp(2.0 * log_std)
    quad = ((actions - means) ** 2 / var).sum(axis=1)
    dim = actions.shape[1]
    return -0.5 * quad - float(np.sum(log_std)) - 0.5 * dim * LOG_2PI


def gaussian_entropy(log_std) -> float:
    return float(np.sum(log_std + 0.5 * (LOG_2PI + 1.0)))


class GaussianPolicy:
    """Commanded-velocity policy: network mean, learned diagonal spread."""

    def __init__(self, params: PolicyParams):
        self.params = params

    @property
    def arch(self):
        return self.params.arch

    def mean(self, obs: EgoObservation) -> np.ndarray:
        return forward_obs_batch(self.params, [obs]).out[0]

    def means(self, obs_list: list[EgoObservation]) -> np.ndarray:
        return forward_obs_batch(self.params, obs_list).out

    def act(self, obs_list: list[EgoObservation], rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sample body-frame actions for a batch of agents.

        Returns (actions, log_probs, means). Sampling happens before the
        simulator's speed ceiling; log-probabilities describe the raw sample.
        """
        means = self.means(obs_list)
        noise = rng.standard_normal(means.shape)
        actions = means + noise * np.exp(self.params.log_std)
        log_probs = gaussian_log_prob(actions, means, self.params.log_std)
        return actions, log_probs, means


class ValueFunction:
    """Critic wrapper. The network regresses returns in normalized units;
    `scale_mean`/`scale_std` (maintained by the trainer as running return
    statistics) map its raw output back to reward units."""

    def __init__(self, params: ValueParams, scale_mean: float = 0.0,
                 scale_std: float = 1.0):
        self.params = params
        self.scale_mean = scale_mean
        self.scale_std = scale_std

    def value(self, obs: EgoObservation) -> float:
        return float(value_forward(obs, self.params) * self.scale_std
                     + self.scale_mean)

    def values(self, obs_list: list[EgoObservation]) -> np.ndarray:
        if not obs_list:
            return np.zeros(0)
        raw = forward_obs_batch(self.params, obs_list).out[:, 0]
        return raw * self.scale_std + self.scale_mean

    def normalize_targets(self, returns, clip: float = 10.0) -> np.ndarray:
        """Returns mapped into the critic's output units, with far outliers
        clipped so single catastrophic trajectories cannot dominate the
        regression."""
        z = (np.asarray(returns, dtype=float) - self.scale_mean) / self.scale_std
        return np.clip(z, -clip, clip)

    def update_scale(self, returns, momentum: float = 0.9) -> None:
        mean = float(np.mean(returns))
        std = float(np.std(returns)) + 1e-6
        if self.scale_std == 1.0 and self.scale_mean == 0.0:
            self.scale_mean, self.scale_std = mean, std
        else:
            self.scale_mean = momentum * self.scale_mean + (1 - momentum) * mean
            self.scale_std = momentum * self.scale_std + (1 - momentum) * std
