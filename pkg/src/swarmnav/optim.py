"""Adam with bias correction, operating on flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .networks import NumericsError


@dataclass
class AdamState:
    m: np.ndarray  # first-moment running average
    v: np.ndarray  # second-moment running average
    step: int = 0

    @classmethod
    def zeros(cls, n_params: int) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), 0)


def adam_update(theta: np.ndarray, grad: np.ndarray, state: AdamState, *,
                lr: float, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8) -> tuple[np.ndarray, AdamState]:
    """One Adam step. Returns the updated parameters and the new moment state.

    Moments persist across calls through `state`; the bias correction uses
    the incremented step count.
    """
    if theta.shape != grad.shape:
        raise ValueError(f"shape mismatch: theta {theta.shape}, grad {grad.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericsError("non-finite gradient passed to the optimizer")
    step = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    theta_new = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return theta_new, AdamState(m, v, step)
