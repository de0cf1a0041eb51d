"""Recurrent encoder and fully connected heads with hand-written gradients.

The policy network digests a variable-length sequence of per-neighbor input
tuples through a single LSTM layer

    i_t = sigmoid(W_i x_t + U_i h_{t-1} + b_i)
    f_t = sigmoid(W_f x_t + U_f h_{t-1} + b_f)
    o_t = sigmoid(W_o x_t + U_o h_{t-1} + b_o)
    c_t = f_t * c_{t-1} + i_t * tanh(W_c x_t + U_c h_{t-1} + b_c)
    h_t = o_t * tanh(c_t)

starting from zero hidden and cell state, stacks the final hidden state with
the destination bearing, and maps the result through a tanh MLP to a linear
output head (a 2-vector commanded velocity in body coordinates for the
policy, a scalar for the value function).

Everything here is plain float64 numpy. Backward passes are exact
reverse-mode derivatives of the forward equations, including the recurrence
through the whole neighbor sequence; they are checked against central finite
differences in the test suite. All functions operate on leading batch axes
internally; sequences within one batch must share their length (callers
bucket by length).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class NumericsError(RuntimeError):
    """A forward/backward pass or an update produced non-finite values."""


ENCODER_LSTM = "lstm"
ENCODER_OCCUPANCY = "occupancy"


@dataclass(frozen=True)
class Architecture:
    """Network shape and input scaling, shared by policy and value nets."""

    hidden_size: int = 63
    input_size: int = 3
    layer_sizes: tuple[int, ...] = (64, 64)
    action_dim: int = 2
    d_norm: float = 30.0   # meters mapped to 1.0 at the encoder input
    d_clip: float = 3.0    # normalized distances saturate here
    encoder: str = ENCODER_LSTM
    occ_radial_bins: int = 8
    occ_angular_bins: int = 25
    occ_r_max: float = 30.0

    @property
    def encoded_size(self) -> int:
        if self.encoder == ENCODER_LSTM:
            return self.hidden_size
        return self.occ_radial_bins * self.occ_angular_bins

    @property
    def mlp_input_size(self) -> int:
        # encoder output stacked with the destination bearing
        return self.encoded_size + 1

    def validate(self) -> None:
        if self.encoder not in (ENCODER_LSTM, ENCODER_OCCUPANCY):
            raise ValueError(f"arch.encoder: unknown encoder {self.encoder!r}")
        if self.hidden_size < 1 or self.input_size < 1:
            raise ValueError("arch.hidden_size and arch.input_size must be >= 1")
        if self.d_norm <= 0.0:
            raise ValueError("arch.d_norm must be positive")


@dataclass
class LstmParams:
    W_i: np.ndarray
    U_i: np.ndarray
    b_i: np.ndarray
    W_f: np.ndarray
    U_f: np.ndarray
    b_f: np.ndarray
    W_o: np.ndarray
    U_o: np.ndarray
    b_o: np.ndarray
    W_c: np.ndarray
    U_c: np.ndarray
    b_c: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.b_i.size


@dataclass
class MlpParams:
    weights: list[np.ndarray]  # layer k: (out_k, in_k)
    biases: list[np.ndarray]


@dataclass
class PolicyParams:
    arch: Architecture
    lstm: LstmParams | None  # None for the occupancy encoder
    mlp: MlpParams
    log_std: np.ndarray      # per-axis action spread, learned


@dataclass
class ValueParams:
    arch: Architecture
    lstm: LstmParams | None
    mlp: MlpParams


# ---------------------------------------------------------------------------
# initialization

def _uniform(rng, shape, fan_in):
    k = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-k, k, size=shape)


def init_lstm_params(n: int, m: int, rng) -> LstmParams:
    # forget-gate bias starts at +1 so early training does not wipe the cell
    mats = {}
    for gate in ("i", "f", "o", "c"):
        mats[f"W_{gate}"] = _uniform(rng, (n, m), m)
        mats[f"U_{gate}"] = _uniform(rng, (n, n), n)
        mats[f"b_{gate}"] = np.ones(n) if gate == "f" else np.zeros(n)
    return LstmParams(**mats)


def init_mlp_params(sizes, rng, out_bias=None) -> MlpParams:
    """`sizes` runs input width -> hidden widths -> output width."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(_uniform(rng, (fan_out, fan_in), fan_in))
        biases.append(np.zeros(fan_out))
    if out_bias is not None:
        biases[-1] = np.asarray(out_bias, dtype=float).copy()
    return MlpParams(weights, biases)


def init_policy_params(arch: Architecture, rng, forward_speed_bias: float = 1.0,
                       steer_gain: float = 2.0) -> PolicyParams:
    """Fresh policy parameters, initialized as a proportional-navigation
    cruiser.

    The output bias starts at (forward_speed_bias, 0) and one hidden unit per
    layer is dedicated to passing the destination bearing through to the
    lateral output with gain `steer_gain`. An untrained policy therefore
    flies toward its destination instead of diffusing; with a blank slate the
    arrival bonus is effectively unreachable (the heading performs a random
    walk under action noise) and training never receives an arrival signal.
    """
    lstm = None
    if arch.encoder == ENCODER_LSTM:
        lstm = init_lstm_params(arch.hidden_size, arch.input_size, rng)
    sizes = (arch.mlp_input_size, *arch.layer_sizes, arch.action_dim)
    out_bias = np.zeros(arch.action_dim)
    out_bias[0] = forward_speed_bias
    mlp = init_mlp_params(sizes, rng, out_bias=out_bias)
    if steer_gain != 0.0 and arch.action_dim >= 2:
        # steer channel: unit 0 of each hidden layer carries the (normalized)
        # destination bearing; small first-stage scale keeps tanh near-linear
        mlp.weights[0][0, :] = 0.0
        mlp.weights[0][0, -1] = 0.5
        for layer in range(1, len(mlp.weights) - 1):
            mlp.weights[layer][0, :] = 0.0
            mlp.weights[layer][0, 0] = 1.0
        mlp.weights[-1][1, 0] += steer_gain
    log_std = np.full(arch.action_dim, math.log(0.5))
    return PolicyParams(arch, lstm, mlp, log_std)


def init_value_params(arch: Architecture, rng) -> ValueParams:
    lstm = None
    if arch.encoder == ENCODER_LSTM:
        lstm = init_lstm_params(arch.hidden_size, arch.input_size, rng)
    sizes = (arch.mlp_input_size, *arch.layer_sizes, 1)
    return ValueParams(arch, lstm, init_mlp_params(sizes, rng))


# ---------------------------------------------------------------------------
# forward

def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class LstmStepTape:
    """Everything the backward pass needs about one recurrence step."""

    x: np.ndarray       # (B, m)
    h_prev: np.ndarray  # (B, n)
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray       # tanh of the cell candidate
    c: np.ndarray
    tc: np.ndarray      # tanh(c)
    h: np.ndarray


@dataclass
class ForwardTape:
    steps: list          # LstmStepTape per sequence element (empty: no neighbors)
    encoded: np.ndarray  # (B, encoded_size) encoder output fed to the MLP
    mlp_acts: list       # MLP layer inputs: [stacked input, hidden activations...]
    out: np.ndarray      # (B, out_dim)

    def __len__(self) -> int:
        return len(self.steps)


def _raise_bad_gate(x, h_prev, params: LstmParams):
    named = {
        "input": x @ params.W_i.T + h_prev @ params.U_i.T + params.b_i,
        "forget": x @ params.W_f.T + h_prev @ params.U_f.T + params.b_f,
        "output": x @ params.W_o.T + h_prev @ params.U_o.T + params.b_o,
        "cell": x @ params.W_c.T + h_prev @ params.U_c.T + params.b_c,
    }
    for name, pre in named.items():
        if not np.all(np.isfinite(pre)):
            raise NumericsError(f"non-finite pre-activation in LSTM {name} gate")
    raise NumericsError("non-finite LSTM state")


def lstm_step(x, h_prev, c_prev, params: LstmParams):
    """One recurrence step. Accepts (m,)/(n,) vectors or (B, ...) batches."""
    single = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    h_prev = np.atleast_2d(np.asarray(h_prev, dtype=float))
    c_prev = np.atleast_2d(np.asarray(c_prev, dtype=float))

    pre_i = x @ params.W_i.T + h_prev @ params.U_i.T + params.b_i
    pre_f = x @ params.W_f.T + h_prev @ params.U_f.T + params.b_f
    pre_o = x @ params.W_o.T + h_prev @ params.U_o.T + params.b_o
    pre_g = x @ params.W_c.T + h_prev @ params.U_c.T + params.b_c
    # one check covers all gates: any non-finite term forces a non-finite sum
    if not np.all(np.isfinite(pre_i + pre_f + pre_o + pre_g)):
        _raise_bad_gate(x, h_prev, params)  # slow path names the culprit
    i = sigmoid(pre_i)
    f = sigmoid(pre_f)
    o = sigmoid(pre_o)
    g = np.tanh(pre_g)
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    tape = LstmStepTape(x, h_prev, c_prev, i, f, o, g, c, tc, h)
    if single:
        return h[0], c[0], tape
    return h, c, tape


def _fused_gate_weights(params: LstmParams):
    """All four gate weight blocks stacked, rows ordered i, f, o, c."""
    W = np.concatenate([params.W_i, params.W_f, params.W_o, params.W_c], axis=0)
    U = np.concatenate([params.U_i, params.U_f, params.U_o, params.U_c], axis=0)
    b = np.concatenate([params.b_i, params.b_f, params.b_o, params.b_c])
    return W, U, b


def _lstm_step_fused(x, h_prev, c_prev, params, fused):
    W, U, b = fused
    pre = x @ W.T + h_prev @ U.T + b
    if not np.all(np.isfinite(pre)):
        _raise_bad_gate(x, h_prev, params)
    n = params.hidden_size
    i = sigmoid(pre[:, :n])
    f = sigmoid(pre[:, n:2 * n])
    o = sigmoid(pre[:, 2 * n:3 * n])
    g = np.tanh(pre[:, 3 * n:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, LstmStepTape(x, h_prev, c_prev, i, f, o, g, c, tc, h)


def encode_neighbors(x_seq, params: LstmParams, batch_size: int = 1):
    """Run the recurrence over a neighbor sequence from zero initial state.

    `x_seq` has shape (T, m) for a single agent or (T, B, m) for a bucket of
    agents whose sequences share length T. An empty sequence encodes to the
    zero vector.
    """
    x_seq = np.asarray(x_seq, dtype=float)
    single = x_seq.ndim == 2
    if single:
        x_seq = x_seq[:, None, :]
        batch_size = 1
    n = params.hidden_size
    h = np.zeros((batch_size, n))
    c = np.zeros((batch_size, n))
    steps = []
    if x_seq.shape[0]:
        fused = _fused_gate_weights(params)
        for t in range(x_seq.shape[0]):
            h, c, tape = _lstm_step_fused(x_seq[t], h, c, params, fused)
            steps.append(tape)
    if single:
        return h[0], steps
    return h, steps


def mlp_forward(inp, params: MlpParams):
    """Tanh hidden layers, linear output. `inp` is (B, in)."""
    acts = [inp]
    a = inp
    for W, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.tanh(a @ W.T + b)
        acts.append(a)
    out = a @ params.weights[-1].T + params.biases[-1]
    if not np.all(np.isfinite(out)):
        raise NumericsError("non-finite MLP output")
    return out, acts


def network_forward(x_seq, extra, lstm: LstmParams | None, mlp: MlpParams,
                    encoded=None) -> ForwardTape:
    """Full forward pass for one bucket.

    Either `x_seq` (T, B, m) is encoded through the LSTM, or a precomputed
    `encoded` matrix (B, K) is used directly (occupancy path). `extra` (B,)
    is stacked after the encoding.
    """
    extra = np.asarray(extra, dtype=float)
    if encoded is None:
        batch = extra.shape[0]
        enc, steps = encode_neighbors(x_seq, lstm, batch_size=batch)
    else:
        enc, steps = np.asarray(encoded, dtype=float), []
    inp = np.concatenate([enc, extra[:, None]], axis=1)
    out, acts = mlp_forward(inp, mlp)
    return ForwardTape(steps, enc, acts, out)


# ---------------------------------------------------------------------------
# backward

def zeros_like_lstm(params: LstmParams) -> LstmParams:
    return LstmParams(*(np.zeros_like(getattr(params, f.name))
                        for f in params.__dataclass_fields__.values()))


def zeros_like_mlp(params: MlpParams) -> MlpParams:
    return MlpParams(
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
    )


def zeros_like_policy(params: PolicyParams) -> PolicyParams:
    lstm = zeros_like_lstm(params.lstm) if params.lstm is not None else None
    return PolicyParams(params.arch, lstm, zeros_like_mlp(params.mlp),
                        np.zeros_like(params.log_std))


def zeros_like_value(params: ValueParams) -> ValueParams:
    lstm = zeros_like_lstm(params.lstm) if params.lstm is not None else None
    return ValueParams(params.arch, lstm, zeros_like_mlp(params.mlp))


def mlp_backward(acts, dout, params: MlpParams, grads: MlpParams):
    """Accumulate MLP gradients into `grads`; returns d(loss)/d(input)."""
    d = np.asarray(dout, dtype=float)
    grads.weights[-1] += d.T @ acts[-1]
    grads.biases[-1] += d.sum(axis=0)
    d = d @ params.weights[-1]
    for layer in reversed(range(len(params.weights) - 1)):
        d = d * (1.0 - acts[layer + 1] ** 2)  # tanh'
        grads.weights[layer] += d.T @ acts[layer]
        grads.biases[layer] += d.sum(axis=0)
        d = d @ params.weights[layer]
    return d


def lstm_backward(steps, dh_final, params: LstmParams, grads: LstmParams) -> None:
    """Backpropagate through the whole recurrence, accumulating into `grads`.

    `dh_final` is the loss gradient at the final hidden state, shape (B, n).
    An empty sequence contributes nothing.
    """
    dh = np.asarray(dh_final, dtype=float)
    dc = np.zeros_like(dh)
    for tape in reversed(steps):
        do = dh * tape.tc
        dc = dc + dh * tape.o * (1.0 - tape.tc ** 2)
        d_pre_i = dc * tape.g * tape.i * (1.0 - tape.i)
        d_pre_f = dc * tape.c_prev * tape.f * (1.0 - tape.f)
        d_pre_o = do * tape.o * (1.0 - tape.o)
        d_pre_g = dc * tape.i * (1.0 - tape.g ** 2)

        grads.W_i += d_pre_i.T @ tape.x
        grads.U_i += d_pre_i.T @ tape.h_prev
        grads.b_i += d_pre_i.sum(axis=0)
        grads.W_f += d_pre_f.T @ tape.x
        grads.U_f += d_pre_f.T @ tape.h_prev
        grads.b_f += d_pre_f.sum(axis=0)
        grads.W_o += d_pre_o.T @ tape.x
        grads.U_o += d_pre_o.T @ tape.h_prev
        grads.b_o += d_pre_o.sum(axis=0)
        grads.W_c += d_pre_g.T @ tape.x
        grads.U_c += d_pre_g.T @ tape.h_prev
        grads.b_c += d_pre_g.sum(axis=0)

        dh = (d_pre_i @ params.U_i + d_pre_f @ params.U_f
              + d_pre_o @ params.U_o + d_pre_g @ params.U_c)
        dc = dc * tape.f


def network_backward(tape: ForwardTape, dout, lstm: LstmParams | None,
                     mlp: MlpParams, lstm_grads: LstmParams | None,
                     mlp_grads: MlpParams) -> None:
    """Reverse the bucket forward pass, accumulating parameter gradients."""
    dinp = mlp_backward(tape.mlp_acts, dout, mlp, mlp_grads)
    if lstm is not None:
        dh = dinp[:, : lstm.hidden_size]
        lstm_backward(tape.steps, dh, lstm, lstm_grads)


# ---------------------------------------------------------------------------
# flat views (optimizer, gradient checks, serialization)

LSTM_ARRAY_ORDER = ("W_i", "U_i", "b_i", "W_f", "U_f", "b_f",
                    "W_o", "U_o", "b_o", "W_c", "U_c", "b_c")


def lstm_arrays(params: LstmParams) -> list[np.ndarray]:
    return [getattr(params, name) for name in LSTM_ARRAY_ORDER]


def mlp_arrays(params: MlpParams) -> list[np.ndarray]:
    out = []
    for w, b in zip(params.weights, params.biases):
        out.extend((w, b))
    return out


def param_arrays(params) -> list[np.ndarray]:
    """Canonical array order: LSTM gates, MLP layers, then log_std if any."""
    arrays = []
    if params.lstm is not None:
        arrays.extend(lstm_arrays(params.lstm))
    arrays.extend(mlp_arrays(params.mlp))
    if isinstance(params, PolicyParams):
        arrays.append(params.log_std)
    return arrays


def params_to_vector(params) -> np.ndarray:
    return np.concatenate([a.ravel() for a in param_arrays(params)])


def vector_to_params(vec, template):
    """Rebuild a parameter container with `template`'s shapes from a flat
    vector."""
    vec = np.asarray(vec, dtype=float)
    pieces = []
    offset = 0
    for a in param_arrays(template):
        pieces.append(vec[offset:offset + a.size].reshape(a.shape).copy())
        offset += a.size
    if offset != vec.size:
        raise ValueError(f"vector has {vec.size} entries, template needs {offset}")

    idx = iter(pieces)
    lstm = None
    if template.lstm is not None:
        lstm = LstmParams(*(next(idx) for _ in LSTM_ARRAY_ORDER))
    weights, biases = [], []
    for _ in template.mlp.weights:
        weights.append(next(idx))
        biases.append(next(idx))
    mlp = MlpParams(weights, biases)
    if isinstance(template, PolicyParams):
        return PolicyParams(template.arch, lstm, mlp, next(idx))
    return ValueParams(template.arch, lstm, mlp)


def num_params(params) -> int:
    return sum(a.size for a in param_arrays(params))


def clip_gradient_norm(grad_vec: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    """Rescale a flat gradient so its global L2 norm is at most `max_norm`."""
    norm = float(np.linalg.norm(grad_vec))
    if max_norm > 0.0 and norm > max_norm:
        return grad_vec * (max_norm / norm), norm
    return grad_vec, norm


# ---------------------------------------------------------------------------
# evaluation cost

def count_flops(n_agents: int, arch: Architecture) -> int:
    """Floating point operations for one policy evaluation.

    The recurrent encoder runs once per other agent; the trailing MLP cost is
    fixed. At the default sizes the per-neighbor term is 34,902 and the fixed
    term 17,160.
    """
    if n_agents < 1:
        raise ValueError("n_agents must be >= 1")
    h, x = arch.hidden_size, arch.input_size
    layers = arch.layer_sizes
    per_step = 8 * h * h + 8 * h * x + 26 * h
    fixed = 2 * (h + 1) * layers[0] + 4 * layers[0]
    for lk, lk1 in zip(layers[:-1], layers[1:]):
        fixed += 2 * lk * lk1 + 4 * lk1
    fixed += 2 * layers[-1] * arch.action_dim + 4 * arch.action_dim
    return (n_agents - 1) * per_step + fixed
