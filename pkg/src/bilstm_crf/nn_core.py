"""Numeric building blocks for the BiLSTM encoder, with hand-written backward passes.

Gate weights of one LSTM direction are stored stacked as ``W`` with shape
(4H, H+E) in the order forget, input, output, candidate; each block acts on
the concatenation ``[h_prev, x_t]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GATES = ("f", "i", "o", "c")


class NumericError(FloatingPointError):
    """A forward or backward pass produced NaN or Inf."""


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow in exp for large |z|
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def xavier_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype=np.float64):
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=shape).astype(dtype)


def check_finite(values: np.ndarray, what: str) -> None:
    if np.all(np.isfinite(values)):
        return
    bad = np.argwhere(~np.isfinite(values))[0]
    raise NumericError(f"non-finite value in {what} at index {tuple(int(i) for i in bad)}")


@dataclass
class LstmDirectionParams:
    W: np.ndarray  # (4H, H+E)
    b: np.ndarray  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.b.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.W.shape[1] - self.hidden_size

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Views ``(W_name, b_name)`` of one gate block."""
        H = self.hidden_size
        j = GATES.index(name)
        return self.W[j * H:(j + 1) * H], self.b[j * H:(j + 1) * H]

    W_f = property(lambda self: self.gate("f")[0])
    W_i = property(lambda self: self.gate("i")[0])
    W_o = property(lambda self: self.gate("o")[0])
    W_c = property(lambda self: self.gate("c")[0])
    b_f = property(lambda self: self.gate("f")[1])
    b_i = property(lambda self: self.gate("i")[1])
    b_o = property(lambda self: self.gate("o")[1])
    b_c = property(lambda self: self.gate("c")[1])

    @classmethod
    def from_gates(cls, W_f, W_i, W_o, W_c, b_f, b_i, b_o, b_c) -> "LstmDirectionParams":
        return cls(np.concatenate([W_f, W_i, W_o, W_c]), np.concatenate([b_f, b_i, b_o, b_c]))

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator,
             dtype=np.float64, forget_bias: float = 1.0) -> "LstmDirectionParams":
        H, E = hidden_size, input_size
        blocks = [xavier_uniform(rng, (H, H + E), H + E, H, dtype) for _ in GATES]
        b = np.zeros(4 * H, dtype=dtype)
        b[:H] = forget_bias
        return cls(np.concatenate(blocks), b)


def _gate_activations(z: np.ndarray, H: int):
    f = sigmoid(z[..., :H])
    i = sigmoid(z[..., H:2 * H])
    o = sigmoid(z[..., 2 * H:3 * H])
    g = np.tanh(z[..., 3 * H:])
    return f, i, o, g


def lstm_cell_forward(x_t, h_prev, c_prev, params: LstmDirectionParams):
    """One LSTM step. Works on single vectors or on row-stacked batches."""
    H = params.hidden_size
    z = np.concatenate([h_prev, x_t], axis=-1) @ params.W.T + params.b
    f, i, o, g = _gate_activations(z, H)
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    check_finite(h_t, "LSTM hidden state")
    check_finite(c_t, "LSTM cell state")
    return h_t, c_t


def lstm_cell_backward(dh, dc_next, cache):
    """Gradients of one step w.r.t. the gate pre-activations and ``c_prev``.

    ``dh`` is the total gradient on ``h_t``; ``dc_next`` the gradient flowing
    into ``c_t`` from the following step. ``cache`` is
    ``(c_prev, f, i, o, g, tanh_c)``.
    """
    c_prev, f, i, o, g, tanh_c = cache
    do = dh * tanh_c
    dc = dh * o * (1.0 - tanh_c ** 2) + dc_next
    df = dc * c_prev
    di = dc * g
    dg = dc * i
    dz = np.concatenate(
        [df * f * (1.0 - f), di * i * (1.0 - i), do * o * (1.0 - o), dg * (1.0 - g ** 2)],
        axis=-1,
    )
    return dz, dc * f


def reverse_index(lengths: np.ndarray, width: int) -> np.ndarray:
    """Index map flipping each row's first ``lengths[b]`` positions in place.

    The map is an involution, so it also undoes itself.
    """
    t = np.arange(width)[None, :]
    lengths = np.asarray(lengths)[:, None]
    return np.where(t < lengths, lengths - 1 - t, t)


def _flip(X: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return np.take_along_axis(X, idx[:, :, None], axis=1)


def lstm_batch_forward(X: np.ndarray, lengths: np.ndarray, params: LstmDirectionParams,
                       reverse: bool = False):
    """Run one direction over a padded batch ``X`` of shape (B, T, E).

    Returns hidden states (B, T, H) aligned with the input positions and a
    cache for :func:`lstm_batch_backward`. Padding comes after each row's
    real positions in the traversal order, so it never leaks into them.
    """
    B, T, _ = X.shape
    H = params.hidden_size
    idx = reverse_index(lengths, T) if reverse else None
    Xs = _flip(X, idx) if reverse else X

    W_h, W_x = params.W[:, :H], params.W[:, H:]
    Zx = Xs @ W_x.T + params.b
    h = np.zeros((B, H), dtype=X.dtype)
    c = np.zeros((B, H), dtype=X.dtype)
    hs = np.empty((B, T, H), dtype=X.dtype)
    h_prev = np.empty((B, T, H), dtype=X.dtype)
    steps = []
    for t in range(T):
        h_prev[:, t] = h
        z = Zx[:, t] + h @ W_h.T
        f, i, o, g = _gate_activations(z, H)
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        steps.append((c, f, i, o, g, tanh_c))
        h = o * tanh_c
        c = c_new
        hs[:, t] = h
    check_finite(hs, "LSTM hidden states")
    out = _flip(hs, idx) if reverse else hs
    cache = {"X": Xs, "h_prev": h_prev, "steps": steps, "idx": idx, "reverse": reverse}
    return out, cache


def lstm_batch_backward(dH: np.ndarray, cache, params: LstmDirectionParams):
    """Backpropagate ``dH`` (B, T, H) through time; returns ``(dX, dW, db)``."""
    H = params.hidden_size
    reverse = cache["reverse"]
    dHs = _flip(dH, cache["idx"]) if reverse else dH
    B, T, _ = dHs.shape
    W_h = params.W[:, :H]
    dZ = np.empty((B, T, 4 * H), dtype=dH.dtype)
    dh_next = np.zeros((B, H), dtype=dH.dtype)
    dc_next = np.zeros((B, H), dtype=dH.dtype)
    for t in range(T - 1, -1, -1):
        dz, dc_next = lstm_cell_backward(dHs[:, t] + dh_next, dc_next, cache["steps"][t])
        dZ[:, t] = dz
        dh_next = dz @ W_h
    Xs = cache["X"]
    flat_dZ = dZ.reshape(B * T, 4 * H)
    dW = np.concatenate(
        [flat_dZ.T @ cache["h_prev"].reshape(B * T, H), flat_dZ.T @ Xs.reshape(B * T, -1)],
        axis=1,
    )
    db = flat_dZ.sum(axis=0)
    dXs = dZ @ params.W[:, H:]
    dX = _flip(dXs, cache["idx"]) if reverse else dXs
    return dX, dW, db


def lstm_sequence_forward(X: np.ndarray, params: LstmDirectionParams, reverse: bool = False):
    """Hidden states (n, H) for one sentence ``X`` (n, E), zero initial state."""
    X = np.asarray(X)
    out, _ = lstm_batch_forward(X[None], np.array([X.shape[0]]), params, reverse)
    return out[0]


def bilstm_forward(X: np.ndarray, fwd: LstmDirectionParams, bwd: LstmDirectionParams):
    if fwd.hidden_size != bwd.hidden_size:
        raise ValueError("forward and backward directions must share the hidden size")
    return np.concatenate(
        [lstm_sequence_forward(X, fwd), lstm_sequence_forward(X, bwd, reverse=True)], axis=-1
    )


def project(states: np.ndarray, W: np.ndarray, b: np.ndarray, linear: bool = False):
    """Emission scores ``tanh(states @ W.T + b)``; ``linear`` drops the tanh."""
    if states.shape[-1] != W.shape[1]:
        raise ValueError(f"projection expects width {W.shape[1]}, got {states.shape[-1]}")
    pre = states @ W.T + b
    out = pre if linear else np.tanh(pre)
    check_finite(out, "emission scores")
    return out


def project_backward(dP, states, P, W, linear: bool = False):
    dpre = dP if linear else dP * (1.0 - P ** 2)
    k = W.shape[0]
    flat = dpre.reshape(-1, k)
    dW = flat.T @ states.reshape(-1, states.shape[-1])
    db = flat.sum(axis=0)
    return dpre @ W, dW, db


def dropout_mask(shape, p: float, rng: np.random.Generator, dtype=np.float64) -> np.ndarray:
    """Inverted-dropout multiplier: 0 with probability ``p``, else ``1/(1-p)``."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    keep = rng.random(shape) >= p
    return (keep / (1.0 - p)).astype(dtype)


def dropout(T: np.ndarray, p: float, training: bool, rng: np.random.Generator | None = None):
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return T
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    return T * dropout_mask(T.shape, p, rng, T.dtype)
