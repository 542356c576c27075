"""Neural building blocks with manual backpropagation.

All arrays are float64.  Weight matrices are initialized uniform(-r, r) with
r = 1/sqrt(fan_in); biases start at zero except the LSTM forget gate, which
starts at +1 so early training does not erase the cell state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


def _uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class LinearParams:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    @classmethod
    def init(cls, n_out: int, n_in: int, rng: np.random.Generator) -> "LinearParams":
        return cls(weight=_uniform_init(rng, (n_out, n_in), n_in), bias=np.zeros(n_out))


def linear_forward(x: np.ndarray, params: LinearParams) -> np.ndarray:
    """W x + b for a single vector (in,) or a stack of rows (n, in)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.weight.shape[1]:
        raise ValueError(f"input dim {x.shape[-1]} != weight in-dim {params.weight.shape[1]}")
    return x @ params.weight.T + params.bias


def linear_backward(
    grad_y: np.ndarray, x: np.ndarray, params: LinearParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (grad_x, grad_weight, grad_bias)."""
    grad_y = np.asarray(grad_y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if grad_y.ndim == 1:
        grad_w = np.outer(grad_y, x)
        grad_b = grad_y.copy()
    else:
        grad_w = grad_y.T @ x
        grad_b = grad_y.sum(axis=0)
    grad_x = grad_y @ params.weight
    return grad_x, grad_w, grad_b


@dataclass
class LstmParams:
    """Gate order along the 4h axis: input, forget, cell, output."""

    w_x: np.ndarray  # (4h, in)
    w_h: np.ndarray  # (4h, h)
    b: np.ndarray  # (4h,)

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[1]

    @classmethod
    def init(cls, n_in: int, hidden: int, rng: np.random.Generator) -> "LstmParams":
        w_x = _uniform_init(rng, (4 * hidden, n_in), n_in)
        w_h = _uniform_init(rng, (4 * hidden, hidden), hidden)
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0  # forget gate
        return cls(w_x=w_x, w_h=w_h, b=b)

    def zeros_like(self) -> "LstmParams":
        return LstmParams(np.zeros_like(self.w_x), np.zeros_like(self.w_h), np.zeros_like(self.b))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_step(
    x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, params: LstmParams
) -> tuple[np.ndarray, np.ndarray]:
    """One step of the gated recurrence: returns (h, c)."""
    hidden = params.hidden_size
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.w_x.shape[1],):
        raise ValueError(f"input shape {x.shape} != ({params.w_x.shape[1]},)")
    if h_prev.shape != (hidden,) or c_prev.shape != (hidden,):
        raise ValueError("state shapes do not match the hidden size")
    a = params.w_x @ x + params.w_h @ h_prev + params.b
    i = _sigmoid(a[:hidden])
    f = _sigmoid(a[hidden : 2 * hidden])
    g = np.tanh(a[2 * hidden : 3 * hidden])
    o = _sigmoid(a[3 * hidden :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


@dataclass
class BiLstmCache:
    x_seq: np.ndarray
    fwd: LstmParams
    bwd: LstmParams
    rec_mask_fwd: np.ndarray
    rec_mask_bwd: np.ndarray
    h_fwd: np.ndarray
    c_fwd: np.ndarray
    gates_fwd: np.ndarray
    h_bwd_rev: np.ndarray  # states of the reversed-direction run, in reversed time
    c_bwd_rev: np.ndarray
    gates_bwd_rev: np.ndarray


def bilstm_forward(
    x_seq: np.ndarray,
    fwd: LstmParams,
    bwd: LstmParams,
    rec_mask_fwd: np.ndarray | None = None,
    rec_mask_bwd: np.ndarray | None = None,
) -> tuple[np.ndarray, BiLstmCache]:
    """One bidirectional layer: output row t is [h_fwd(t); h_bwd(t)].

    The backward direction runs over the reversed sequence.  Recurrent dropout
    masks are applied to h_{t-1} at every step (None means no dropout).
    """
    x_seq = np.ascontiguousarray(x_seq, dtype=np.float64)
    if x_seq.ndim != 2 or x_seq.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, d_in) sequence, got shape {x_seq.shape}")
    if fwd.hidden_size != bwd.hidden_size:
        raise ValueError("forward and backward hidden sizes differ")
    hidden = fwd.hidden_size
    mask_f = np.ones(hidden) if rec_mask_fwd is None else np.asarray(rec_mask_fwd, dtype=np.float64)
    mask_b = np.ones(hidden) if rec_mask_bwd is None else np.asarray(rec_mask_bwd, dtype=np.float64)

    h_f, c_f, g_f = kernels.lstm_forward(x_seq, fwd.w_x, fwd.w_h, fwd.b, mask_f)
    x_rev = np.ascontiguousarray(x_seq[::-1])
    h_b, c_b, g_b = kernels.lstm_forward(x_rev, bwd.w_x, bwd.w_h, bwd.b, mask_b)
    out = np.concatenate([h_f, h_b[::-1]], axis=1)
    cache = BiLstmCache(
        x_seq=x_seq,
        fwd=fwd,
        bwd=bwd,
        rec_mask_fwd=mask_f,
        rec_mask_bwd=mask_b,
        h_fwd=h_f,
        c_fwd=c_f,
        gates_fwd=g_f,
        h_bwd_rev=h_b,
        c_bwd_rev=c_b,
        gates_bwd_rev=g_b,
    )
    return out, cache


def bilstm_backward(
    grad_out: np.ndarray, cache: BiLstmCache
) -> tuple[np.ndarray, LstmParams, LstmParams]:
    """Full BPTT; returns (grad_x_seq, fwd param grads, bwd param grads)."""
    hidden = cache.fwd.hidden_size
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != (cache.x_seq.shape[0], 2 * hidden):
        raise ValueError(f"grad shape {grad_out.shape} != {(cache.x_seq.shape[0], 2 * hidden)}")
    grad_h_f = np.ascontiguousarray(grad_out[:, :hidden])
    grad_h_b_rev = np.ascontiguousarray(grad_out[::-1, hidden:])

    gx_f, gwx_f, gwh_f, gb_f = kernels.lstm_backward(
        grad_h_f,
        cache.x_seq,
        cache.fwd.w_x,
        cache.fwd.w_h,
        cache.rec_mask_fwd,
        cache.h_fwd,
        cache.c_fwd,
        cache.gates_fwd,
    )
    x_rev = np.ascontiguousarray(cache.x_seq[::-1])
    gx_b_rev, gwx_b, gwh_b, gb_b = kernels.lstm_backward(
        grad_h_b_rev,
        x_rev,
        cache.bwd.w_x,
        cache.bwd.w_h,
        cache.rec_mask_bwd,
        cache.h_bwd_rev,
        cache.c_bwd_rev,
        cache.gates_bwd_rev,
    )
    grad_x = gx_f + gx_b_rev[::-1]
    return grad_x, LstmParams(gwx_f, gwh_f, gb_f), LstmParams(gwx_b, gwh_b, gb_b)


@dataclass
class DropoutSpec:
    rate: float
    variational: bool = True  # one mask per sequence, reused at every timestep

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.rate}")


def sample_variational_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: Bernoulli(1-rate) scaled by 1/(1-rate).

    Sampled once per sequence and reused at every timestep; evaluation uses no
    mask (identity), so expectations match between train and eval.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)
