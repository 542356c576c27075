"""Numpy reference implementation of the LSTM sequence kernels.

Shared conventions (both backends):

- pre-activations are ``w_x @ x_t + w_h @ (rec_mask * h_{t-1}) + b``;
- gate order inside the 4h axis is input, forget, cell, output;
- activations: sigmoid for i/f/o, tanh for the cell candidate;
- ``c_t = f * c_{t-1} + i * g`` and ``h_t = o * tanh(c_t)``;
- initial ``h`` and ``c`` are zero;
- ``rec_mask`` is the per-sequence variational dropout mask on the
  recurrent input (all ones at evaluation time).

Everything is float64.  The forward pass returns the hidden states, cell
states and post-activation gates, which together are the cache the backward
pass needs for full backpropagation through time.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # evaluated in the exp-of-negative form on both branches to avoid overflow
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_forward(
    x_seq: np.ndarray,
    w_x: np.ndarray,
    w_h: np.ndarray,
    b: np.ndarray,
    rec_mask: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run one LSTM direction over a sequence.

    x_seq: (n, d_in); w_x: (4h, d_in); w_h: (4h, h); b: (4h,); rec_mask: (h,).
    Returns (h_seq (n, h), c_seq (n, h), gates (n, 4h) post-activation).
    """
    n = x_seq.shape[0]
    hidden = w_h.shape[1]
    h_seq = np.empty((n, hidden))
    c_seq = np.empty((n, hidden))
    gates = np.empty((n, 4 * hidden))
    x_proj = x_seq @ w_x.T + b
    h_prev = np.zeros(hidden)
    c_prev = np.zeros(hidden)
    for t in range(n):
        a = x_proj[t] + w_h @ (rec_mask * h_prev)
        i = _sigmoid(a[:hidden])
        f = _sigmoid(a[hidden : 2 * hidden])
        g = np.tanh(a[2 * hidden : 3 * hidden])
        o = _sigmoid(a[3 * hidden :])
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        gates[t, :hidden] = i
        gates[t, hidden : 2 * hidden] = f
        gates[t, 2 * hidden : 3 * hidden] = g
        gates[t, 3 * hidden :] = o
        c_seq[t] = c
        h_seq[t] = h
        h_prev = h
        c_prev = c
    return h_seq, c_seq, gates


def lstm_backward(
    grad_h_seq: np.ndarray,
    x_seq: np.ndarray,
    w_x: np.ndarray,
    w_h: np.ndarray,
    rec_mask: np.ndarray,
    h_seq: np.ndarray,
    c_seq: np.ndarray,
    gates: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backpropagation through time for :func:`lstm_forward`.

    Returns (grad_x_seq, grad_w_x, grad_w_h, grad_b).
    """
    n, hidden = h_seq.shape
    grad_pre = np.empty((n, 4 * hidden))  # gradients w.r.t. pre-activations
    dh_next = np.zeros(hidden)
    dc_next = np.zeros(hidden)
    for t in range(n - 1, -1, -1):
        i = gates[t, :hidden]
        f = gates[t, hidden : 2 * hidden]
        g = gates[t, 2 * hidden : 3 * hidden]
        o = gates[t, 3 * hidden :]
        c_prev = c_seq[t - 1] if t > 0 else np.zeros(hidden)
        tanh_c = np.tanh(c_seq[t])
        dh = grad_h_seq[t] + dh_next
        dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next
        grad_pre[t, :hidden] = dc * g * i * (1.0 - i)
        grad_pre[t, hidden : 2 * hidden] = dc * c_prev * f * (1.0 - f)
        grad_pre[t, 2 * hidden : 3 * hidden] = dc * i * (1.0 - g * g)
        grad_pre[t, 3 * hidden :] = dh * tanh_c * o * (1.0 - o)
        dc_next = dc * f
        dh_next = (w_h.T @ grad_pre[t]) * rec_mask
    # masked h_{t-1} inputs, row t holds rec_mask * h_{t-1} (zeros at t=0)
    h_masked = np.zeros_like(h_seq)
    h_masked[1:] = h_seq[:-1] * rec_mask
    grad_x_seq = grad_pre @ w_x
    grad_w_x = grad_pre.T @ x_seq
    grad_w_h = grad_pre.T @ h_masked
    grad_b = grad_pre.sum(axis=0)
    return grad_x_seq, grad_w_x, grad_w_h, grad_b
