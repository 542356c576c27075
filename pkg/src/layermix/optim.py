"""Adam with bias correction, applied uniformly to every trainable array.

Update per parameter theta with gradient g:

    m = b1*m + (1-b1)*g          mhat = m / (1 - b1^t)
    v = b2*v + (1-b2)*g*g        vhat = v / (1 - b2^t)
    theta -= lr * mhat / (sqrt(vhat) + eps)

Optional global-norm clipping rescales all gradients jointly before the
moment updates; it is off by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState
) -> None:
    """Apply one bias-corrected update in place; moments are kept per key."""
    for key, grad in grads.items():
        if key not in params:
            raise ValueError(f"gradient for unknown parameter {key!r}")
        if np.shape(grad) != params[key].shape:
            raise ValueError(
                f"{key}: gradient shape {np.shape(grad)} != parameter shape {params[key].shape}"
            )

    scale = 1.0
    if state.clip_norm is not None:
        total = np.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values()))
        if total > state.clip_norm:
            scale = state.clip_norm / total

    state.t += 1
    correction1 = 1.0 - state.beta1**state.t
    correction2 = 1.0 - state.beta2**state.t
    for key, grad in grads.items():
        g = np.asarray(grad, dtype=np.float64) * scale
        if key not in state.m:
            state.m[key] = np.zeros_like(params[key])
            state.v[key] = np.zeros_like(params[key])
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        mhat = m / correction1
        vhat = v / correction2
        params[key] -= state.lr * mhat / (np.sqrt(vhat) + state.eps)
