"""Combination schemes for per-token layer stacks.

Every scheme maps the L layer vectors of a token to a single input vector:
a single layer, the concatenation of all layers, their plain average, or a
learned combination ``gamma * sum_j softmax(w)_j * h_j`` over a chosen layer
subset.  The learned scheme over all layers and over layers {0, 1} are the
two variants of interest in the comparison harness; both share this code.

Scheme strings: ``layer:<i>``, ``concat``, ``avg``, ``wavg:<i>,<j>,...``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

INDIVIDUAL = "individual"
CONCAT = "concat"
AVG = "avg"
WAVG = "wavg"


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax; safe for arbitrarily large finite logits."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


@dataclass(frozen=True)
class MixScheme:
    kind: str
    layer: int = 0
    subset: tuple[int, ...] = ()

    @classmethod
    def parse(cls, text: str) -> "MixScheme":
        text = text.strip()
        if text == CONCAT:
            return cls(kind=CONCAT)
        if text == AVG:
            return cls(kind=AVG)
        if text.startswith("layer:"):
            try:
                return cls(kind=INDIVIDUAL, layer=int(text[len("layer:") :]))
            except ValueError:
                raise ConfigError(f"bad layer index in scheme {text!r}") from None
        if text.startswith("wavg:"):
            body = text[len("wavg:") :]
            try:
                subset = tuple(int(part) for part in body.split(","))
            except ValueError:
                raise ConfigError(f"bad layer list in scheme {text!r}") from None
            if not subset:
                raise ConfigError(f"empty layer list in scheme {text!r}")
            return cls(kind=WAVG, subset=subset)
        raise ConfigError(
            f"unknown scheme {text!r}; expected layer:<i> | concat | avg | wavg:<i>,<j>,..."
        )

    def __str__(self) -> str:
        if self.kind == INDIVIDUAL:
            return f"layer:{self.layer}"
        if self.kind == WAVG:
            return "wavg:" + ",".join(str(i) for i in self.subset)
        return self.kind

    def validate(self, num_layers: int) -> None:
        if self.kind == INDIVIDUAL:
            if not 0 <= self.layer < num_layers:
                raise ConfigError(f"layer index {self.layer} out of range for L={num_layers}")
        elif self.kind == WAVG:
            if len(self.subset) == 0:
                raise ConfigError("wavg needs at least one layer")
            if len(set(self.subset)) != len(self.subset):
                raise ConfigError(f"duplicate layer index in {self}")
            for i in self.subset:
                if not 0 <= i < num_layers:
                    raise ConfigError(f"layer index {i} out of range for L={num_layers}")
        elif self.kind not in (CONCAT, AVG):
            raise ConfigError(f"unknown scheme kind {self.kind!r}")

    @property
    def has_params(self) -> bool:
        return self.kind == WAVG


def output_dim(scheme: MixScheme, num_layers: int, dim: int) -> int:
    """Dimension of the mixed vector: L*D for concat, D otherwise."""
    scheme.validate(num_layers)
    if scheme.kind == CONCAT:
        return num_layers * dim
    return dim


@dataclass
class MixParams:
    """Unconstrained logits plus a scale; weights are softmax(logits)."""

    logits: np.ndarray
    gamma: np.ndarray  # 0-d float64 array so the optimizer can update in place

    @classmethod
    def initial(cls, scheme: MixScheme) -> "MixParams | None":
        """Uniform weights (zero logits) and unit scale; None for parameterless schemes."""
        if not scheme.has_params:
            return None
        return cls(
            logits=np.zeros(len(scheme.subset), dtype=np.float64),
            gamma=np.array(1.0, dtype=np.float64),
        )

    def weights(self) -> np.ndarray:
        return softmax(self.logits)


def _as_layer_stack(layers: np.ndarray) -> tuple[np.ndarray, bool]:
    layers = np.asarray(layers, dtype=np.float64)
    if layers.ndim == 2:  # single token (L, D)
        return layers[:, None, :], True
    if layers.ndim == 3:
        return layers, False
    raise ValueError(f"expected (L, D) or (L, n, D) layer stack, got shape {layers.shape}")


def mix_forward(
    layers: np.ndarray, scheme: MixScheme, params: MixParams | None = None
) -> np.ndarray:
    """Combine a layer stack into mixed vectors.

    ``layers`` is (L, D) for one token or (L, n, D) for a sentence; the result
    is (out_dim,) or (n, out_dim).  Only the wavg scheme reads ``params``, and
    it never touches layers outside its subset.
    """
    stack, single = _as_layer_stack(layers)
    num_layers, n, dim = stack.shape
    scheme.validate(num_layers)
    if scheme.kind == INDIVIDUAL:
        out = stack[scheme.layer].copy()
    elif scheme.kind == CONCAT:
        out = np.transpose(stack, (1, 0, 2)).reshape(n, num_layers * dim)
    elif scheme.kind == AVG:
        out = stack.sum(axis=0) / num_layers
    else:
        if params is None:
            raise ValueError("wavg scheme requires MixParams")
        weights = softmax(params.logits)
        subset = np.asarray(scheme.subset)
        out = float(params.gamma) * np.tensordot(weights, stack[subset], axes=(0, 0))
    return out[0] if single else out


def mix_backward(
    grad_out: np.ndarray,
    layers: np.ndarray,
    scheme: MixScheme,
    params: MixParams | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Gradients of the mixed output w.r.t. layers, logits, and gamma.

    Accepts the same single-token or sentence shapes as :func:`mix_forward`.
    Parameterless schemes get an empty logit gradient and zero gamma gradient;
    layers outside a wavg subset get an exactly-zero gradient block.
    """
    stack, single = _as_layer_stack(layers)
    num_layers, n, dim = stack.shape
    scheme.validate(num_layers)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if single:
        grad_out = grad_out[None, :]
    if grad_out.shape != (n, output_dim(scheme, num_layers, dim)):
        raise ValueError(
            f"grad_out shape {grad_out.shape} does not match mixed output "
            f"({n}, {output_dim(scheme, num_layers, dim)})"
        )

    grad_layers = np.zeros_like(stack)
    grad_logits = np.zeros(0, dtype=np.float64)
    grad_gamma = 0.0
    if scheme.kind == INDIVIDUAL:
        grad_layers[scheme.layer] = grad_out
    elif scheme.kind == CONCAT:
        grad_layers[:] = np.transpose(grad_out.reshape(n, num_layers, dim), (1, 0, 2))
    elif scheme.kind == AVG:
        grad_layers[:] = grad_out / num_layers
    else:
        if params is None:
            raise ValueError("wavg scheme requires MixParams")
        weights = softmax(params.logits)
        subset = np.asarray(scheme.subset)
        gamma = float(params.gamma)
        # dots[j] = <grad_out, h_j> summed over tokens and dimensions
        dots = np.tensordot(stack[subset], grad_out, axes=([1, 2], [0, 1]))
        weighted_total = float(weights @ dots)
        grad_gamma = weighted_total
        grad_logits = gamma * weights * (dots - weighted_total)
        grad_layers[subset] = gamma * weights[:, None, None] * grad_out[None, :, :]
    if single:
        grad_layers = grad_layers[:, 0, :]
    return grad_layers, grad_logits, grad_gamma


def logit_penalty(params: MixParams, strength: float) -> tuple[float, np.ndarray]:
    """L2 penalty on the mixing logits: returns (strength*sum(w^2), 2*strength*w).

    Zero strength disables the penalty; with it enabled the softmax weights are
    pulled toward uniform, so no layer's weight can collapse to zero.
    """
    if strength < 0:
        raise ConfigError(f"logit penalty must be >= 0, got {strength}")
    if strength == 0:
        return 0.0, np.zeros_like(params.logits)
    return strength * float(params.logits @ params.logits), 2.0 * strength * params.logits
