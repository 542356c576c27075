"""The sequence tagger: layer mixer, two BiLSTM layers, projection, CRF.

One sentence flows as

    (L, n, D) layers -> mix -> dropout -> BiLSTM 1 -> dropout -> BiLSTM 2
    -> dropout -> linear projection -> (n, T) emissions -> CRF

Variational dropout masks are sampled once per sentence, in a fixed order, and
reused at every timestep; evaluation applies no dropout.  All trainable arrays
are exposed through one flat dict so the optimizer and snapshots treat the
model uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import crf as crf_mod
from . import mixer, neuralnet
from .neuralnet import LinearParams, LstmParams


@dataclass
class TaggerConfig:
    num_layers: int
    dim: int
    num_tags: int
    hidden_size: int
    scheme: mixer.MixScheme
    dropout: float = 0.5


@dataclass
class SentenceMasks:
    """Per-sentence variational dropout masks (all None means evaluation mode)."""

    input: np.ndarray | None = None  # (mix_dim,)
    rec_l1_fwd: np.ndarray | None = None  # (h,)
    rec_l1_bwd: np.ndarray | None = None
    mid: np.ndarray | None = None  # (2h,)
    rec_l2_fwd: np.ndarray | None = None
    rec_l2_bwd: np.ndarray | None = None
    out: np.ndarray | None = None  # (2h,)


class TaggerModel:
    def __init__(self, config: TaggerConfig, rng: np.random.Generator):
        config.scheme.validate(config.num_layers)
        self.config = config
        mix_dim = mixer.output_dim(config.scheme, config.num_layers, config.dim)
        hidden = config.hidden_size
        self.mix = mixer.MixParams.initial(config.scheme)
        self.l1_fwd = LstmParams.init(mix_dim, hidden, rng)
        self.l1_bwd = LstmParams.init(mix_dim, hidden, rng)
        self.l2_fwd = LstmParams.init(2 * hidden, hidden, rng)
        self.l2_bwd = LstmParams.init(2 * hidden, hidden, rng)
        self.proj = LinearParams.init(config.num_tags, 2 * hidden, rng)
        self.crf = crf_mod.CrfParams.init(config.num_tags, rng)

    def parameters(self) -> dict[str, np.ndarray]:
        """Live views of every trainable array (updates mutate the model)."""
        params: dict[str, np.ndarray] = {}
        if self.mix is not None:
            params["mix.logits"] = self.mix.logits
            params["mix.gamma"] = self.mix.gamma
        for name, lstm in (
            ("l1_fwd", self.l1_fwd),
            ("l1_bwd", self.l1_bwd),
            ("l2_fwd", self.l2_fwd),
            ("l2_bwd", self.l2_bwd),
        ):
            params[f"{name}.w_x"] = lstm.w_x
            params[f"{name}.w_h"] = lstm.w_h
            params[f"{name}.b"] = lstm.b
        params["proj.weight"] = self.proj.weight
        params["proj.bias"] = self.proj.bias
        params["crf.transitions"] = self.crf.transitions
        params["crf.start"] = self.crf.start
        params["crf.end"] = self.crf.end
        return params

    def snapshot(self) -> dict[str, np.ndarray]:
        return {key: value.copy() for key, value in self.parameters().items()}

    def load_snapshot(self, snapshot: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(params) != set(snapshot):
            raise ValueError("snapshot keys do not match this model")
        for key, value in snapshot.items():
            params[key][...] = value

    def sample_masks(self, rng: np.random.Generator) -> SentenceMasks:
        """Fixed sampling order so training is reproducible from the seed alone."""
        rate = self.config.dropout
        hidden = self.config.hidden_size
        mix_dim = mixer.output_dim(self.config.scheme, self.config.num_layers, self.config.dim)

        def draw(size):
            return neuralnet.sample_variational_mask(size, rate, rng)

        return SentenceMasks(
            input=draw(mix_dim),
            rec_l1_fwd=draw(hidden),
            rec_l1_bwd=draw(hidden),
            mid=draw(2 * hidden),
            rec_l2_fwd=draw(hidden),
            rec_l2_bwd=draw(hidden),
            out=draw(2 * hidden),
        )

    def emissions(self, layers: np.ndarray, masks: SentenceMasks | None = None):
        """Forward pass to per-position tag scores; returns (emissions, cache)."""
        masks = masks or SentenceMasks()
        mixed = mixer.mix_forward(layers.astype(np.float64), self.config.scheme, self.mix)
        x1 = mixed if masks.input is None else mixed * masks.input
        y1, cache1 = neuralnet.bilstm_forward(
            x1, self.l1_fwd, self.l1_bwd, masks.rec_l1_fwd, masks.rec_l1_bwd
        )
        x2 = y1 if masks.mid is None else y1 * masks.mid
        y2, cache2 = neuralnet.bilstm_forward(
            x2, self.l2_fwd, self.l2_bwd, masks.rec_l2_fwd, masks.rec_l2_bwd
        )
        top = y2 if masks.out is None else y2 * masks.out
        scores = neuralnet.linear_forward(top, self.proj)
        cache = (layers, masks, cache1, cache2, top)
        return scores, cache

    def loss_and_grads(
        self,
        layers: np.ndarray,
        tag_ids: np.ndarray,
        masks: SentenceMasks | None = None,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """CRF negative log-likelihood for one sentence plus all parameter grads."""
        scores, (_, masks, cache1, cache2, top) = self.emissions(layers, masks)
        loss, grad_scores, grad_crf = crf_mod.nll_and_grad(scores, self.crf, tag_ids)

        grad_top, grad_proj_w, grad_proj_b = neuralnet.linear_backward(grad_scores, top, self.proj)
        grad_y2 = grad_top if masks.out is None else grad_top * masks.out
        grad_x2, grad_l2f, grad_l2b = neuralnet.bilstm_backward(grad_y2, cache2)
        grad_y1 = grad_x2 if masks.mid is None else grad_x2 * masks.mid
        grad_x1, grad_l1f, grad_l1b = neuralnet.bilstm_backward(grad_y1, cache1)
        grad_mixed = grad_x1 if masks.input is None else grad_x1 * masks.input
        _, grad_logits, grad_gamma = mixer.mix_backward(
            grad_mixed, layers.astype(np.float64), self.config.scheme, self.mix
        )

        grads: dict[str, np.ndarray] = {}
        if self.mix is not None:
            grads["mix.logits"] = grad_logits
            grads["mix.gamma"] = np.array(grad_gamma)
        for name, lstm_grad in (
            ("l1_fwd", grad_l1f),
            ("l1_bwd", grad_l1b),
            ("l2_fwd", grad_l2f),
            ("l2_bwd", grad_l2b),
        ):
            grads[f"{name}.w_x"] = lstm_grad.w_x
            grads[f"{name}.w_h"] = lstm_grad.w_h
            grads[f"{name}.b"] = lstm_grad.b
        grads["proj.weight"] = grad_proj_w
        grads["proj.bias"] = grad_proj_b
        grads["crf.transitions"] = grad_crf.transitions
        grads["crf.start"] = grad_crf.start
        grads["crf.end"] = grad_crf.end
        return loss, grads

    def predict(self, layers: np.ndarray) -> np.ndarray:
        """Viterbi tags in evaluation mode (no dropout, deterministic)."""
        scores, _ = self.emissions(layers, masks=None)
        tags, _ = crf_mod.viterbi_decode(scores, self.crf)
        return tags
