"""Linear-chain conditional random field over emission scores.

A tag sequence y for an (n, T) emission matrix E scores

    start[y_0] + sum_i E[i, y_i] + sum_i transitions[y_i, y_{i+1}] + end[y_{n-1}]

All dynamic programming runs in log space with max-subtracted log-sum-exp and
float64 accumulation.  Viterbi ties break toward the lower tag index at every
backtrack step, so decoding is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class CrfParams:
    transitions: np.ndarray  # (T, T); [a, b] scores a -> b
    start: np.ndarray  # (T,)
    end: np.ndarray  # (T,)

    @property
    def num_tags(self) -> int:
        return self.start.shape[0]

    @classmethod
    def init(cls, num_tags: int, rng: np.random.Generator) -> "CrfParams":
        bound = 1.0 / np.sqrt(num_tags)
        return cls(
            transitions=rng.uniform(-bound, bound, size=(num_tags, num_tags)),
            start=np.zeros(num_tags),
            end=np.zeros(num_tags),
        )

    def zeros_like(self) -> "CrfParams":
        return CrfParams(
            np.zeros_like(self.transitions), np.zeros_like(self.start), np.zeros_like(self.end)
        )


def _check_instance(emissions: np.ndarray, crf: CrfParams) -> np.ndarray:
    emissions = np.asarray(emissions, dtype=np.float64)
    if emissions.ndim != 2 or emissions.shape[0] < 1:
        raise ValueError(f"emissions must be (n >= 1, T), got shape {emissions.shape}")
    if emissions.shape[1] != crf.num_tags:
        raise ValueError(f"emissions have {emissions.shape[1]} tags, CRF has {crf.num_tags}")
    return emissions


def score_sequence(emissions: np.ndarray, crf: CrfParams, tags) -> float:
    emissions = _check_instance(emissions, crf)
    tags = np.asarray(tags, dtype=np.int64)
    n, num_tags = emissions.shape
    if tags.shape != (n,):
        raise ValueError(f"got {tags.shape[0] if tags.ndim else 0} tags for {n} positions")
    if tags.min() < 0 or tags.max() >= num_tags:
        raise ValueError("tag index out of range")
    score = float(crf.start[tags[0]])
    for i in range(n):
        score += float(emissions[i, tags[i]])
    for i in range(n - 1):
        score += float(crf.transitions[tags[i], tags[i + 1]])
    score += float(crf.end[tags[n - 1]])
    return score


def _logsumexp(values: np.ndarray, axis: int | None = None) -> np.ndarray:
    top = np.max(values, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(values - top), axis=axis)) + np.squeeze(top, axis=axis)
    return out


def _forward_alphas(emissions: np.ndarray, crf: CrfParams) -> np.ndarray:
    n, num_tags = emissions.shape
    alpha = np.empty((n, num_tags))
    alpha[0] = crf.start + emissions[0]
    for i in range(1, n):
        alpha[i] = _logsumexp(alpha[i - 1][:, None] + crf.transitions, axis=0) + emissions[i]
    return alpha


def log_partition(emissions: np.ndarray, crf: CrfParams) -> float:
    """log sum over all T^n tag sequences of exp(score), via the forward pass."""
    emissions = _check_instance(emissions, crf)
    alpha = _forward_alphas(emissions, crf)
    return float(_logsumexp(alpha[-1] + crf.end, axis=0))


def _backward_betas(emissions: np.ndarray, crf: CrfParams) -> np.ndarray:
    n, num_tags = emissions.shape
    beta = np.empty((n, num_tags))
    beta[n - 1] = crf.end
    for i in range(n - 2, -1, -1):
        beta[i] = _logsumexp(crf.transitions + (emissions[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def marginals(emissions: np.ndarray, crf: CrfParams) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-position tag marginals, pairwise transition marginals, and log Z."""
    emissions = _check_instance(emissions, crf)
    n, num_tags = emissions.shape
    alpha = _forward_alphas(emissions, crf)
    beta = _backward_betas(emissions, crf)
    log_z = float(_logsumexp(alpha[-1] + crf.end, axis=0))
    unary = np.exp(alpha + beta - log_z)
    pairwise = np.zeros((max(n - 1, 0), num_tags, num_tags))
    for i in range(n - 1):
        pairwise[i] = np.exp(
            alpha[i][:, None]
            + crf.transitions
            + (emissions[i + 1] + beta[i + 1])[None, :]
            - log_z
        )
    return unary, pairwise, log_z


def nll_and_grad(
    emissions: np.ndarray, crf: CrfParams, tags
) -> tuple[float, np.ndarray, CrfParams]:
    """Negative log-likelihood of ``tags`` plus analytic gradients.

    grad_emissions[i, t] = P(tag_i = t) - 1{gold_i = t}; transition, start and
    end gradients come from the pairwise/boundary marginals minus the gold
    indicators.
    """
    emissions = _check_instance(emissions, crf)
    tags = np.asarray(tags, dtype=np.int64)
    n, num_tags = emissions.shape
    unary, pairwise, log_z = marginals(emissions, crf)
    gold_score = score_sequence(emissions, crf, tags)
    loss = log_z - gold_score

    grad_e = unary.copy()
    grad_e[np.arange(n), tags] -= 1.0

    grad = crf.zeros_like()
    if n > 1:
        grad.transitions[:] = pairwise.sum(axis=0)
        np.add.at(grad.transitions, (tags[:-1], tags[1:]), -1.0)
    grad.start[:] = unary[0]
    grad.start[tags[0]] -= 1.0
    grad.end[:] = unary[-1]
    grad.end[tags[-1]] -= 1.0
    return loss, grad_e, grad


def viterbi_decode(emissions: np.ndarray, crf: CrfParams) -> tuple[np.ndarray, float]:
    """Highest-scoring tag sequence and its score.

    The returned score is recomputed with :func:`score_sequence` on the
    decoded tags, so the pair is exactly self-consistent.
    """
    emissions = _check_instance(emissions, crf)
    n, num_tags = emissions.shape
    delta = crf.start + emissions[0]
    backptr = np.empty((n, num_tags), dtype=np.int64)
    for i in range(1, n):
        scores = delta[:, None] + crf.transitions  # [prev, cur]
        backptr[i] = np.argmax(scores, axis=0)  # ties: lower previous index
        delta = scores[backptr[i], np.arange(num_tags)] + emissions[i]
    last = int(np.argmax(delta + crf.end))
    tags = np.empty(n, dtype=np.int64)
    tags[n - 1] = last
    for i in range(n - 1, 0, -1):
        tags[i - 1] = backptr[i, tags[i]]
    return tags, score_sequence(emissions, crf, tags)
