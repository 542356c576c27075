"""Shared test oracles: finite differences and brute-force CRF enumeration.

These stay independent of the library code paths they check: the CRF oracle
enumerates all T^n paths and accumulates scores with plain Python floats in
the documented term order; the gradient oracle only ever calls the forward
function being differentiated.
"""

import itertools
import math

import numpy as np


def finite_difference(loss_fn, arrays: dict[str, np.ndarray], eps: float = 1e-5):
    """Central-difference gradients of ``loss_fn()`` w.r.t. every array entry.

    Arrays are perturbed in place and restored; ``loss_fn`` must read them
    afresh on every call.
    """
    grads = {}
    for name, arr in arrays.items():
        grad = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            up = loss_fn()
            flat[i] = original - eps
            down = loss_fn()
            flat[i] = original
            flat_grad[i] = (up - down) / (2.0 * eps)
        grads[name] = grad
    return grads


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-4) -> float:
    """Worst relative error, with an absolute floor for near-zero entries."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def assert_grads_close(analytic: dict, numeric: dict, tol: float = 1e-4) -> None:
    for name in numeric:
        err = max_rel_err(np.asarray(analytic[name]), numeric[name])
        assert err < tol, f"{name}: rel err {err:.3e} >= {tol}"


def crf_path_score(emissions, transitions, start, end, path) -> float:
    """Plain-float accumulation in the documented order: start, emissions,
    transitions, end."""
    score = float(start[path[0]])
    for i, tag in enumerate(path):
        score += float(emissions[i][tag])
    for i in range(len(path) - 1):
        score += float(transitions[path[i]][path[i + 1]])
    score += float(end[path[-1]])
    return score


def crf_enumerate(emissions, transitions, start, end):
    """All (path, score) pairs by exhaustive enumeration."""
    n, num_tags = np.asarray(emissions).shape
    out = []
    for path in itertools.product(range(num_tags), repeat=n):
        out.append((path, crf_path_score(emissions, transitions, start, end, path)))
    return out

def crf_brute_log_partition(emissions, transitions, start, end) -> float:
    scores = [score for _, score in crf_enumerate(emissions, transitions, start, end)]
    top = max(scores)
    return top + math.log(sum(math.exp(s - top) for s in scores))


def crf_brute_best(emissions, transitions, start, end):
    """(best score, best path) by exhaustive enumeration; ties keep the first."""
    best_path, best_score = None, -math.inf
    for path, score in crf_enumerate(emissions, transitions, start, end):
        if score > best_score:
            best_path, best_score = path, score
    return best_score, best_path


def random_crf_instance(rng, max_len: int = 6, max_tags: int = 4):
    """Random (emissions, CrfParams-like arrays, gold tags) with N(0,1) values."""
    n = int(rng.integers(1, max_len + 1))
    num_tags = int(rng.integers(1, max_tags + 1))
    emissions = rng.normal(size=(n, num_tags))
    transitions = rng.normal(size=(num_tags, num_tags))
    start = rng.normal(size=num_tags)
    end = rng.normal(size=num_tags)
    gold = rng.integers(0, num_tags, size=n)
    return emissions, transitions, start, end, gold
