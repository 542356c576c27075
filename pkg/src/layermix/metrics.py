"""Token accuracy and exact-match chunk F1 over BIO tag sequences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class Span:
    label: str
    start: int  # inclusive
    end: int  # exclusive


@dataclass
class Score:
    precision: float
    recall: float
    f1: float
    n_gold: int
    n_pred: int
    n_correct: int


def token_accuracy(gold: Sequence[Sequence], pred: Sequence[Sequence]) -> float:
    """Fraction of positions where the predicted tag equals the gold tag."""
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    correct = 0
    total = 0
    for gold_seq, pred_seq in zip(gold, pred):
        if len(gold_seq) != len(pred_seq):
            raise ValueError("sentence length mismatch between gold and predicted tags")
        total += len(gold_seq)
        correct += sum(1 for g, p in zip(gold_seq, pred_seq) if g == p)
    return correct / total if total else 0.0


def extract_spans(tags: Sequence[str]) -> list[Span]:
    """Maximal chunks from a BIO sequence.

    B-X always starts a chunk; a bare I-X (no open X chunk) also starts one,
    the lenient CoNLL convention.  A chunk of type X ends before O, any B-*,
    or I-Y with Y != X.  Tags that are not O/B-*/I-* are treated as O.
    """
    spans: list[Span] = []
    label = None
    start = 0
    for i, tag in enumerate(tags):
        if tag.startswith("B-") and len(tag) > 2:
            if label is not None:
                spans.append(Span(label, start, i))
            label, start = tag[2:], i
        elif tag.startswith("I-") and len(tag) > 2:
            if label != tag[2:]:
                if label is not None:
                    spans.append(Span(label, start, i))
                label, start = tag[2:], i
        else:
            if label is not None:
                spans.append(Span(label, start, i))
                label = None
    if label is not None:
        spans.append(Span(label, start, len(tags)))
    return spans


def chunk_f1(gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]]) -> Score:
    """Micro-averaged exact-match F1: a predicted span counts only if its
    (label, start, end) all match a gold span.  P+R = 0 yields F1 = 0."""
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences vs {len(pred)} predicted")
    n_gold = n_pred = n_correct = 0
    for gold_seq, pred_seq in zip(gold, pred):
        if len(gold_seq) != len(pred_seq):
            raise ValueError("sentence length mismatch between gold and predicted tags")
        gold_spans = set(extract_spans(gold_seq))
        pred_spans = set(extract_spans(pred_seq))
        n_gold += len(gold_spans)
        n_pred += len(pred_spans)
        n_correct += len(gold_spans & pred_spans)
    precision = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Score(
        precision=precision,
        recall=recall,
        f1=f1,
        n_gold=n_gold,
        n_pred=n_pred,
        n_correct=n_correct,
    )
