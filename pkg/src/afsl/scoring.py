"""Sample embeddings: pooled encoder vectors (En) and class scores (Sc).

Sc for one sample takes the trainer's class-restricted logits, a ``T x N``
matrix (output position by class), applies a softmax over classes at every
position and keeps, per class, the largest probability over positions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class LabelVocabMap:
    """Class index -> vocabulary token id, plus the single-token label
    substitutions applied to multi-token class names."""

    token_ids: tuple[int, ...]
    single_token_substitutions: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.token_ids)) != len(self.token_ids):
            raise ValueError("class token ids must be distinct")

    def restrict(self, vocab_logits: np.ndarray) -> np.ndarray:
        """Select class columns from ``T x V`` vocabulary logits."""
        return np.asarray(vocab_logits, dtype=np.float64)[..., list(self.token_ids)]


def mean_pool(vectors: np.ndarray, mask: Sequence[bool] | None = None) -> np.ndarray:
    """Mean of the token vectors at unmasked positions."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] < 1:
        raise ValueError("token vectors must be a T x d matrix with d >= 1")
    if mask is None:
        mask = np.ones(vectors.shape[0], dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (vectors.shape[0],):
        raise ValueError("mask length must match the number of token vectors")
    if not mask.any():
        raise ValueError("mask selects no tokens")
    return vectors[mask].mean(axis=0)


def class_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim == 1:
        logits = logits[None, :]
    if logits.ndim != 2 or logits.shape[0] < 1 or logits.shape[1] < 1:
        raise ValueError("class logits must be a T x N matrix")
    if not np.all(np.isfinite(logits)):
        raise ValueError("class logits contain non-finite values")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def score_vector(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        return probs.copy()
    return probs.max(axis=0)


def sc_embedding(logits: np.ndarray) -> np.ndarray:
    return score_vector(class_softmax(logits))


def entropy_rows(scores: np.ndarray) -> np.ndarray:
    """Entropy (nats) of each row after renormalizing it to sum to 1."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[None, :]
    if np.any(scores < 0) or not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite and non-negative")
    totals = scores.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ValueError("entropy of an all-zero score vector")
    q = scores / totals
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(q > 0, q * np.log(q), 0.0)
    return np.maximum(-terms.sum(axis=1), 0.0)


def entropy(scores: np.ndarray) -> float:
    return float(entropy_rows(scores)[0])


def least_confidence_rows(scores: np.ndarray) -> np.ndarray:
    """1 - max renormalized score; larger means less confident."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[None, :]
    totals = scores.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise ValueError("confidence of an all-zero score vector")
    return 1.0 - (scores / totals).max(axis=1)


def build_embeddings(class_logits: Sequence[np.ndarray],
                     en_vectors: Sequence[np.ndarray] | None = None):
    """Stack per-sample Sc (and optionally En) rows into matrices."""
    sc = np.vstack([sc_embedding(l) for l in class_logits]) if len(class_logits) else None
    en = None
    if en_vectors is not None and len(en_vectors):
        en = np.vstack([np.asarray(v, dtype=np.float64) for v in en_vectors])
    return en, sc
