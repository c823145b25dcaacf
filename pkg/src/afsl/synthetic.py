"""Gaussian-mixture datasets for desk-scale experiments.

Class counts are exact (not sampled), so label imbalance is fully
controlled. Feature vectors are stored in the sample text as
space-separated floats (``repr`` precision, so they parse back losslessly).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datamodel import DatasetSplits, LabelSet, Sample


@dataclass(frozen=True)
class MixtureSpec:
    num_classes: int
    dimension: int
    train_counts: tuple[int, ...]
    validation_counts: tuple[int, ...]
    test_counts: tuple[int, ...]
    sigma: float = 1.0
    means: tuple[tuple[float, ...], ...] | None = None
    separation: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        for name in ("train_counts", "validation_counts", "test_counts"):
            counts = tuple(int(c) for c in getattr(self, name))
            object.__setattr__(self, name, counts)
            if len(counts) != self.num_classes:
                raise ValueError(f"{name} needs one count per class")
            if any(c < 1 for c in counts):
                raise ValueError(f"{name} must all be >= 1")
        means = self.class_means()
        if len({tuple(m) for m in means.tolist()}) != self.num_classes:
            raise ValueError("class means must be distinct")

    def class_means(self) -> np.ndarray:
        if self.means is not None:
            means = np.asarray(self.means, dtype=np.float64)
            if means.shape != (self.num_classes, self.dimension):
                raise ValueError("means must be num_classes x dimension")
            return means
        means = np.zeros((self.num_classes, self.dimension))
        if self.dimension == 1:
            means[:, 0] = self.separation * np.arange(self.num_classes)
        else:
            angle = 2 * math.pi * np.arange(self.num_classes) / self.num_classes
            means[:, 0] = self.separation * np.cos(angle)
            means[:, 1] = self.separation * np.sin(angle)
        return means


def circle_spec(num_classes: int = 4, per_class: Sequence[int] = (500, 25, 250),
                sigma: float = 1.0, radius: float = 6.0, dimension: int = 2,
                seed: int = 0) -> MixtureSpec:
    """Balanced mixture with means on a circle of the given radius."""
    train, val, test = per_class
    return MixtureSpec(num_classes, dimension, (train,) * num_classes, (val,) * num_classes,
                       (test,) * num_classes, sigma=sigma, separation=radius, seed=seed)


def encode_features(vec: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in vec)


def decode_features(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.split()], dtype=np.float64)


def generate(spec: MixtureSpec) -> DatasetSplits:
    means = spec.class_means()
    root = np.random.SeedSequence(spec.seed)
    class_seeds = root.spawn(spec.num_classes + 1)
    per_split: dict[str, list[tuple[int, np.ndarray]]] = {"train": [], "validation": [], "test": []}
    for c in range(spec.num_classes):
        rng = np.random.default_rng(class_seeds[c])
        for split, counts in (("train", spec.train_counts), ("validation", spec.validation_counts),
                              ("test", spec.test_counts)):
            pts = means[c] + spec.sigma * rng.standard_normal((counts[c], spec.dimension))
            per_split[split].extend((c, p) for p in pts)

    order_rng = np.random.default_rng(class_seeds[-1])
    label_set = LabelSet(tuple(f"c{c}" for c in range(spec.num_classes)))
    next_id = 0
    out: dict[str, list[Sample]] = {}
    for split, items in per_split.items():
        perm = order_rng.permutation(len(items))
        samples = []
        for p in perm:
            c, vec = items[p]
            samples.append(Sample(next_id, encode_features(vec), frozenset({c})))
            next_id += 1
        out[split] = samples
    return DatasetSplits(label_set, out["train"], out["validation"], out["test"])
