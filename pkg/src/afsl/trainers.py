"""Trainers: the built-in nearest-prototype stand-in and an external-process adapter.

A trainer is any callable taking a :class:`TrainRequest` and returning an
:class:`InferenceResponse`. Each call starts from a fresh model trained on
the request's full support set; an empty support set stands for the
untuned pre-trained model.
"""
from __future__ import annotations

import time
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .datamodel import DatasetSplits, load_dataset
from .protocol import (DEFAULT_TIMEOUT, InferenceResponse, PoolInference, TrainRequest,
                       invoke_external, serve_once)
from .scoring import class_softmax
from .synthetic import decode_features


class Trainer(Protocol):
    def __call__(self, request: TrainRequest) -> InferenceResponse: ...


class SyntheticTrainer:
    """Nearest-prototype classifier over the feature vectors stored in sample text.

    Class prototypes are support-feature means per label; labels absent from
    the support fall back to the mean of all training features. Logits
    (one output position) are negative squared distances over ``temperature``.
    """

    def __init__(self, dataset: DatasetSplits, temperature: float = 1.0):
        self.dataset = dataset
        self.temperature = float(temperature)
        self._features = {s.id: decode_features(s.text) for s in dataset.all_samples()}
        train = np.vstack([self._features[s.id] for s in dataset.train])
        self._global_mean = train.mean(axis=0)

    def features(self, ids: Sequence[int]) -> np.ndarray:
        if not len(ids):
            return np.zeros((0, self._global_mean.shape[0]))
        return np.vstack([self._features[i] for i in ids])

    def prototypes(self, support: Sequence[tuple[int, Sequence[str]]], labels: Sequence[str]):
        index = {name: n for n, name in enumerate(labels)}
        members: list[list[int]] = [[] for _ in labels]
        for sid, names in support:
            for name in names:
                members[index[name]].append(sid)
        protos = np.empty((len(labels), self._global_mean.shape[0]))
        for n, ids in enumerate(members):
            protos[n] = self.features(ids).mean(axis=0) if ids else self._global_mean
        return protos

    def logits(self, x: np.ndarray, protos: np.ndarray | None, n_labels: int) -> np.ndarray:
        if protos is None:
            # cold start: uniform class scores
            return np.zeros((x.shape[0], n_labels))
        diff = x[:, None, :] - protos[None, :, :]
        return -(diff * diff).sum(axis=2) / self.temperature

    def __call__(self, request: TrainRequest) -> InferenceResponse:
        labels = list(request.labels)
        t0 = time.perf_counter()
        cold = not request.support
        protos = None if cold else self.prototypes(request.support, labels)
        t1 = time.perf_counter()

        pool_x = self.features(request.pool_ids)
        pool_logits = self.logits(pool_x, protos, len(labels))
        pool = [PoolInference(sid, pool_x[i].copy(), pool_logits[i:i + 1].copy())
                for i, sid in enumerate(request.pool_ids)]
        t2 = time.perf_counter()

        predictions = {}
        if request.eval_ids:
            probs = class_softmax(self.logits(self.features(request.eval_ids), protos, len(labels)))
            for i, sid in enumerate(request.eval_ids):
                top = int(np.argmax(probs[i]))
                if request.multi_label:
                    chosen = sorted({top, *np.flatnonzero(probs[i] >= 0.5).tolist()})
                else:
                    chosen = [top]
                predictions[sid] = [labels[n] for n in chosen]
        t3 = time.perf_counter()
        return InferenceResponse(request.request_id, pool, predictions,
                                 timings={"fine_tune": t1 - t0, "embedding": t2 - t1,
                                          "predict": t3 - t2},
                                 flags=["cold_start"] if cold else [])


class ExternalTrainer:
    """Runs an external command per exchange under ``workdir/iter_<k>/``."""

    def __init__(self, command: str | Sequence[str], workdir: str | Path,
                 timeout: float = DEFAULT_TIMEOUT):
        self.command = command
        self.workdir = Path(workdir)
        self.timeout = timeout

    def __call__(self, request: TrainRequest) -> InferenceResponse:
        return invoke_external(self.command, request, self.workdir / f"iter_{request.iteration}",
                               timeout=self.timeout)


_DATASET_CACHE: dict[str, SyntheticTrainer] = {}


def synthetic_worker(request_path: str | Path) -> Path:
    """Answer one request file with the synthetic trainer (external mode)."""

    def handle(req: TrainRequest) -> InferenceResponse:
        trainer = _DATASET_CACHE.get(req.dataset)
        if trainer is None:
            trainer = _DATASET_CACHE[req.dataset] = SyntheticTrainer(load_dataset(req.dataset))
        return trainer(req)

    return serve_once(request_path, handle)
