"""Acquisition strategies.

A sampler sees pool ids and embedding matrices only, never labels. All
strategies return ``m`` distinct pool ids and are deterministic in the
request (including its seed).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .clustering import kmeans, nearest_to_centroids
from .scoring import entropy_rows, least_confidence_rows

DEFAULT_ALPHA = 10

STRATEGIES = ("random", "rep-en", "rep-sc", "un", "unrep", "clun-en", "clun-sc")
FIRST_ITERATION_STRATEGIES = ("random", "rep-en")
UNCERTAINTY_STRATEGIES = ("un", "unrep", "clun-en", "clun-sc")


class SelectionError(ValueError):
    pass


@dataclass
class SelectionRequest:
    pool_ids: Sequence[int]
    m: int
    seed: int
    en: np.ndarray | None = None
    sc: np.ndarray | None = None
    alpha: int = DEFAULT_ALPHA
    iteration_index: int = 0
    # "entropy" (default) or "least-confidence", used by ClUn
    uncertainty: str = "entropy"
    n_threads: int = 1

    def __post_init__(self):
        self.pool_ids = [int(i) for i in self.pool_ids]
        n = len(self.pool_ids)
        if len(set(self.pool_ids)) != n:
            raise SelectionError("pool ids must be distinct")
        if self.m < 1:
            raise SelectionError("m must be at least 1")
        if self.m > n:
            raise SelectionError(f"cannot select m={self.m} from a pool of {n}")
        for name in ("en", "sc"):
            mat = getattr(self, name)
            if mat is not None:
                mat = np.asarray(mat, dtype=np.float64)
                if mat.ndim != 2 or mat.shape[0] != n:
                    raise SelectionError(f"{name} matrix must have one row per pool id")
                setattr(self, name, mat)

    @property
    def ids(self) -> np.ndarray:
        return np.asarray(self.pool_ids, dtype=np.int64)


@dataclass
class Selection:
    chosen_ids: list[int]
    rationale: list[object] = field(default_factory=list)


def _require(req: SelectionRequest, name: str, strategy: str) -> np.ndarray:
    mat = getattr(req, name)
    if mat is None:
        raise SelectionError(f"{strategy} needs the {name} embedding matrix")
    return mat


def _require_later_iteration(req: SelectionRequest, strategy: str) -> None:
    if req.iteration_index < 1:
        raise SelectionError(
            f"{strategy} relies on model uncertainty and cannot run in the first "
            "iteration; only random or representative sampling can")


def _uncertainty(req: SelectionRequest, sc: np.ndarray) -> np.ndarray:
    if req.uncertainty == "entropy":
        return entropy_rows(sc)
    if req.uncertainty == "least-confidence":
        return least_confidence_rows(sc)
    raise SelectionError(f"unknown uncertainty measure {req.uncertainty!r}")


def _most_uncertain(values: np.ndarray, ids: np.ndarray, count: int) -> np.ndarray:
    """Row positions of the ``count`` largest values, lowest id on ties."""
    order = np.lexsort((ids, -values))
    return order[:count]


def sample_random(req: SelectionRequest) -> Selection:
    rng = np.random.default_rng(req.seed)
    pos = rng.choice(len(req.pool_ids), size=req.m, replace=False)
    return Selection([req.pool_ids[p] for p in pos], ["random"] * req.m)


def sample_representative(req: SelectionRequest, embedding: str = "en") -> Selection:
    emb = _require(req, embedding, f"rep-{embedding}")
    model = kmeans(emb, req.m, req.seed, n_threads=req.n_threads)
    picks = nearest_to_centroids(model)
    return Selection([req.pool_ids[p] for p in picks], list(range(req.m)))


def sample_uncertainty(req: SelectionRequest) -> Selection:
    _require_later_iteration(req, "un")
    sc = _require(req, "sc", "un")
    ent = _uncertainty(req, sc)
    top = _most_uncertain(ent, req.ids, req.m)
    return Selection([req.pool_ids[p] for p in top], [float(ent[p]) for p in top])


def uncertainty_candidates(req: SelectionRequest) -> np.ndarray:
    """Pool positions of the alpha*m most uncertain rows, in pool order."""
    sc = _require(req, "sc", "unrep")
    count = min(req.alpha * req.m, len(req.pool_ids))
    top = _most_uncertain(_uncertainty(req, sc), req.ids, count)
    return np.sort(top)


def sample_uncertainty_representative(req: SelectionRequest) -> Selection:
    _require_later_iteration(req, "unrep")
    en = _require(req, "en", "unrep")
    if req.alpha < 1:
        raise SelectionError("alpha must be at least 1")
    cand = uncertainty_candidates(req)
    sub = SelectionRequest([req.pool_ids[p] for p in cand], req.m, req.seed,
                           en=en[cand], iteration_index=req.iteration_index,
                           n_threads=req.n_threads)
    return sample_representative(sub, "en")


def sample_cluster_uncertainty(req: SelectionRequest, embedding: str = "en") -> Selection:
    strategy = f"clun-{embedding}"
    _require_later_iteration(req, strategy)
    sc = _require(req, "sc", strategy)
    emb = _require(req, embedding, strategy)
    unc = _uncertainty(req, sc)
    model = kmeans(emb, req.m, req.seed, n_threads=req.n_threads)
    ids = req.ids
    chosen, tags = [], []
    for c in range(req.m):
        members = model.members(c)
        best = members[_most_uncertain(unc[members], ids[members], 1)[0]]
        chosen.append(int(ids[best]))
        tags.append((c, float(unc[best])))
    return Selection(chosen, tags)


SAMPLERS: dict[str, Callable[[SelectionRequest], Selection]] = {
    "random": sample_random,
    "rep-en": lambda req: sample_representative(req, "en"),
    "rep-sc": lambda req: sample_representative(req, "sc"),
    "un": sample_uncertainty,
    "unrep": sample_uncertainty_representative,
    "clun-en": lambda req: sample_cluster_uncertainty(req, "en"),
    "clun-sc": lambda req: sample_cluster_uncertainty(req, "sc"),
}


def needs(strategy: str) -> set[str]:
    """Embedding matrices a strategy reads."""
    return {
        "random": set(), "rep-en": {"en"}, "rep-sc": {"sc"}, "un": {"sc"},
        "unrep": {"en", "sc"}, "clun-en": {"en", "sc"}, "clun-sc": {"sc"},
    }[strategy]


def select(strategy: str, req: SelectionRequest) -> Selection:
    try:
        sampler = SAMPLERS[strategy]
    except KeyError:
        raise SelectionError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}") from None
    sel = sampler(req)
    assert len(set(sel.chosen_ids)) == req.m
    return sel
