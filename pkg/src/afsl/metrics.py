"""Micro/macro F1, multi-seed aggregation and table formatting."""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Iterable, Mapping, Sequence

# Standard deviation form used in every report (sample, n-1 denominator).
STDDEV_FORM = "sample"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: tuple[int, ...]
    fp: tuple[int, ...]
    fn: tuple[int, ...]

    @classmethod
    def from_sets(cls, gold: Sequence[Iterable[int]], pred: Sequence[Iterable[int]],
                  num_labels: int | None = None) -> "ConfusionCounts":
        if len(gold) != len(pred):
            raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predicted")
        gold = [frozenset(g) for g in gold]
        pred = [frozenset(p) for p in pred]
        if num_labels is None:
            num_labels = 1 + max((i for s in (*gold, *pred) for i in s), default=-1)
        tp = [0] * num_labels
        fp = [0] * num_labels
        fn = [0] * num_labels
        for g, p in zip(gold, pred):
            for i in g & p:
                tp[i] += 1
            for i in p - g:
                fp[i] += 1
            for i in g - p:
                fn[i] += 1
        return cls(tuple(tp), tuple(fp), tuple(fn))


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2 * tp / denom


def micro_f1(gold: Sequence[Iterable[int]], pred: Sequence[Iterable[int]]) -> float:
    c = ConfusionCounts.from_sets(gold, pred)
    return _f1(sum(c.tp), sum(c.fp), sum(c.fn))


def macro_f1(gold: Sequence[Iterable[int]], pred: Sequence[Iterable[int]],
             num_labels: int) -> float:
    """Unweighted mean of per-label F1 over all ``num_labels`` labels.

    A label that is never gold and never predicted scores 0.
    """
    c = ConfusionCounts.from_sets(gold, pred, num_labels)
    return sum(_f1(*t) for t in zip(c.tp, c.fp, c.fn)) / num_labels


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("cannot aggregate an empty sequence")
    mean = math.fsum(vals) / len(vals)
    if len(vals) == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)


def aggregate(per_seed: Sequence[Sequence[Mapping[str, float]]]) -> list[dict[str, tuple[float, float]]]:
    """Mean and sample stddev per (iteration, metric).

    ``per_seed[s][i]`` maps metric name to value for seed ``s``,
    iteration ``i``. Returns one ``{metric: (mean, std)}`` dict per iteration.
    """
    if not per_seed:
        raise ValueError("cannot aggregate zero seeds")
    n_iter = len(per_seed[0])
    if any(len(runs) != n_iter for runs in per_seed):
        raise ValueError("seeds have different iteration counts")
    out = []
    for i in range(n_iter):
        metrics = per_seed[0][i].keys()
        out.append({m: mean_std([runs[i][m] for runs in per_seed]) for m in metrics})
    return out


def format_percent(value: float) -> str:
    """Fraction to a percentage string, one decimal, round-half-even."""
    d = Decimal(repr(100.0 * float(value)))
    return str(d.quantize(Decimal("0.1"), rounding=ROUND_HALF_EVEN))
