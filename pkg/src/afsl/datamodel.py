"""Datasets, label sets, pool bookkeeping and dataset statistics.

Dataset files are line-delimited JSON. Each sample line has the fields
``id``, ``text``, ``labels`` (list of label names) and ``split``
(``train``, ``validation``/``val`` or ``test``). An optional first line
``{"label_set": [...], "multi_label": bool}`` fixes the label order; without
it, labels are ordered by name and ``multi_label`` is inferred.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

SPLIT_ALIASES = {"train": "train", "validation": "validation", "val": "validation",
                 "dev": "validation", "test": "test"}
SPLITS = ("train", "validation", "test")


class DatasetError(ValueError):
    """Malformed or inconsistent dataset content."""


@dataclass(frozen=True)
class LabelSet:
    labels: tuple[str, ...]
    multi_label: bool = False

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise DatasetError("a label set needs at least two labels")
        if any(not isinstance(l, str) or not l for l in labels):
            raise DatasetError("label names must be non-empty strings")
        if len(set(labels)) != len(labels):
            raise DatasetError(f"duplicate label names in {labels}")

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise DatasetError(f"unknown label name {name!r}") from None

    def names(self, indices: Iterable[int]) -> list[str]:
        return [self.labels[i] for i in sorted(indices)]


@dataclass(frozen=True)
class Sample:
    id: int
    text: str
    gold_labels: frozenset[int]


@dataclass
class DatasetSplits:
    label_set: LabelSet
    train: list[Sample]
    validation: list[Sample]
    test: list[Sample]

    def __post_init__(self):
        seen: set[int] = set()
        for split in SPLITS:
            for s in getattr(self, split):
                if s.id in seen:
                    raise DatasetError(f"duplicate sample id {s.id}")
                seen.add(s.id)
        self._index = {s.id: s for split in SPLITS for s in getattr(self, split)}

    def __getitem__(self, sample_id: int) -> Sample:
        return self._index[sample_id]

    def split_of(self, name: str) -> list[Sample]:
        return getattr(self, SPLIT_ALIASES[name])

    def sizes(self) -> dict[str, int]:
        return {split: len(getattr(self, split)) for split in SPLITS}

    def all_samples(self) -> list[Sample]:
        return [*self.train, *self.validation, *self.test]


@dataclass
class PoolState:
    """Unlabeled pool and the append-only support set."""

    unlabeled_ids: list[int]
    support: list[tuple[int, frozenset[int]]] = field(default_factory=list)

    @classmethod
    def from_train(cls, train: Sequence[Sample]) -> "PoolState":
        return cls(unlabeled_ids=[s.id for s in train])

    @property
    def k(self) -> int:
        return len(self.support)

    @property
    def support_ids(self) -> list[int]:
        return [sid for sid, _ in self.support]

    def acquire(self, annotated: Sequence[tuple[int, frozenset[int]]]) -> None:
        """Move annotated ids from the pool to the end of the support set."""
        taken = [sid for sid, _ in annotated]
        if len(set(taken)) != len(taken):
            raise ValueError("duplicate ids in acquisition")
        pool = set(self.unlabeled_ids)
        missing = [sid for sid in taken if sid not in pool]
        if missing:
            raise ValueError(f"ids not in the unlabeled pool: {missing}")
        drop = set(taken)
        self.unlabeled_ids = [sid for sid in self.unlabeled_ids if sid not in drop]
        self.support.extend((sid, frozenset(labels)) for sid, labels in annotated)


@dataclass(frozen=True)
class DatasetStats:
    label_frequencies: tuple[float, ...]
    uniformity: float

    @property
    def uniformity_percent(self) -> float:
        return 100.0 * self.uniformity


def _parse_record(line: str, lineno: int) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise DatasetError(f"line {lineno}: record must be an object")
    return rec


def load_dataset(path: str | Path, format: str = "jsonl",
                 label_set: LabelSet | None = None) -> DatasetSplits:
    if format != "jsonl":
        raise ValueError(f"unsupported dataset format {format!r}")
    path = Path(path)
    records: list[tuple[int, dict]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = _parse_record(line, lineno)
            if "label_set" in rec and label_set is None:
                label_set = LabelSet(tuple(rec["label_set"]), bool(rec.get("multi_label", False)))
                continue
            missing = [k for k in ("id", "text", "labels", "split") if k not in rec]
            if missing:
                raise DatasetError(f"line {lineno}: missing field(s) {', '.join(missing)}")
            if not isinstance(rec["id"], int) or isinstance(rec["id"], bool) or rec["id"] < 0:
                raise DatasetError(f"line {lineno}: id must be a non-negative integer")
            if not isinstance(rec["labels"], list) or not all(isinstance(l, str) for l in rec["labels"]):
                raise DatasetError(f"line {lineno}: labels must be a list of names")
            if rec["split"] not in SPLIT_ALIASES:
                raise DatasetError(f"line {lineno}: unknown split {rec['split']!r}")
            records.append((lineno, rec))

    if label_set is None:
        names = sorted({l for _, rec in records for l in rec["labels"]})
        multi = any(len(rec["labels"]) > 1 for _, rec in records)
        label_set = LabelSet(tuple(names), multi)

    splits: dict[str, list[Sample]] = {s: [] for s in SPLITS}
    seen: dict[int, int] = {}
    for lineno, rec in records:
        sid = rec["id"]
        if sid in seen:
            raise DatasetError(f"line {lineno}: duplicate id {sid} (first seen on line {seen[sid]})")
        seen[sid] = lineno
        try:
            gold = frozenset(label_set.index(l) for l in rec["labels"])
        except DatasetError as exc:
            raise DatasetError(f"line {lineno}: {exc}") from None
        if not gold:
            raise DatasetError(f"line {lineno}: sample {sid} has no labels")
        if not label_set.multi_label and len(gold) != 1:
            raise DatasetError(f"line {lineno}: sample {sid} has {len(gold)} labels in a single-label dataset")
        splits[SPLIT_ALIASES[rec["split"]]].append(Sample(sid, str(rec["text"]), gold))

    for name, samples in splits.items():
        if not samples:
            raise DatasetError(f"{path}: split {name!r} is empty")
    return DatasetSplits(label_set, splits["train"], splits["validation"], splits["test"])


def dataset_lines(ds: DatasetSplits) -> Iterable[str]:
    yield json.dumps({"label_set": list(ds.label_set.labels),
                      "multi_label": ds.label_set.multi_label})
    for split in SPLITS:
        for s in getattr(ds, split):
            yield json.dumps({"id": s.id, "text": s.text,
                              "labels": ds.label_set.names(s.gold_labels),
                              "split": split})


def save_dataset(ds: DatasetSplits, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for line in dataset_lines(ds):
            fh.write(line + "\n")


def uniformity_from_counts(counts: Sequence[int], num_records: int | None = None) -> DatasetStats:
    """U = sum_l |f(l) - 1/|L||.

    ``f(l)`` is count / total occurrences, or count / ``num_records`` when
    given (multi-label data, where one record can carry several labels).
    """
    counts = [int(c) for c in counts]
    if not counts:
        raise ValueError("no label counts")
    if any(c < 0 for c in counts):
        raise ValueError("negative label count")
    base = sum(counts) if num_records is None else int(num_records)
    if base <= 0:
        raise ValueError("uniformity of an empty label multiset")
    n = len(counts)
    freqs = tuple(c / base for c in counts)
    u = sum(abs(f - 1.0 / n) for f in freqs)
    return DatasetStats(freqs, u)


def uniformity(labels: Iterable[Iterable[int]], label_set: LabelSet) -> DatasetStats:
    records = [frozenset(l) for l in labels]
    if not records:
        raise ValueError("uniformity of an empty label multiset")
    counts = Counter(i for rec in records for i in rec)
    vec = [counts.get(i, 0) for i in range(len(label_set))]
    if label_set.multi_label:
        return uniformity_from_counts(vec, num_records=len(records))
    return uniformity_from_counts(vec)


def majority_label(train_labels: Iterable[Iterable[int]], num_labels: int) -> int:
    counts = Counter(i for rec in train_labels for i in rec)
    if not counts:
        raise ValueError("empty training labels")
    # lowest index wins ties
    return max(range(num_labels), key=lambda i: (counts.get(i, 0), -i))


def majority_baseline(train_labels: Sequence[Iterable[int]],
                      test_labels: Sequence[Iterable[int]],
                      num_labels: int | None = None) -> float:
    """Micro-F1 of always predicting the most frequent training label."""
    from .metrics import micro_f1

    train = [frozenset(l) for l in train_labels]
    test = [frozenset(l) for l in test_labels]
    if not train or not test:
        raise ValueError("majority baseline needs non-empty train and test labels")
    if num_labels is None:
        num_labels = 1 + max(i for rec in (*train, *test) for i in rec)
    top = majority_label(train, num_labels)
    return micro_f1(test, [frozenset({top})] * len(test))
