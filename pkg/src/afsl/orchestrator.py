"""Iterative selection loop, experiment configuration and records."""
from __future__ import annotations

import configparser
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import metrics
from .datamodel import DatasetSplits, LabelSet, PoolState, load_dataset
from .protocol import DEFAULT_TIMEOUT, InferenceResponse, ProtocolError, TrainRequest
from .samplers import (DEFAULT_ALPHA, FIRST_ITERATION_STRATEGIES, STRATEGIES,
                       UNCERTAINTY_STRATEGIES, SelectionError, SelectionRequest, needs, select)
from .scoring import build_embeddings
from .trainers import ExternalTrainer, SyntheticTrainer, Trainer

log = logging.getLogger(__name__)

TRAINERS = ("builtin-synthetic", "external")
RECORD_FORMAT = "afsl-experiment-record/1"
# Config fields that do not influence results; left out of record comparisons.
RUNTIME_FIELDS = ("trainer", "trainer_command", "trainer_timeout", "output_dir", "workers",
                  "threads")


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


def _int_list(value) -> list[int]:
    if isinstance(value, str):
        return [int(v) for v in value.replace(",", " ").split()]
    return [int(v) for v in value]


@dataclass
class ExperimentConfig:
    dataset: str
    first_strategy: str = "rep-en"
    later_strategy: str = "clun-en"
    m: int = 10
    iterations: int = 10
    alpha: int = DEFAULT_ALPHA
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    trainer: str = "builtin-synthetic"
    trainer_command: str = ""
    trainer_timeout: float = DEFAULT_TIMEOUT
    embedding_dim: int | None = None
    output_dir: str = "runs"
    uncertainty: str = "entropy"
    name: str = ""
    workers: int = 1
    threads: int = 1

    def __post_init__(self):
        self.seeds = _int_list(self.seeds)

    @property
    def strategy_label(self) -> str:
        return self.name or f"{self.first_strategy}+{self.later_strategy}"

    def validate(self) -> "ExperimentConfig":
        if self.first_strategy in UNCERTAINTY_STRATEGIES or self.first_strategy == "rep-sc":
            raise ConfigError(
                f"first_strategy {self.first_strategy!r} is not allowed: only strategies that do "
                "not involve uncertainty (random, rep-en) can be used within the first iteration, "
                "because the model has not been fine-tuned on anything yet")
        if self.first_strategy not in FIRST_ITERATION_STRATEGIES:
            raise ConfigError(f"first_strategy must be one of {', '.join(FIRST_ITERATION_STRATEGIES)}")
        if self.later_strategy not in STRATEGIES:
            raise ConfigError(f"later_strategy must be one of {', '.join(STRATEGIES)}")
        if self.m < 1:
            raise ConfigError("m must be at least 1")
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        if self.alpha < 1:
            raise ConfigError("alpha must be at least 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.trainer not in TRAINERS:
            raise ConfigError(f"trainer must be one of {', '.join(TRAINERS)}")
        if self.trainer == "external" and not self.trainer_command.strip():
            raise ConfigError("trainer = external needs trainer_command")
        if self.uncertainty not in ("entropy", "least-confidence"):
            raise ConfigError("uncertainty must be 'entropy' or 'least-confidence'")
        return self

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        """Read ``key = value`` lines (an optional ``[experiment]`` header is allowed).

        A relative dataset path is resolved against the config file's directory.
        """
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if not text.lstrip().startswith("["):
            text = "[experiment]\n" + text
        parser.read_string(text, source=str(path))
        if not parser.has_section("experiment"):
            raise ConfigError(f"{path}: missing [experiment] section")
        raw = dict(parser["experiment"])
        cfg = cls.from_dict(raw)
        if cfg.dataset and not Path(cfg.dataset).is_absolute():
            cfg.dataset = str((path.parent / cfg.dataset).resolve())
        return cfg

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        if "dataset" not in raw:
            raise ConfigError("config needs a dataset")
        kwargs = {}
        for key, value in raw.items():
            if key in ("m", "iterations", "alpha", "workers", "threads"):
                kwargs[key] = int(value)
            elif key == "embedding_dim":
                kwargs[key] = None if value in (None, "", "none") else int(value)
            elif key == "trainer_timeout":
                kwargs[key] = float(value)
            elif key == "seeds":
                kwargs[key] = _int_list(value)
            else:
                kwargs[key] = value if value is None else str(value)
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IterationRecord:
    iteration: int
    k: int
    chosen_ids: list[int]
    metrics: dict[str, float]
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class ExperimentRecord:
    config: dict
    seeds: list[int]
    runs: list[list[IterationRecord]]
    aggregates: list[dict[str, tuple[float, float]]] = field(default_factory=list)
    stddev_form: str = metrics.STDDEV_FORM

    def __post_init__(self):
        if not self.aggregates and self.runs:
            self.aggregates = self.recompute_aggregates()

    def recompute_aggregates(self) -> list[dict[str, tuple[float, float]]]:
        return metrics.aggregate([[it.metrics for it in run] for run in self.runs])

    @property
    def k_values(self) -> list[int]:
        return [it.k for it in self.runs[0]]

    def to_dict(self) -> dict:
        return {
            "format": RECORD_FORMAT,
            "config": self.config,
            "seeds": self.seeds,
            "stddev_form": self.stddev_form,
            "runs": [{"seed": s, "iterations": [asdict(it) for it in run]}
                     for s, run in zip(self.seeds, self.runs)],
            "aggregates": [{"iteration": i, "k": k,
                            **{m: {"mean": v[0], "stddev": v[1]} for m, v in agg.items()}}
                           for i, (k, agg) in enumerate(zip(self.k_values, self.aggregates))],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentRecord":
        if data.get("format") != RECORD_FORMAT:
            raise ValueError(f"not an experiment record (format {data.get('format')!r})")
        runs = [[IterationRecord(**it) for it in run["iterations"]] for run in data["runs"]]
        aggregates = [{m: (v["mean"], v["stddev"]) for m, v in agg.items()
                       if m not in ("iteration", "k")} for agg in data["aggregates"]]
        return cls(data["config"], [run["seed"] for run in data["runs"]], runs, aggregates,
                   data.get("stddev_form", metrics.STDDEV_FORM))

    def canonical(self) -> dict:
        """Record content that must be reproducible: no timings, no runtime settings."""
        d = self.to_dict()
        d["config"] = {k: v for k, v in d["config"].items() if k not in RUNTIME_FIELDS}
        for run in d["runs"]:
            for it in run["iterations"]:
                it.pop("timings", None)
        return d

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentRecord":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class Annotator:
    """Label provider for selected samples.

    By default returns gold labels (simulated oracle). In interactive mode it
    asks for label names per sample and re-prompts on invalid input; the
    number of re-prompts per id is kept in ``retries``.
    """

    def __init__(self, dataset: DatasetSplits, interactive: bool = False,
                 prompt: Callable[[str], str] = input, show: Callable[[str], None] = print):
        self.dataset = dataset
        self.interactive = interactive
        self.prompt = prompt
        self.show = show
        self.retries: dict[int, int] = {}
        self._train = {s.id: s for s in dataset.train}

    def _ask(self, sample) -> frozenset[int]:
        label_set = self.dataset.label_set
        self.show(f"[{sample.id}] {sample.text}")
        hint = ", ".join(label_set.labels)
        tries = 0
        while True:
            answer = self.prompt(f"labels ({hint}): ")
            names = [n.strip() for n in answer.split(",") if n.strip()]
            bad = [n for n in names if n not in label_set.labels]
            ok = names and not bad and (label_set.multi_label or len(names) == 1)
            if ok:
                self.retries[sample.id] = tries
                return frozenset(label_set.index(n) for n in names)
            tries += 1
            if bad:
                self.show(f"unknown label(s): {', '.join(bad)}")
            else:
                self.show("enter exactly one label" if not label_set.multi_label
                          else "enter at least one label")

    def annotate(self, ids: Sequence[int]) -> list[tuple[int, frozenset[int]]]:
        out = []
        for sid in ids:
            sample = self._train.get(sid)
            if sample is None:
                raise KeyError(f"id {sid} is not a training sample")
            out.append((sid, self._ask(sample) if self.interactive else frozenset(sample.gold_labels)))
        return out


def annotate(ids: Sequence[int], dataset: DatasetSplits) -> list[tuple[int, frozenset[int]]]:
    return Annotator(dataset).annotate(ids)


def _sampler_seed(seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([seed, iteration]).generate_state(1)[0])


def _embeddings(resp: InferenceResponse, pool_ids: Sequence[int], want: set[str], dim: int | None):
    if not want:
        return None, None
    by_id = {p.id: p for p in resp.pool}
    rows = [by_id[i] for i in pool_ids]
    en, sc = build_embeddings([r.class_logits for r in rows],
                              [r.en for r in rows] if "en" in want else None)
    if en is not None and dim is not None and en.shape[1] != dim:
        raise ExperimentError(f"en vectors have dimension {en.shape[1]}, config expects {dim}")
    return en, sc


def run_seed(config: ExperimentConfig, dataset: DatasetSplits, trainer: Trainer, seed: int,
             annotator: Annotator | None = None) -> list[IterationRecord]:
    """One seed of the iterative loop; returns one record per iteration."""
    label_set: LabelSet = dataset.label_set
    annotator = annotator or Annotator(dataset)
    pool = PoolState.from_train(dataset.train)
    val_ids = [s.id for s in dataset.validation]
    test = dataset.test
    test_ids = [s.id for s in test]
    gold = [s.gold_labels for s in test]

    def request(iteration: int, pool_ids: list[int], eval_ids: list[int]) -> TrainRequest:
        return TrainRequest(
            request_id=f"seed{seed}-iter{iteration}", iteration=iteration,
            labels=list(label_set.labels),
            support=[(sid, label_set.names(labels)) for sid, labels in pool.support],
            pool_ids=pool_ids, validation_ids=val_ids, eval_ids=eval_ids,
            multi_label=label_set.multi_label, dataset=config.dataset, seed=seed)

    def call(req: TrainRequest) -> InferenceResponse:
        try:
            return trainer(req)
        except ProtocolError as exc:
            raise ExperimentError(f"seed {seed}, iteration {req.iteration}: {exc}") from exc

    # iteration 0 embeds with the untuned model (empty support)
    resp = call(request(0, list(pool.unlabeled_ids), []))
    records = []
    for i in range(config.iterations):
        strategy = config.first_strategy if i == 0 else config.later_strategy
        if config.m > len(pool.unlabeled_ids):
            raise ExperimentError(f"seed {seed}, iteration {i}: cannot select m={config.m} "
                                  f"from {len(pool.unlabeled_ids)} remaining pool samples")
        t0 = time.perf_counter()
        pool_ids = list(pool.unlabeled_ids)
        en, sc = _embeddings(resp, pool_ids, needs(strategy), config.embedding_dim)
        t1 = time.perf_counter()
        req = SelectionRequest(pool_ids, config.m, _sampler_seed(seed, i), en=en, sc=sc,
                               alpha=config.alpha, iteration_index=i,
                               uncertainty=config.uncertainty, n_threads=config.threads)
        try:
            sel = select(strategy, req)
        except SelectionError as exc:
            raise ExperimentError(f"seed {seed}, iteration {i}: {exc}") from exc
        t2 = time.perf_counter()
        embed_time = resp.timings.get("embedding", 0.0) + (t1 - t0)

        pool.acquire(annotator.annotate(sel.chosen_ids))
        last = i == config.iterations - 1
        resp = call(request(i + 1, [] if last else list(pool.unlabeled_ids), test_ids))
        pred = [frozenset(label_set.index(n) for n in resp.predictions[sid]) for sid in test_ids]
        scores = {"micro_f1": metrics.micro_f1(gold, pred),
                  "macro_f1": metrics.macro_f1(gold, pred, len(label_set))}
        records.append(IterationRecord(i, pool.k, list(sel.chosen_ids), scores,
                                       {"embedding": embed_time, "sampling": t2 - t1,
                                        "fine_tune": resp.timings.get("fine_tune", 0.0)}))
        log.debug("seed %s iteration %d K=%d micro-F1=%.4f", seed, i, pool.k, scores["micro_f1"])
    return records


def make_trainer(config: ExperimentConfig, dataset: DatasetSplits, seed: int) -> Trainer:
    if config.trainer == "builtin-synthetic":
        return SyntheticTrainer(dataset)
    workdir = Path(config.output_dir) / config.strategy_label / f"seed_{seed}"
    return ExternalTrainer(config.trainer_command, workdir.resolve(), config.trainer_timeout)


def run_experiment(config: ExperimentConfig, dataset: DatasetSplits | None = None,
                   trainer_factory: Callable[[ExperimentConfig, DatasetSplits, int], Trainer] | None = None,
                   annotator: Annotator | None = None) -> ExperimentRecord:
    config.validate()
    if dataset is None:
        dataset = load_dataset(config.dataset)
    factory = trainer_factory or make_trainer

    def one(seed: int) -> list[IterationRecord]:
        return run_seed(config, dataset, factory(config, dataset, seed), seed, annotator)

    if config.workers > 1 and annotator is None:
        with ThreadPoolExecutor(max_workers=config.workers) as ex:
            runs = list(ex.map(one, config.seeds))
    else:
        runs = [one(s) for s in config.seeds]
    return ExperimentRecord(config.to_dict(), list(config.seeds), runs)


def alpha_sweep(config: ExperimentConfig, alphas: Sequence[int],
                dataset: DatasetSplits | None = None, **kwargs) -> dict[int, ExperimentRecord]:
    """Rerun ``config`` with UnRep as the later strategy for each alpha."""
    if dataset is None:
        dataset = load_dataset(config.dataset)
    out = {}
    for a in alphas:
        cfg = replace(config, alpha=int(a), later_strategy="unrep",
                      name=f"{config.first_strategy}+unrep(alpha={a})", seeds=list(config.seeds))
        out[int(a)] = run_experiment(cfg, dataset, **kwargs)
    return out
