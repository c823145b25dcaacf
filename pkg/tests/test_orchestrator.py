import math
import sys
from collections import Counter

import numpy as np
import pytest

from afsl.datamodel import DatasetSplits, LabelSet, Sample, save_dataset
from afsl.orchestrator import (Annotator, ConfigError, ExperimentConfig, ExperimentError,
                               ExperimentRecord, alpha_sweep, annotate, run_experiment)
from afsl.protocol import TrainRequest
from afsl.scoring import entropy, sc_embedding
from afsl.synthetic import circle_spec, encode_features, generate
from afsl.trainers import SyntheticTrainer

from . import oracles


@pytest.fixture(scope="module")
def small():
    return generate(circle_spec(per_class=(30, 3, 20), seed=1))


def cfg(**kw):
    base = dict(dataset="", first_strategy="rep-en", later_strategy="clun-en", m=4,
                iterations=3, seeds=[0, 1])
    base.update(kw)
    return ExperimentConfig(**base)


# ---- config ----

@pytest.mark.parametrize("strategy", ["un", "unrep", "clun-en", "clun-sc", "rep-sc"])
def test_first_strategy_uncertainty_rejected(strategy):
    with pytest.raises(ConfigError, match="do not involve uncertainty.*first iteration"):
        cfg(first_strategy=strategy).validate()


@pytest.mark.parametrize("field, value", [("m", 0), ("iterations", 0), ("seeds", []),
                                          ("later_strategy", "bogus"), ("trainer", "gpu")])
def test_config_invalid(field, value):
    with pytest.raises(ConfigError):
        cfg(**{field: value}).validate()


def test_config_file(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# comment\ndataset = data.jsonl\nfirst_strategy = random\nlater_strategy = un\n"
                 "m = 5\niterations = 2\nalpha = 3\nseeds = 1, 2, 3\n")
    c = ExperimentConfig.from_file(p).validate()
    assert c.dataset == str(tmp_path / "data.jsonl")
    assert (c.m, c.iterations, c.alpha, c.seeds) == (5, 2, 3, [1, 2, 3])
    p.write_text("dataset = x\ncolour = red\n")
    with pytest.raises(ConfigError, match="colour"):
        ExperimentConfig.from_file(p)


# ---- annotation ----

def test_annotate_gold(small):
    ids = [s.id for s in small.train[:3]]
    assert annotate(ids, small) == [(s.id, s.gold_labels) for s in small.train[:3]]
    assert annotate([], small) == []
    with pytest.raises(KeyError):
        annotate([small.test[0].id], small)


def test_interactive_reprompt(small):
    answers = iter(["nope", "c0, c1", "c2"])
    shown = []
    ann = Annotator(small, interactive=True, prompt=lambda _: next(answers), show=shown.append)
    sid = small.train[0].id
    assert ann.annotate([sid]) == [(sid, frozenset({2}))]
    assert ann.retries[sid] == 2
    assert any("unknown label" in s for s in shown)


# ---- synthetic trainer ----

def test_trainer_perfect_with_class_means():
    spec = circle_spec(per_class=(10, 2, 50), seed=3)
    ds = generate(spec)
    means = spec.class_means()
    # add one support sample per class located at the class mean
    extra = [Sample(10_000 + c, encode_features(means[c]), frozenset({c})) for c in range(4)]
    ds = DatasetSplits(ds.label_set, ds.train + extra, ds.validation, ds.test)
    trainer = SyntheticTrainer(ds)
    req = TrainRequest("x", 1, list(ds.label_set.labels), [(s.id, [f"c{c}"]) for c, s in enumerate(extra)],
                       [], [], [s.id for s in ds.test])
    resp = trainer(req)
    correct = sum(resp.predictions[s.id] == [f"c{next(iter(s.gold_labels))}"] for s in ds.test)
    assert correct == len(ds.test)


def test_trainer_cold_start_uniform(small):
    trainer = SyntheticTrainer(small)
    ids = [s.id for s in small.train[:5]]
    resp = trainer(TrainRequest("x", 0, list(small.label_set.labels), [], ids, [], []))
    assert resp.flags == ["cold_start"]
    for p in resp.pool:
        assert sc_embedding(p.class_logits).tolist() == [0.25] * 4
        assert entropy(sc_embedding(p.class_logits)) == pytest.approx(math.log(4), abs=1e-12)


def test_trainer_unseen_label_uses_global_mean(small):
    trainer = SyntheticTrainer(small)
    protos = trainer.prototypes([(small.train[0].id, ["c1"])], small.label_set.labels)
    assert np.array_equal(protos[0], trainer._global_mean)
    assert np.array_equal(protos[1], trainer.features([small.train[0].id])[0])


# ---- loop ----

def test_single_iteration(small):
    rec = run_experiment(cfg(first_strategy="random", iterations=1, seeds=[3]), small)
    (run,) = rec.runs
    assert len(run) == 1 and run[0].k == 4
    assert set(run[0].metrics) == {"micro_f1", "macro_f1"}


def test_k_sequence():
    ds = generate(circle_spec(per_class=(40, 2, 10), seed=2))
    rec = run_experiment(cfg(m=10, iterations=10, seeds=[0]), ds)
    assert rec.k_values == list(range(10, 101, 10))


@pytest.mark.parametrize("later", ["random", "rep-en", "rep-sc", "un", "unrep", "clun-en", "clun-sc"])
def test_runs_are_deterministic_and_disjoint(small, later):
    a = run_experiment(cfg(later_strategy=later, alpha=2), small)
    b = run_experiment(cfg(later_strategy=later, alpha=2), small)
    assert a.canonical() == b.canonical()
    for run in a.runs:
        ids = [i for it in run for i in it.chosen_ids]
        assert len(ids) == len(set(ids))
        assert [it.k for it in run] == [4 * (i + 1) for i in range(len(run))]
        assert {i for i in ids} <= {s.id for s in small.train}


def test_parallel_seeds_match_serial(small):
    serial = run_experiment(cfg(seeds=[0, 1, 2, 3]), small)
    parallel = run_experiment(cfg(seeds=[0, 1, 2, 3], workers=3), small)
    assert serial.canonical() == parallel.canonical()


def test_pool_exhaustion_reports_iteration(small):
    with pytest.raises(ExperimentError, match="iteration 4"):
        run_experiment(cfg(m=30, iterations=5, seeds=[0]), small)


def test_aggregates_recomputable(small, tmp_path):
    rec = run_experiment(cfg(seeds=[0, 1, 2]), small)
    path = rec.save(tmp_path / "rec.json")
    back = ExperimentRecord.load(path)
    assert back.canonical() == rec.canonical()
    for i, agg in enumerate(back.aggregates):
        for metric, (mean, std) in agg.items():
            ref = oracles.mean_std_two_pass([run[i].metrics[metric] for run in back.runs])
            assert abs(mean - ref[0]) < 1e-9 and abs(std - ref[1]) < 1e-9


class TrackedSample:
    """Sample whose gold labels record every read."""

    reads: list[int] = []

    def __init__(self, s: Sample):
        self.id, self.text, self._gold = s.id, s.text, s.gold_labels

    @property
    def gold_labels(self):
        TrackedSample.reads.append(self.id)
        return self._gold


@pytest.mark.parametrize("later", ["un", "unrep", "clun-en", "rep-sc", "random"])
def test_pool_labels_never_read(small, later):
    TrackedSample.reads = []
    tracked = DatasetSplits(small.label_set, [TrackedSample(s) for s in small.train],
                            small.validation, small.test)
    rec = run_experiment(cfg(later_strategy=later, seeds=[0]), tracked)
    chosen = [i for it in rec.runs[0] for i in it.chosen_ids]
    assert TrackedSample.reads == chosen


def test_later_random_is_exchangeable():
    ls = LabelSet(("a", "b"))
    train = [Sample(i, encode_features(np.array([float(i), 0.0])), frozenset({i % 2})) for i in range(10)]
    ds = DatasetSplits(ls, train, [Sample(100, "0 0", frozenset({0}))],
                       [Sample(101, "1 0", frozenset({1}))])
    seeds = list(range(400))
    rec = run_experiment(ExperimentConfig(dataset="", first_strategy="random", later_strategy="random",
                                          m=1, iterations=3, seeds=seeds), ds)
    counts = Counter(i for run in rec.runs for it in run for i in it.chosen_ids)
    expected = 3 * len(seeds) / 10
    chi2 = sum((counts[i] - expected) ** 2 / expected for i in range(10))
    assert chi2 < 27.88  # 0.999 quantile, 9 dof


@pytest.mark.xfail(reason="radius-6 / sigma-1 mixture saturates near 99.95% accuracy by K=20; "
                          "later gains are below test-set resolution", strict=False)
def test_accuracy_improves_with_k():
    ds = generate(circle_spec(per_class=(500, 25, 250), seed=4))
    rec = run_experiment(ExperimentConfig(dataset="", first_strategy="random", later_strategy="random",
                                          m=10, iterations=4, seeds=list(range(25))), ds)
    means = [agg["micro_f1"][0] for agg in rec.aggregates]
    inversions = sum(b <= a for a, b in zip(means, means[1:]))
    assert inversions <= 1
    assert means[-1] > means[0]


def test_external_mode_small_matches_in_process(small, tmp_path):
    path = tmp_path / "d.jsonl"
    save_dataset(small, path)
    base = cfg(dataset=str(path), later_strategy="unrep", alpha=2, seeds=[0, 1])
    inproc = run_experiment(base)
    ext_cfg = cfg(dataset=str(path), later_strategy="unrep", alpha=2, seeds=[0, 1],
                  trainer="external", trainer_command=f"{sys.executable} -m afsl trainer-synthetic",
                  output_dir=str(tmp_path / "runs"))
    external = run_experiment(ext_cfg)
    assert external.canonical() == inproc.canonical()
    assert (tmp_path / "runs" / "rep-en+unrep" / "seed_0" / "iter_3" / "response").exists()


def test_alpha_sweep(small):
    recs = alpha_sweep(cfg(seeds=[0]), [1, 2, 50], small)
    assert sorted(recs) == [1, 2, 50]
    assert recs[2].config["later_strategy"] == "unrep" and recs[2].config["alpha"] == 2
    assert recs[50].config["name"] == "rep-en+unrep(alpha=50)"
