"""Active few-shot instance selection.

Scores unlabeled samples from a trainer's encoder vectors and class logits,
picks new support samples with one of several acquisition strategies, and
runs multi-seed iterative experiments against a pluggable trainer.
"""
__version__ = "0.1.0"

from .clustering import ClusterModel, kmeans, nearest_to_centroids
from .datamodel import (DatasetSplits, DatasetStats, LabelSet, PoolState, Sample, load_dataset,
                        majority_baseline, save_dataset, uniformity, uniformity_from_counts)
from .metrics import aggregate, macro_f1, micro_f1
from .orchestrator import ExperimentConfig, ExperimentRecord, run_experiment
from .samplers import STRATEGIES, Selection, SelectionRequest, select
from .scoring import class_softmax, entropy, mean_pool, score_vector

__all__ = [
    "ClusterModel", "DatasetSplits", "DatasetStats", "ExperimentConfig", "ExperimentRecord",
    "LabelSet", "PoolState", "STRATEGIES", "Sample", "Selection", "SelectionRequest",
    "aggregate", "class_softmax", "entropy", "kmeans", "load_dataset", "macro_f1",
    "majority_baseline", "mean_pool", "micro_f1", "nearest_to_centroids", "run_experiment",
    "save_dataset", "score_vector", "select", "uniformity", "uniformity_from_counts",
]
