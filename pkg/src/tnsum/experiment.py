"""Experiment orchestration shared by the command line and the acceptance tests."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classify import ConfusionMatrix, DEFAULT_C, baseline_raw_svm, baseline_tkd_concat, classify_sum_of_tns
from .dataio import load_dataset, read_manifest, scan_image_tree, split_indices, synth_dataset
from .errors import DatasetError
from .features import check_homogeneous
from .tucker import hosvd_many

log = logging.getLogger(__name__)

METHODS = ("sum_of_tns", "raw_svm", "tkd_concat")


@dataclass
class RunConfig:
    """Every knob of a run; ``to_dict()`` is echoed into the outputs."""

    command: str = "train-eval"
    dataset: str | None = None
    synth_classes: int = 8
    synth_per_class: int = 41
    synth_shape: tuple = (32, 32, 3)
    synth_noise: float = 0.05
    synth_core_spread: float = 0.5
    synth_shared: float = 0.0
    image_size: tuple = (32, 32)
    pixel_scale: float = 1.0
    ranks: tuple = (3, 3, 3)
    train_fraction: float = 0.8
    fractions: tuple = ()
    realizations: int = 20
    seed: int = 0
    C: float = DEFAULT_C
    gamma: float | None = None
    standardize_raw: bool = False
    methods: tuple = ("sum_of_tns",)
    output_dir: str = "tnsum-out"

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def load_samples(config: RunConfig):
    """Samples and labels for `config`: a dataset path if given, otherwise synthetic data."""
    if config.dataset:
        path = Path(config.dataset)
        manifest = read_manifest(path) if path.is_file() else scan_image_tree(path)
        samples, labels = load_dataset(manifest, config.image_size)
        if config.pixel_scale != 1.0:
            samples = [s * config.pixel_scale for s in samples]
    else:
        samples, labels = synth_dataset(config.synth_classes, config.synth_per_class, config.synth_shape,
                                        config.ranks, config.synth_noise, config.seed,
                                        core_spread=config.synth_core_spread, shared=config.synth_shared)
    check_homogeneous(samples)
    return samples, list(labels)


@dataclass
class Realization:
    index: int
    fraction: float
    n_train: int
    n_test: int
    results: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"index": self.index, "fraction": self.fraction, "n_train": self.n_train,
                "n_test": self.n_test,
                "accuracy": {m: cm.accuracy for m, cm in self.results.items()},
                "confusion": {m: cm.to_dict() for m, cm in self.results.items()}}


def run_realization(samples, labels, networks, fraction, index, config: RunConfig) -> Realization:
    """One random stratified split, scored by every method in ``config.methods``."""
    tr, te = split_indices(labels, fraction, [config.seed, index])
    if not te:
        raise DatasetError(f"train fraction {fraction} leaves an empty test set")
    train = [samples[k] for k in tr]
    test = [samples[k] for k in te]
    ytr = [labels[k] for k in tr]
    yte = [labels[k] for k in te]
    out = Realization(index, fraction, len(tr), len(te))
    for method in config.methods:
        if method == "sum_of_tns":
            cm = classify_sum_of_tns(train, ytr, test, yte, config.ranks, config.C, config.gamma,
                                     train_networks=[networks[k] for k in tr])
        elif method == "raw_svm":
            cm = baseline_raw_svm(train, ytr, test, yte, config.C, config.gamma,
                                  standardize=config.standardize_raw)
        elif method == "tkd_concat":
            cm = baseline_tkd_concat(train, ytr, test, yte, config.ranks, config.C, config.gamma)
        else:
            raise ValueError(f"unknown method {method!r}")
        out.results[method] = cm
        log.info("realization %d fraction %.2f %s accuracy %.4f", index, fraction, method, cm.accuracy)
    return out


def run_many(samples, labels, config: RunConfig, fraction, networks=None, on_result=None):
    """All realizations at one fraction, sorted by realization index."""
    if networks is None and "sum_of_tns" in config.methods:
        networks = hosvd_many(samples, config.ranks)
    results = []
    for r in range(config.realizations):
        res = run_realization(samples, labels, networks, fraction, r, config)
        if on_result is not None:
            on_result(res)
        results.append(res)
    return results


def mean_confusion(results, method) -> ConfusionMatrix:
    cms = [r.results[method] for r in results]
    return ConfusionMatrix(np.mean([cm.counts for cm in cms], axis=0), cms[0].labels)


def summarize(results, method) -> dict:
    acc = [r.results[method].accuracy for r in results]
    return {"per_realization": acc, "mean_accuracy": float(np.mean(acc)),
            "std_accuracy": float(np.std(acc))}


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
