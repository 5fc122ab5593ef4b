"""Sum-of-TNs feature extraction.

Every training sample is Tucker-decomposed and its factors are rescaled so
that the core has unit norm.  Concatenating the rescaled factors of all
samples mode by mode is the factor part of the summed Tucker network of
the whole training set; its leading left singular vectors form a basis
shared by all samples.  A sample's feature vector is the vectorized core
obtained by projecting it onto that basis.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DatasetError, DegenerateSampleError, ShapeError
from .linalg import tsvd, tsvd_gram
from .tensor import as_tensor, dump_tensor, multi_mode_product, parse_tensor, vec
from .tucker import TuckerNetwork, hosvd_many, normalize_core

__all__ = [
    "CommonBasis",
    "FeatureVector",
    "check_homogeneous",
    "concatenated_factors",
    "fit_common_basis",
    "basis_from_networks",
    "project",
    "project_many",
    "as_network",
    "write_features_csv",
    "read_features_csv",
    "format_basis",
    "parse_basis",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CommonBasis:
    """One orthonormal ``I_n x R_n`` matrix per mode.

    `skipped` lists the ids of samples left out of the fit because their
    Tucker core was all zero.
    """

    factors: tuple
    skipped: tuple = ()

    @property
    def shape(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self) -> tuple:
        return tuple(f.shape[1] for f in self.factors)


@dataclass(frozen=True)
class FeatureVector:
    sample_id: object
    label: object
    values: np.ndarray = field(repr=False)


def check_homogeneous(samples) -> tuple:
    """Return the common shape of `samples`, raising ShapeError on a mismatch."""
    shape = None
    for k, t in enumerate(samples):
        s = np.shape(t)
        if shape is None:
            shape = s
        elif s != shape:
            raise ShapeError(f"sample {k} has shape {s}, expected {shape} like sample 0")
    if shape is None:
        raise DatasetError("no samples given")
    return shape


def concatenated_factors(networks, sample_ids=None):
    """Per-mode concatenation of the core-normalized factors of `networks`.

    Returns ``(matrices, skipped)``.  Networks with an all-zero core are
    reported and left out.
    """
    networks = list(networks)
    if sample_ids is None:
        sample_ids = list(range(len(networks)))
    blocks = None
    skipped = []
    for sid, tk in zip(sample_ids, networks):
        try:
            factors = normalize_core(tk).factors
        except DegenerateSampleError:
            log.warning("sample %s has an all-zero Tucker core; left out of the common basis", sid)
            skipped.append(sid)
            continue
        if blocks is None:
            blocks = [[] for _ in factors]
        for n, f in enumerate(factors):
            blocks[n].append(f)
    if blocks is None:
        raise DatasetError("every sample is degenerate (all-zero); no basis can be fit")
    return [np.hstack(b) for b in blocks], tuple(skipped)


def basis_from_networks(networks, ranks: Sequence[int], sample_ids=None, method="svd") -> CommonBasis:
    """Fit the common basis from already computed per-sample Tucker networks.

    `method` is ``"svd"`` (Jacobi SVD of each concatenated matrix) or
    ``"gram"`` (eigenvectors of its Gram matrix, for very many samples).
    """
    matrices, skipped = concatenated_factors(networks, sample_ids)
    if len(ranks) != len(matrices):
        raise ShapeError(f"need {len(matrices)} ranks, got {len(ranks)}")
    if method == "svd":
        trunc = tsvd
    elif method == "gram":
        trunc = tsvd_gram
    else:
        raise ValueError(f"unknown basis method {method!r}")
    return CommonBasis(tuple(trunc(m, r) for m, r in zip(matrices, ranks)), skipped)


def fit_common_basis(samples, ranks: Sequence[int], sample_ids=None, method="svd") -> CommonBasis:
    """Tucker-decompose each sample at `ranks` and fit the shared basis.

    Samples are used in the given order; the result is deterministic for a
    fixed order.
    """
    samples = list(samples)
    check_homogeneous(samples)
    networks = hosvd_many(samples, ranks)
    return basis_from_networks(networks, ranks, sample_ids, method)


def _check_sample(sample, basis):
    sample = as_tensor(sample)
    if sample.shape != basis.shape:
        raise ShapeError(f"sample of shape {sample.shape} does not match basis shape {basis.shape}")
    return sample


def project(sample, basis: CommonBasis, sample_id=None, label=None) -> FeatureVector:
    """Project `sample` onto `basis` and vectorize the resulting core."""
    sample = _check_sample(sample, basis)
    core = multi_mode_product(sample, basis.factors, transpose=True)
    return FeatureVector(sample_id, label, vec(core))


def project_many(samples, basis: CommonBasis) -> np.ndarray:
    """Feature matrix with one row per sample, in input order."""
    rows = [project(t, basis).values for t in samples]
    return np.vstack(rows) if rows else np.zeros((0, int(np.prod(basis.ranks))))


def as_network(feature: FeatureVector, basis: CommonBasis) -> TuckerNetwork:
    """Tucker network ``core x_0 A_0 ...`` approximating the projected sample."""
    core = np.asarray(feature.values).reshape(basis.ranks, order="F")
    return TuckerNetwork(core, basis.factors)


def write_features_csv(path, features) -> None:
    features = list(features)
    width = len(features[0].values) if features else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "label"] + [f"g{k + 1}" for k in range(width)])
        for fv in features:
            w.writerow([fv.sample_id, fv.label] + [repr(float(v)) for v in fv.values])


def read_features_csv(path) -> list[FeatureVector]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["id", "label"]:
        raise ValueError(f"{path}: not a feature CSV (header must start with id,label)")
    return [FeatureVector(r[0], r[1], np.array(r[2:], dtype=np.float64)) for r in rows[1:]]


_BASIS_MAGIC = "common-basis 1"


def format_basis(basis: CommonBasis) -> str:
    """Text record: magic line, ``order N`` line, then one tensor dump per mode."""
    parts = [_BASIS_MAGIC + "\n", f"order {len(basis.factors)}\n"]
    parts.extend(dump_tensor(f) for f in basis.factors)
    return "".join(parts)


def parse_basis(text: str) -> CommonBasis:
    lines = text.strip().split("\n")
    if lines[0].strip() != _BASIS_MAGIC:
        raise ValueError(f"not a basis record: expected first line {_BASIS_MAGIC!r}")
    order = int(lines[1].split()[1])
    blocks = lines[2:]
    if len(blocks) != 2 * order:
        raise ValueError(f"basis record of order {order} must hold {order} matrix blocks")
    return CommonBasis(tuple(parse_tensor(blocks[2 * k] + "\n" + blocks[2 * k + 1]) for k in range(order)))


def save_basis(basis: CommonBasis, path) -> None:
    Path(path).write_text(format_basis(basis))
