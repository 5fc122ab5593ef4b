"""Gaussian-kernel SVM with one-vs-one voting, and the classification runs.

Binary problems are solved in the dual by sequential minimal optimization
with second-order working-set selection (maximal violating index ``i``,
then the ``j`` giving the largest objective decrease).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DatasetError, ShapeError
from .features import CommonBasis, basis_from_networks, check_homogeneous, project_many
from .linalg import tsvd
from .tensor import unfold, vec
from .tucker import hosvd_many

__all__ = [
    "gaussian_kernel",
    "kernel_matrix",
    "default_gamma",
    "BinarySvm",
    "SvmModel",
    "ConfusionMatrix",
    "train_binary",
    "train_ovo",
    "predict",
    "predict_many",
    "evaluate",
    "save_model",
    "load_model",
    "classify_sum_of_tns",
    "baseline_raw_svm",
    "baseline_tkd_concat",
    "tkd_concat_basis",
]

DEFAULT_C = 10.0
KKT_TOL = 1e-3
MAX_ITER = 1_000_000
_TAU = 1e-12
MODEL_VERSION = 1


def gaussian_kernel(a, b, gamma: float) -> float:
    """``exp(-gamma * ||a - b||^2)``."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"feature vectors of lengths {a.size} and {b.size}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    d = a - b
    return float(np.exp(-gamma * np.dot(d, d)))


def kernel_matrix(x, y, gamma: float) -> np.ndarray:
    """Gaussian kernel between the rows of `x` and the rows of `y`."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"feature lengths differ: {x.shape[1]} and {y.shape[1]}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    sq = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * (x @ y.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def default_gamma(x) -> float:
    """``1 / (d * var(x))`` over all entries of the training features."""
    x = np.asarray(x, dtype=np.float64)
    var = float(x.var())
    if var == 0.0:
        return 1.0
    return 1.0 / (x.shape[1] * var)


@dataclass(frozen=True)
class BinarySvm:
    """Decision function ``f(x) = sum_i dual_coef[i] k(sv_i, x) + bias``.

    ``f > 0`` votes for `positive`, otherwise for `negative` (class indices).
    """

    positive: int
    negative: int
    support_vectors: np.ndarray = field(repr=False)
    dual_coef: np.ndarray = field(repr=False)
    bias: float
    gamma: float
    kkt_gap: float = 0.0
    n_iter: int = 0

    def decision(self, x) -> np.ndarray:
        k = kernel_matrix(x, self.support_vectors, self.gamma)
        return k @ self.dual_coef + self.bias


def _smo(k, y, c, tol, max_iter):
    """Solve ``min 1/2 a'Qa - sum(a)``, ``0 <= a <= c``, ``y'a = 0`` with ``Q = yy' * k``.

    Returns ``(alpha, rho, gap, iterations)``; the decision function is
    ``sum_i alpha_i y_i k(x_i, x) - rho``.
    """
    n = len(y)
    q = (y[:, None] * y[None, :]) * k
    qd = np.diag(q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    for it in range(max_iter + 1):
        at_upper = alpha >= c
        at_lower = alpha <= 0
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)
        minus_yg = -y * grad
        cand = np.where(up, minus_yg, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        gmax2 = np.max(np.where(low, -minus_yg, -np.inf))
        gap = gmax + gmax2
        if gap < tol:
            break
        if it == max_iter:
            raise ConvergenceError(f"SMO did not reach KKT tolerance {tol} in {max_iter} iterations "
                                   f"(gap {gap:.3g})")
        grad_diff = gmax - minus_yg
        quad = qd[i] + qd - 2.0 * y[i] * y * q[i]
        quad = np.where(quad > 0, quad, _TAU)
        score = np.where(low & (grad_diff > 0), -(grad_diff ** 2) / quad, np.inf)
        j = int(np.argmin(score))

        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            qc = qd[i] + qd[j] + 2.0 * q[i, j]
            delta = (-grad[i] - grad[j]) / (qc if qc > 0 else _TAU)
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > c:
                    ni, nj = c, c - diff
            elif nj > c:
                nj, ni = c, c + diff
        else:
            qc = qd[i] + qd[j] - 2.0 * q[i, j]
            delta = (grad[i] - grad[j]) / (qc if qc > 0 else _TAU)
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > c:
                if ni > c:
                    ni, nj = c, total - c
                if nj > c:
                    nj, ni = c, total - c
            else:
                if nj < 0:
                    nj, ni = 0.0, total
                if ni < 0:
                    ni, nj = 0.0, total
        alpha[i], alpha[j] = ni, nj
        grad += q[i] * (ni - ai) + q[j] * (nj - aj)

    yg = y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(yg[free].mean())
    else:
        at_upper = alpha >= c
        ub_mask = np.where(pos, ~at_upper, at_upper)
        lb_mask = ~ub_mask
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2)
    return alpha, rho, float(gap), it


def _train_binary_kernel(k, x, y, c, gamma, tol, max_iter, positive=0, negative=1):
    alpha, rho, gap, iters = _smo(k, y, c, tol, max_iter)
    sv = alpha > 0
    return BinarySvm(positive, negative, x[sv].copy(), (alpha * y)[sv], -rho, gamma, gap, iters)


def train_binary(pos, neg, C: float = DEFAULT_C, gamma: float = 1.0,
                 tol: float = KKT_TOL, max_iter: int = MAX_ITER) -> BinarySvm:
    """Soft-margin Gaussian SVM separating `pos` (label +1) from `neg` (label -1)."""
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg, dtype=np.float64))
    if len(pos) == 0 or len(neg) == 0:
        raise DatasetError("both classes need at least one sample")
    x = np.vstack([pos, neg])
    if not np.isfinite(x).all():
        raise ValueError("features contain non-finite values")
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    return _train_binary_kernel(kernel_matrix(x, x, gamma), x, y, C, gamma, tol, max_iter)


@dataclass(frozen=True)
class SvmModel:
    classes: tuple
    binaries: tuple = field(repr=False)
    gamma: float
    C: float

    def decision_votes(self, x):
        """Vote counts and summed winning margins, each of shape ``(samples, classes)``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        k = len(self.classes)
        votes = np.zeros((len(x), k))
        margins = np.zeros((len(x), k))
        rows = np.arange(len(x))
        for b in self.binaries:
            f = b.decision(x)
            winner = np.where(f > 0, b.positive, b.negative)
            votes[rows, winner] += 1
            margins[rows, winner] += np.abs(f)
        return votes, margins


def train_ovo(x, labels, C: float = DEFAULT_C, gamma: float | None = None, classes=None,
              tol: float = KKT_TOL, max_iter: int = MAX_ITER) -> SvmModel:
    """One binary SVM per unordered class pair.

    `gamma` defaults to :func:`default_gamma` of `x`.  `classes` fixes the
    class table (sorted unique labels by default); each must have samples.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.asarray(labels)
    if len(x) != len(labels):
        raise ShapeError(f"{len(x)} feature rows but {len(labels)} labels")
    if not np.isfinite(x).all():
        raise ValueError("features contain non-finite values")
    classes = tuple(sorted(set(labels.tolist()))) if classes is None else tuple(classes)
    if len(classes) < 2:
        raise DatasetError(f"need at least 2 classes, got {len(classes)}")
    members = [np.flatnonzero(labels == c) for c in classes]
    for c, idx in zip(classes, members):
        if len(idx) == 0:
            raise DatasetError(f"class {c!r} has no training samples")
    if gamma is None:
        gamma = default_gamma(x)
    full = kernel_matrix(x, x, gamma)
    binaries = []
    for a, b in combinations(range(len(classes)), 2):
        idx = np.concatenate([members[a], members[b]])
        y = np.concatenate([np.ones(len(members[a])), -np.ones(len(members[b]))])
        binaries.append(_train_binary_kernel(full[np.ix_(idx, idx)], x[idx], y, C, gamma,
                                             tol, max_iter, positive=a, negative=b))
    return SvmModel(classes, tuple(binaries), float(gamma), float(C))


def predict_many(model: SvmModel, x) -> list:
    """Majority vote; ties go to the larger summed margin, then to the lower class index."""
    votes, margins = model.decision_votes(x)
    out = []
    for v, m in zip(votes, margins):
        tied = np.flatnonzero(v == v.max())
        best = tied[np.flatnonzero(m[tied] == m[tied].max())[0]]
        out.append(model.classes[best])
    return out


def predict(model: SvmModel, x):
    """Predicted class label for one feature vector (or FeatureVector)."""
    values = getattr(x, "values", x)
    return predict_many(model, np.asarray(values, dtype=np.float64).reshape(1, -1))[0]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows indexed by the true class and columns by the prediction."""

    counts: np.ndarray
    labels: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    def per_class_accuracy(self) -> np.ndarray:
        rows = self.counts.sum(1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.diag(self.counts) / rows

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["true\\predicted"] + [str(c) for c in self.labels])
            for lab, row in zip(self.labels, self.counts):
                w.writerow([str(lab)] + [repr(float(v)) for v in row])

    def to_dict(self) -> dict:
        return {"labels": [str(c) for c in self.labels], "counts": self.counts.tolist(),
                "accuracy": self.accuracy}


def evaluate(model: SvmModel, x, labels) -> ConfusionMatrix:
    labels = list(np.asarray(labels).tolist())
    index = {c: k for k, c in enumerate(model.classes)}
    unseen = sorted({str(c) for c in labels if c not in index})
    if unseen:
        raise DatasetError(f"test labels not known to the model: {', '.join(unseen)}")
    counts = np.zeros((len(model.classes),) * 2)
    if labels:
        for t, p in zip(labels, predict_many(model, x)):
            counts[index[t], index[p]] += 1
    return ConfusionMatrix(counts, model.classes)


def save_model(model: SvmModel, path) -> None:
    record = {
        "format": "tnsum-svm",
        "version": MODEL_VERSION,
        "classes": list(model.classes),
        "gamma": model.gamma,
        "C": model.C,
        "binaries": [
            {"positive": b.positive, "negative": b.negative, "bias": b.bias,
             "support_vectors": b.support_vectors.tolist(), "dual_coef": b.dual_coef.tolist(),
             "kkt_gap": b.kkt_gap, "n_iter": b.n_iter}
            for b in model.binaries
        ],
    }
    Path(path).write_text(json.dumps(record))


def load_model(path) -> SvmModel:
    record = json.loads(Path(path).read_text())
    if record.get("format") != "tnsum-svm":
        raise ValueError(f"{path}: not an SVM model record")
    if record.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {record.get('version')}")
    gamma = record["gamma"]
    binaries = tuple(
        BinarySvm(b["positive"], b["negative"],
                  np.array(b["support_vectors"], dtype=np.float64).reshape(len(b["dual_coef"]), -1),
                  np.array(b["dual_coef"], dtype=np.float64), b["bias"], gamma,
                  b.get("kkt_gap", 0.0), b.get("n_iter", 0))
        for b in record["binaries"]
    )
    return SvmModel(tuple(record["classes"]), binaries, gamma, record["C"])


def _fit_and_score(train_x, train_y, test_x, test_y, C, gamma):
    if len(test_y) == 0:
        raise DatasetError("test set is empty")
    model = train_ovo(train_x, train_y, C=C, gamma=gamma)
    return evaluate(model, test_x, test_y)


def classify_sum_of_tns(train, train_labels, test, test_labels, ranks: Sequence[int],
                        C: float = DEFAULT_C, gamma: float | None = None,
                        train_networks=None) -> ConfusionMatrix:
    """Fit the common basis on `train`, project both splits, train and score an OVO SVM.

    `train_networks` may hold precomputed ``hosvd`` results of the training
    samples (same order), which lets repeated splits share decompositions.
    """
    check_homogeneous(list(train) + list(test))
    if train_networks is None:
        train_networks = hosvd_many(train, ranks)
    basis = basis_from_networks(train_networks, ranks)
    return _fit_and_score(project_many(train, basis), train_labels,
                          project_many(test, basis), test_labels, C, gamma)


def baseline_raw_svm(train, train_labels, test, test_labels, C: float = DEFAULT_C,
                     gamma: float | None = None, standardize: bool = False) -> ConfusionMatrix:
    """OVO SVM on the vectorized samples themselves."""
    check_homogeneous(list(train) + list(test))
    train_x = np.vstack([vec(t) for t in train])
    test_x = np.vstack([vec(t) for t in test]) if len(test) else np.zeros((0, train_x.shape[1]))
    if standardize:
        mean = train_x.mean(0)
        std = train_x.std(0)
        std[std == 0] = 1.0
        train_x = (train_x - mean) / std
        test_x = (test_x - mean) / std
    return _fit_and_score(train_x, train_labels, test_x, test_labels, C, gamma)


def tkd_concat_basis(samples, ranks: Sequence[int]) -> CommonBasis:
    """Basis from one Tucker decomposition of all samples stacked along a trailing mode.

    Only the factors of the sample modes are needed, so the decomposition
    of the stacking mode is not computed.
    """
    samples = list(samples)
    check_homogeneous(samples)
    stacked = np.stack(samples, axis=-1)
    if len(ranks) != stacked.ndim - 1:
        raise ShapeError(f"need {stacked.ndim - 1} ranks, got {len(ranks)}")
    return CommonBasis(tuple(tsvd(unfold(stacked, n), r) for n, r in enumerate(ranks)))


def baseline_tkd_concat(train, train_labels, test, test_labels, ranks: Sequence[int],
                        C: float = DEFAULT_C, gamma: float | None = None) -> ConfusionMatrix:
    check_homogeneous(list(train) + list(test))
    basis = tkd_concat_basis(train, ranks)
    return _fit_and_score(project_many(train, basis), train_labels,
                          project_many(test, basis), test_labels, C, gamma)
