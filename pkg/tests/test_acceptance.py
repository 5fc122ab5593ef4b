"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a PASS/FAIL line; the lines are repeated in the
"acceptance criteria" section of the pytest summary.  The full-scale
ETH-80 run needs ``TNSUM_ETH80`` pointing at a ``<class>/<object>/<image>``
directory (or a manifest CSV) and is skipped otherwise.
"""
import json
import os
import time

import numpy as np
import pytest

from conftest import dense_tucker, rel_err
from tnsum import cli
from tnsum.classify import kernel_matrix, predict_many, train_ovo
from tnsum.experiment import RunConfig, load_samples, run_many, summarize
from tnsum.sums import MatrixChain, contract_chain, sum_chains, sum_tucker
from tnsum.tensor import block_diag, kronecker, unfold
from tnsum.tucker import TuckerNetwork, hosvd, hosvd_many, normalize_core, reconstruct

TOL = 1e-12


def test_sum_of_tucker_oracle_equivalence(acceptance_report):
    started = time.perf_counter()
    worst = 0.0
    for k in range(100):
        rng = np.random.default_rng([2024, 0, k])
        order = int(rng.integers(3, 5))
        shape = tuple(int(d) for d in rng.integers(1, 11, size=order))
        rx = tuple(int(rng.integers(1, min(5, d) + 1)) for d in shape)
        ry = tuple(int(rng.integers(1, min(5, d) + 1)) for d in shape)
        x = TuckerNetwork(rng.standard_normal(rx), tuple(rng.standard_normal((d, r)) for d, r in zip(shape, rx)))
        y = TuckerNetwork(rng.standard_normal(ry), tuple(rng.standard_normal((d, r)) for d, r in zip(shape, ry)))
        dense = dense_tucker(x.core, x.factors) + dense_tucker(y.core, y.factors)
        worst = max(worst, rel_err(reconstruct(sum_tucker(x, y)), dense))
    elapsed = time.perf_counter() - started
    ok = worst <= TOL and elapsed < 10.0
    acceptance_report("sum-of-Tucker oracle equivalence", ok,
                      f"100 trials, worst rel error {worst:.2e} (tol 1e-12), {elapsed:.2f}s (limit 10s)")
    assert ok


def test_matrix_chain_oracle_equivalence(acceptance_report):
    started = time.perf_counter()
    worst = 0.0
    for k in range(100):
        rng = np.random.default_rng([2024, 1, k])
        n = int(rng.integers(2, 7))
        dx = [int(d) for d in rng.integers(1, 9, size=n + 1)]
        dy = [dx[0]] + [int(d) for d in rng.integers(1, 9, size=n - 1)] + [dx[-1]]
        x = MatrixChain(tuple(rng.standard_normal((dx[i], dx[i + 1])) for i in range(n)))
        y = MatrixChain(tuple(rng.standard_normal((dy[i], dy[i + 1])) for i in range(n)))
        px, py = x.links[0], y.links[0]
        for a, b in zip(x.links[1:], y.links[1:]):
            px, py = px @ a, py @ b
        worst = max(worst, rel_err(contract_chain(sum_chains(x, y)), px + py))
    elapsed = time.perf_counter() - started
    ok = worst <= TOL and elapsed < 2.0
    acceptance_report("matrix-chain oracle equivalence", ok,
                      f"100 trials, worst rel error {worst:.2e} (tol 1e-12), {elapsed:.2f}s (limit 2s)")
    assert ok


def test_structural_fixture(acceptance_report):
    rng = np.random.default_rng(7)
    cx = np.array([[1.0, 2.0], [5.0, 6.0]])
    cy = np.array([[3.0, 4.0], [7.0, 8.0]])
    ax, ay, bx, by = (rng.standard_normal((2, 2)) for _ in range(4))
    gx, gy = rng.standard_normal((2, 2, 2)), rng.standard_normal((2, 2, 2))
    z = sum_tucker(TuckerNetwork(gx, (ax, bx, cx)), TuckerNetwork(gy, (ay, by, cy)))
    k1, k2 = kronecker(cx, bx).T, kronecker(cy, by).T
    expected = np.hstack([ax, ay]) @ block_diag(unfold(gx, 0), unfold(gy, 0)) @ np.vstack([k1, k2])
    err = rel_err(unfold(reconstruct(z), 0), expected)
    ok = err <= TOL
    acceptance_report("structural fixture (mode-1 unfolding factorization)", ok, f"rel error {err:.2e}")
    assert ok


def test_hosvd_checks(acceptance_report):
    rng = np.random.default_rng(11)
    worst_full = 0.0
    for _ in range(5):
        t = rng.standard_normal((8, 9, 10))
        worst_full = max(worst_full, rel_err(reconstruct(hosvd(t, (8, 9, 10))), t))
    bounded = 0
    for k in range(100):
        r = np.random.default_rng([11, k])
        shape = tuple(int(d) for d in r.integers(2, 11, size=3))
        ranks = tuple(int(r.integers(1, d + 1)) for d in shape)
        t = r.standard_normal(shape)
        err = np.linalg.norm(t - reconstruct(hosvd(t, ranks))) ** 2
        bound = 0.0
        for n, rank in enumerate(ranks):
            m = unfold(t, n)
            ev = np.sort(np.linalg.eigvalsh(m @ m.T))[::-1]
            bound += np.clip(ev[rank:], 0.0, None).sum()
        bounded += err <= bound * (1 + 1e-10) + 1e-20
    ok = worst_full <= TOL and bounded == 100
    acceptance_report("HOSVD checks", ok,
                      f"full-rank 8x9x10 worst rel error {worst_full:.2e}; quasi-optimality {bounded}/100")
    assert ok


def test_normalize_core(acceptance_report):
    worst_inv = worst_norm = 0.0
    for k in range(100):
        rng = np.random.default_rng([13, k])
        order = int(rng.integers(2, 5))
        shape = tuple(int(d) for d in rng.integers(2, 8, size=order))
        ranks = tuple(int(rng.integers(1, d + 1)) for d in shape)
        scale = 10.0 ** rng.uniform(-3, 3)
        x = TuckerNetwork(scale * rng.standard_normal(ranks),
                          tuple(rng.standard_normal((d, r)) for d, r in zip(shape, ranks)))
        y = normalize_core(x)
        worst_inv = max(worst_inv, rel_err(reconstruct(y), reconstruct(x)))
        worst_norm = max(worst_norm, abs(np.linalg.norm(y.core) - 1.0))
    ok = worst_inv <= 1e-12 and worst_norm <= 1e-13
    acceptance_report("normalize_core", ok,
                      f"100 trials, invariance {worst_inv:.2e} (tol 1e-12), |norm-1| {worst_norm:.2e} (tol 1e-13)")
    assert ok


def test_svm_sanity(acceptance_report):
    rng = np.random.default_rng(17)
    x = np.vstack([rng.normal([-2.0, 0.0], 0.4, (40, 2)), rng.normal([2.0, 0.0], 0.4, (40, 2))])
    y = [0] * 40 + [1] * 40
    blobs_acc = np.mean(np.array(predict_many(train_ovo(x, y, C=10.0), x)) == y)
    xor_x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    xor_y = [0, 0, 1, 1]
    xor_ok = int(np.sum(np.array(predict_many(train_ovo(xor_x, xor_y, C=10.0, gamma=1.0), xor_x)) == xor_y))
    min_eig = np.inf
    for _ in range(50):
        f = rng.standard_normal((int(rng.integers(2, 60)), int(rng.integers(1, 40))))
        min_eig = min(min_eig, np.linalg.eigvalsh(kernel_matrix(f, f, float(rng.uniform(0.01, 2.0)))).min())
    ok = blobs_acc == 1.0 and xor_ok == 4 and min_eig >= -1e-10
    acceptance_report("SVM sanity", ok,
                      f"blobs train acc {blobs_acc:.3f}; XOR {xor_ok}/4; min Gram eigenvalue {min_eig:.2e} over 50 sets")
    assert ok


def test_desk_scale_pipeline(acceptance_report):
    started = time.perf_counter()
    cfg = RunConfig(realizations=5, seed=0, methods=("sum_of_tns", "raw_svm"))
    samples, labels = load_samples(cfg)
    networks = hosvd_many(samples, cfg.ranks)
    high = run_many(samples, labels, cfg, 0.8, networks)
    low = run_many(samples, labels, cfg, 0.1, networks)
    acc = summarize(high, "sum_of_tns")["mean_accuracy"]
    low_sum = summarize(low, "sum_of_tns")["mean_accuracy"]
    low_raw = summarize(low, "raw_svm")["mean_accuracy"]
    elapsed = time.perf_counter() - started
    ok = acc >= 0.90 and low_sum >= low_raw and elapsed < 300.0
    acceptance_report("desk-scale pipeline", ok,
                      f"mean acc at 0.8: {acc:.4f} (>= 0.90); at 0.1 sum-of-TNs {low_sum:.4f} vs raw SVM "
                      f"{low_raw:.4f}; {elapsed:.1f}s (limit 300s)")
    assert ok


def test_full_scale_eth80(acceptance_report, tmp_path):
    path = os.environ.get("TNSUM_ETH80")
    if not path:
        acceptance_report("full-scale ETH-80 reproduction", "SKIP", "set TNSUM_ETH80 to the dataset path")
        pytest.skip("ETH-80 dataset not supplied (TNSUM_ETH80)")
    out = tmp_path / "eth80"
    code = cli.main(["train-eval", "--dataset", path, "--train-fraction", "0.8", "--realizations", "20",
                     "--output-dir", str(out)])

    acc = json.loads((out / "accuracy.json").read_text())["methods"]["sum_of_tns"]["mean_accuracy"]
    ok = code == cli.EXIT_OK and 0.88 <= acc <= 0.96
    acceptance_report("full-scale ETH-80 reproduction", ok, f"mean accuracy {acc:.4f} (window [0.88, 0.96])")
    assert ok
