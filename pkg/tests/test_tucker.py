import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import dense_tucker, rel_err
from tnsum.errors import DegenerateSampleError, ShapeError
from tnsum.linalg import svd
from tnsum.tensor import kronecker, outer, unfold
from tnsum.tucker import (TuckerNetwork, format_tucker, hosvd, hosvd_many, load_tucker, normalize_core,
                          parse_tucker, reconstruct, save_tucker)


def random_network(rng, shape, ranks):
    return TuckerNetwork(rng.standard_normal(ranks), tuple(rng.standard_normal((d, r)) for d, r in zip(shape, ranks)))


def test_network_invariants(rng):
    tk = random_network(rng, (4, 5, 6), (2, 3, 1))
    assert tk.order == 3 and tk.shape == (4, 5, 6) and tk.ranks == (2, 3, 1)
    assert tk.parameter_count() == 4 * 2 + 5 * 3 + 6 * 1 + 6
    with pytest.raises(ShapeError):
        TuckerNetwork(np.zeros((2, 2)), (np.zeros((3, 2)),))
    with pytest.raises(ShapeError):
        TuckerNetwork(np.zeros((2, 2)), (np.zeros((3, 2)), np.zeros((3, 3))))


def test_reconstruct_identity_factors(rng):
    t = rng.standard_normal((3, 4, 2))
    tk = TuckerNetwork(t, tuple(np.eye(d) for d in t.shape))
    np.testing.assert_array_equal(reconstruct(tk), t)


def test_reconstruct_matches_rank_one_sum(rng):
    tk = random_network(rng, (4, 5, 3), (2, 3, 2))
    a, b, c = tk.factors
    g = tk.core
    total = sum(g[q, r, p] * outer(a[:, q], b[:, r], c[:, p])
                for q in range(2) for r in range(3) for p in range(2))
    assert rel_err(reconstruct(tk), total) <= 1e-13


def test_unfolding_kronecker_identity(rng):
    tk = random_network(rng, (4, 5, 3, 2), (2, 3, 2, 1))
    x = reconstruct(tk)
    f = tk.factors
    for n in range(4):
        chain = [f[k] for k in reversed(range(4)) if k != n]
        kron = chain[0]
        for m in chain[1:]:
            kron = kronecker(kron, m)
        assert rel_err(unfold(x, n), f[n] @ unfold(tk.core, n) @ kron.T) <= 1e-13


def test_hosvd_rank_one_exact(rng):
    t = outer(rng.standard_normal(5), rng.standard_normal(4), rng.standard_normal(3))
    tk = hosvd(t, (1, 1, 1))
    assert tk.ranks == (1, 1, 1)
    assert rel_err(reconstruct(tk), t) <= 1e-13


@pytest.mark.parametrize("shape", [(8, 9, 10), (3, 4, 5, 2), (1, 6, 1), (5, 5)])
def test_hosvd_full_rank_roundtrip(rng, shape):
    t = rng.standard_normal(shape)
    assert rel_err(reconstruct(hosvd(t, shape)), t) <= 1e-12


def test_hosvd_image_sized_core(rng):
    tk = hosvd(rng.random((32, 32, 3)), (3, 3, 3))
    assert tk.core.shape == (3, 3, 3)
    assert [f.shape for f in tk.factors] == [(32, 3), (32, 3), (3, 3)]


def test_hosvd_all_orthogonal_core(rng):
    t = rng.standard_normal((6, 7, 8))
    core = hosvd(t, t.shape).core
    for n in range(3):
        g = unfold(core, n)
        gram = g @ g.T
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() <= 1e-10 * np.abs(gram).max()


@given(st.integers(0, 10_000))
@settings(max_examples=100, deadline=None)
def test_truncated_hosvd_quasi_optimal(seed):
    rng = np.random.default_rng(seed)
    shape = tuple(int(d) for d in rng.integers(2, 9, size=3))
    ranks = tuple(int(rng.integers(1, d + 1)) for d in shape)
    t = rng.standard_normal(shape)
    err = np.linalg.norm(t - reconstruct(hosvd(t, ranks))) ** 2
    bound = sum(np.sum(svd(unfold(t, n)).s[r:] ** 2) for n, r in enumerate(ranks))
    assert err <= bound * (1 + 1e-10) + 1e-20


def test_hosvd_errors(rng):
    with pytest.raises(ValueError):
        hosvd(rng.standard_normal((3, 4)), (4, 1))
    with pytest.raises(ValueError):
        hosvd(rng.standard_normal((3, 4)), (0, 1))
    with pytest.raises(ShapeError):
        hosvd(rng.standard_normal((3, 4)), (1,))


def test_hosvd_many_matches_hosvd(rng):
    samples = [rng.standard_normal((6, 5, 3)) for _ in range(4)]
    for a, t in zip(hosvd_many(samples, (2, 2, 3)), samples):
        b = hosvd(t, (2, 2, 3))
        for fa, fb in zip(a.factors, b.factors):
            np.testing.assert_array_equal(fa, fb)
        np.testing.assert_array_equal(a.core, b.core)


def test_normalize_core_unit_norm_is_identity(rng):
    core = rng.standard_normal((2, 3, 2))
    tk = random_network(rng, (4, 5, 3), (2, 3, 2))
    tk = TuckerNetwork(core / np.linalg.norm(core), tk.factors)
    out = normalize_core(tk)
    for a, b in zip(out.factors, tk.factors):
        np.testing.assert_allclose(a, b, rtol=1e-15)


def test_normalize_core_eta_eight(rng):
    core = rng.standard_normal((2, 2, 2))
    core *= 8.0 / np.linalg.norm(core)
    tk = TuckerNetwork(core, tuple(rng.standard_normal((d, 2)) for d in (3, 4, 5)))
    out = normalize_core(tk)
    for a, b in zip(out.factors, tk.factors):
        np.testing.assert_allclose(a, 2.0 * b, rtol=1e-15)
    np.testing.assert_allclose(out.core, core / 8.0, rtol=1e-15)
    assert rel_err(reconstruct(out), reconstruct(tk)) <= 1e-12


def test_normalize_core_order_n_exponent(rng):
    tk = random_network(rng, (3, 2, 4, 2), (2, 2, 2, 1))
    eta = np.linalg.norm(tk.core)
    out = normalize_core(tk)
    np.testing.assert_allclose(out.factors[0], tk.factors[0] * eta ** 0.25, rtol=1e-14)


def test_normalize_core_zero_raises(rng):
    tk = TuckerNetwork(np.zeros((2, 2)), (np.eye(2), np.eye(2)))
    with pytest.raises(DegenerateSampleError):
        normalize_core(tk)


def test_record_roundtrip_bit_exact(rng, tmp_path):
    tk = random_network(rng, (4, 1, 3), (2, 1, 3))
    back = parse_tucker(format_tucker(tk))
    np.testing.assert_array_equal(back.core, tk.core)
    for a, b in zip(back.factors, tk.factors):
        np.testing.assert_array_equal(a, b)
    save_tucker(tk, tmp_path / "x.tk")
    again = load_tucker(tmp_path / "x.tk")
    np.testing.assert_array_equal(reconstruct(again), reconstruct(tk))
    assert format_tucker(again) == format_tucker(tk)


def test_record_rejects_garbage():
    with pytest.raises(ValueError):
        parse_tucker("not a record\n")


def test_reconstruct_agrees_with_einsum(rng):
    tk = random_network(rng, (4, 5, 3), (2, 3, 2))
    assert rel_err(reconstruct(tk), dense_tucker(tk.core, tk.factors)) <= 1e-13
