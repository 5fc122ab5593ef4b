"""Singular value decomposition by one-sided Jacobi rotations, and tSVD.

The Jacobi solver orthogonalizes the columns of the taller orientation of
the input.  Each sweep visits every column pair once; pairs are grouped by
a round-robin schedule so that the pairs of one round are disjoint and can
be rotated together with vectorized array operations.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, ShapeError

__all__ = ["SvdResult", "svd", "svd_batch", "tsvd", "tsvd_gram", "fix_signs", "extend_orthonormal", "MAX_SWEEPS"]

MAX_SWEEPS = 60
_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``m == u @ diag(s) @ v.T`` with ``s`` nonincreasing."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


@lru_cache(maxsize=None)
def _round_robin(n):
    """Rounds of disjoint column pairs covering every pair of ``range(n)`` once."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        pairs = []
        for k in range(size // 2):
            p, q = players[k], players[size - 1 - k]
            if p >= 0 and q >= 0:
                pairs.append((min(p, q), max(p, q)))
        if pairs:
            arr = np.array(pairs, dtype=np.intp)
            rounds.append((arr[:, 0], arr[:, 1]))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _jacobi_columns(a):
    """Rotate the columns of tall ``a`` until they are mutually orthogonal.

    Returns ``(w, v)`` with ``a @ v == w``, ``v`` orthogonal and the columns
    of ``w`` orthogonal to a relative tolerance of ``sqrt(rows) * eps``.
    A pair is rotated when ``|w_p . w_q| > tol * |w_p| |w_q|``; columns that
    are exactly zero are left alone.  Leading batch axes are allowed; the
    whole batch sweeps until every member has converged.
    """
    rows, cols = a.shape[-2:]
    # columns are held as rows so each rotation touches contiguous memory
    wt = np.array(np.swapaxes(np.asarray(a, dtype=np.float64), -1, -2), order="C", copy=True)
    vt = np.broadcast_to(np.eye(cols), a.shape[:-2] + (cols, cols)).copy()
    tol = max(np.sqrt(rows), 1.0) * _EPS
    rounds = _round_robin(cols)
    for _ in range(MAX_SWEEPS):
        rotated = False
        for p, q in rounds:
            wp = wt[..., p, :]
            wq = wt[..., q, :]
            alpha = np.einsum("...j,...j->...", wp, wp)
            beta = np.einsum("...j,...j->...", wq, wq)
            gamma = np.einsum("...j,...j->...", wp, wq)
            scale = np.sqrt(alpha) * np.sqrt(beta)
            need = (np.abs(gamma) > tol * scale) & (scale > 0)
            if not need.any():
                continue
            rotated = True
            g = np.where(need, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * g)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = np.where(need, c * t, 0.0)[..., None]
            c = np.where(need, c, 1.0)[..., None]
            wt[..., p, :], wt[..., q, :] = c * wp - s * wq, s * wp + c * wq
            vp = vt[..., p, :]
            vq = vt[..., q, :]
            vt[..., p, :], vt[..., q, :] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            return np.swapaxes(wt, -1, -2), np.swapaxes(vt, -1, -2)
    raise ConvergenceError(f"Jacobi SVD did not converge within {MAX_SWEEPS} sweeps")


def _complete_basis(u, good):
    """Replace the columns of ``u`` not flagged `good` by an orthonormal completion."""
    if good.all():
        return u
    k = int(good.sum())
    rows = u.shape[0]
    q, _ = np.linalg.qr(np.hstack([u[:, good], np.eye(rows)]))
    out = u.copy()
    out[:, ~good] = q[:, k:k + int((~good).sum())]
    return out


def extend_orthonormal(u, k):
    """First `k` columns of an orthonormal basis whose leading columns are ``u``.

    Used when more basis vectors are wanted than a thin SVD provides.
    """
    if k <= u.shape[1]:
        return u[:, :k]
    if k > u.shape[0]:
        raise ValueError(f"cannot fit {k} orthonormal columns in dimension {u.shape[0]}")
    padded = np.hstack([u, np.zeros((u.shape[0], k - u.shape[1]))])
    good = np.arange(k) < u.shape[1]
    return fix_signs(_complete_basis(padded, good))


def fix_signs(u, v=None):
    """Flip columns so each column of `u` has its largest-magnitude entry positive.

    Ties go to the lowest row index.  The same flips are applied to `v`.
    """
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[idx, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    if v is None:
        return u * signs
    return u * signs, v * signs


def _finish(w, right, wide):
    s = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-s, kind="stable")
    s, w, right = s[order], w[:, order], right[:, order]
    good = s > 0
    left = np.zeros_like(w)
    left[:, good] = w[:, good] / s[good]
    left = _complete_basis(left, good)
    u, v = (right, left) if wide else (left, right)
    u, v = fix_signs(u, v)
    return SvdResult(u=u, s=s, v=v)


def _check_input(m, order):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != order:
        raise ShapeError(f"expected an array of order {order}, got order {m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError("svd input contains non-finite entries")
    return m


def svd(m) -> SvdResult:
    """Thin SVD of a matrix.

    Raises
    ------
    ValueError
        If `m` contains NaN or infinite entries.
    ConvergenceError
        If the Jacobi iteration exceeds ``MAX_SWEEPS`` sweeps.
    """
    m = _check_input(m, 2)
    wide = m.shape[0] < m.shape[1]
    w, right = _jacobi_columns(m.T if wide else m)
    return _finish(w, right, wide)


def svd_batch(ms) -> list[SvdResult]:
    """:func:`svd` of every matrix in a stack of shape ``(batch, rows, cols)``.

    All members are swept together, so this is much faster than a Python
    loop over :func:`svd` for many small matrices.  Each result equals the
    single-matrix result up to rounding.
    """
    ms = _check_input(ms, 3)
    wide = ms.shape[1] < ms.shape[2]
    w, right = _jacobi_columns(np.swapaxes(ms, 1, 2) if wide else ms)
    return [_finish(w[b], right[b], wide) for b in range(ms.shape[0])]


def _check_rank(m, r):
    if not 1 <= r <= min(m.shape):
        raise ValueError(f"target rank {r} out of range [1, {min(m.shape)}] for a {m.shape} matrix")


def tsvd(m, r: int) -> np.ndarray:
    """First `r` left singular vectors of `m` as a ``rows x r`` matrix."""
    m = np.asarray(m, dtype=np.float64)
    _check_rank(m, r)
    return svd(m).u[:, :r]


def tsvd_gram(m, r: int) -> np.ndarray:
    """Same subspace as :func:`tsvd`, computed from the eigenvectors of ``m @ m.T``.

    Only the ``rows x rows`` Gram matrix is formed, which suits matrices with
    very many columns.  Accuracy of the vectors degrades like the square of
    the condition number, so it is a scalability path, not a reference.
    """
    m = np.asarray(m, dtype=np.float64)
    _check_rank(m, r)
    if not np.isfinite(m).all():
        raise ValueError("input contains non-finite entries")
    evals, evecs = np.linalg.eigh(m @ m.T)
    order = np.argsort(-evals, kind="stable")[:r]
    return fix_signs(evecs[:, order])
