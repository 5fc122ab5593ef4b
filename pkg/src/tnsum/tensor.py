"""Dense tensor primitives.

Tensors are plain ``numpy.ndarray`` objects of dtype float64.  Whenever a
tensor is linearized (``vec``, unfoldings, the text dump format) the first
mode varies fastest, i.e. Fortran order.  Mode indices are zero-based, as
for numpy axes.

The mode-``n`` unfolding places mode ``n`` along the rows and orders the
remaining modes ``0, ..., n-1, n+1, ..., N-1`` along the columns with the
lower-numbered mode varying fastest.  Under this convention a Tucker tensor
``G x_0 A0 x_1 A1 ... x_{N-1} A{N-1}`` satisfies::

    unfold(X, n) == An @ unfold(G, n) @ kron(A{N-1}, ..., A{n+1}, A{n-1}, ..., A0).T
"""
from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

from .errors import ModeError, ShapeError

__all__ = [
    "as_tensor",
    "unfold",
    "fold",
    "mode_n_product",
    "multi_mode_product",
    "contract",
    "kronecker",
    "outer",
    "vec",
    "frobenius_norm",
    "add",
    "block_diag",
    "dump_tensor",
    "parse_tensor",
]


def as_tensor(t, min_order=1) -> np.ndarray:
    """Return ``t`` as a float64 array, checking order and dimensions."""
    arr = np.asarray(t, dtype=np.float64)
    if arr.ndim < min_order:
        raise ShapeError(f"expected a tensor of order >= {min_order}, got order {arr.ndim}")
    if any(d < 1 for d in arr.shape):
        raise ShapeError(f"every mode dimension must be >= 1, got shape {arr.shape}")
    return arr


def _check_mode(n, order):
    if not 0 <= n < order:
        raise ModeError(f"mode {n} out of range for a tensor of order {order}")


def unfold(t, n: int) -> np.ndarray:
    """Mode-`n` unfolding of `t`.

    Parameters
    ----------
    t : array_like
        Tensor of shape ``(I_0, ..., I_{N-1})``.
    n : int
        Mode to place along the rows.

    Returns
    -------
    ndarray
        Matrix of shape ``(I_n, prod_{k != n} I_k)``.
    """
    t = as_tensor(t)
    _check_mode(n, t.ndim)
    return np.moveaxis(t, n, 0).reshape((t.shape[n], -1), order="F")


def fold(m, n: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild a tensor of `shape` from its mode-`n` unfolding."""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    _check_mode(n, len(shape))
    rest = shape[:n] + shape[n + 1:]
    expected = (shape[n], int(np.prod(rest, dtype=np.int64)))
    if m.shape != expected:
        raise ShapeError(f"cannot fold a matrix of shape {m.shape} into {shape} along mode {n}; "
                         f"expected {expected}")
    return np.moveaxis(m.reshape((shape[n],) + rest, order="F"), 0, n)


def mode_n_product(t, m, n: int) -> np.ndarray:
    """Mode-`n` product ``t x_n m``; mode `n` of size I_n becomes ``m.shape[0]``."""
    t = as_tensor(t)
    m = as_tensor(m, min_order=2)
    _check_mode(n, t.ndim)
    if m.ndim != 2 or m.shape[1] != t.shape[n]:
        raise ShapeError(f"matrix of shape {m.shape} cannot act on mode {n} of size {t.shape[n]}")
    return np.moveaxis(np.tensordot(m, t, axes=(1, n)), 0, n)


def multi_mode_product(t, matrices, modes=None, transpose=False) -> np.ndarray:
    """Apply ``t x_{modes[0]} matrices[0] x_{modes[1]} matrices[1] ...``.

    With ``transpose=True`` each matrix is transposed first, which is the
    projection ``t x_0 A0^T x_1 A1^T ...``.
    """
    if modes is None:
        modes = range(len(matrices))
    out = as_tensor(t)
    for m, n in zip(matrices, modes):
        m = np.asarray(m, dtype=np.float64)
        out = mode_n_product(out, m.T if transpose else m, n)
    return out


def contract(x, y, m: int, n: int) -> np.ndarray:
    """(m, n)-contraction: sum over mode `m` of `x` and mode `n` of `y`.

    The result carries the remaining modes of `x` in order followed by the
    remaining modes of `y`.  Contracting two vectors yields a 0-d array.
    """
    x = as_tensor(x)
    y = as_tensor(y)
    _check_mode(m, x.ndim)
    _check_mode(n, y.ndim)
    if x.shape[m] != y.shape[n]:
        raise ShapeError(f"mode {m} of x has size {x.shape[m]} but mode {n} of y has size {y.shape[n]}")
    return np.tensordot(x, y, axes=(m, n))


def kronecker(a, b) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    return np.kron(as_tensor(a, 2), as_tensor(b, 2))


def outer(*vectors) -> np.ndarray:
    """Outer product ``v0 o v1 o ...`` of one or more vectors."""
    if not vectors:
        raise ShapeError("outer() needs at least one vector")
    vs = [as_tensor(v).ravel() for v in vectors]
    return reduce(np.multiply.outer, vs)


def vec(t) -> np.ndarray:
    """Flatten with the first mode varying fastest."""
    return as_tensor(t).ravel(order="F")


def frobenius_norm(t) -> float:
    flat = np.asarray(t, dtype=np.float64).ravel()
    return float(np.sqrt(np.dot(flat, flat)))


def add(x, y) -> np.ndarray:
    x = as_tensor(x)
    y = as_tensor(y)
    if x.shape != y.shape:
        raise ShapeError(f"cannot add tensors of shapes {x.shape} and {y.shape}")
    return x + y


def block_diag(a, b) -> np.ndarray:
    """Two-block diagonal matrix ``[[a, 0], [0, b]]``."""
    a = as_tensor(a, 2)
    b = as_tensor(b, 2)
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0]:, a.shape[1]:] = b
    return out


# Debug text format: "shape I0 I1 ..." on the first line, then all values
# in storage order separated by whitespace.  ``repr`` of a float64 is
# round-trip exact, so parse_tensor(dump_tensor(t)) is bit-identical.

def dump_tensor(t) -> str:
    t = as_tensor(t)
    header = "shape " + " ".join(str(d) for d in t.shape)
    body = " ".join(repr(float(v)) for v in vec(t))
    return header + "\n" + body + "\n"


def parse_tensor(text: str) -> np.ndarray:
    lines = text.strip().split("\n", 1)
    head = lines[0].split()
    if not head or head[0] != "shape":
        raise ValueError("tensor dump must start with a 'shape' line")
    shape = tuple(int(s) for s in head[1:])
    values = np.array(lines[1].split() if len(lines) > 1 else [], dtype=np.float64)
    if values.size != int(np.prod(shape, dtype=np.int64)):
        raise ShapeError(f"dump declares shape {shape} but holds {values.size} values")
    return values.reshape(shape, order="F")
