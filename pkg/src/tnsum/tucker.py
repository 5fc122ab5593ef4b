"""Tucker-format networks: a core tensor with one factor matrix per mode."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateSampleError, ShapeError
from .linalg import extend_orthonormal, svd, svd_batch
from .tensor import as_tensor, dump_tensor, frobenius_norm, multi_mode_product, parse_tensor, unfold

__all__ = [
    "TuckerNetwork",
    "hosvd",
    "hosvd_many",
    "reconstruct",
    "normalize_core",
    "format_tucker",
    "parse_tucker",
    "save_tucker",
    "load_tucker",
]


@dataclass(frozen=True)
class TuckerNetwork:
    """``core x_0 factors[0] x_1 factors[1] ... x_{N-1} factors[N-1]``.

    ``factors[n]`` has shape ``(I_n, R_n)`` where ``R_n = core.shape[n]``.
    """

    core: np.ndarray
    factors: tuple

    def __post_init__(self):
        core = as_tensor(self.core)
        factors = tuple(as_tensor(f, 2) for f in self.factors)
        if len(factors) != core.ndim:
            raise ShapeError(f"core of order {core.ndim} needs {core.ndim} factors, got {len(factors)}")
        for n, f in enumerate(factors):
            if f.ndim != 2 or f.shape[1] != core.shape[n]:
                raise ShapeError(f"factor {n} has shape {f.shape}, expected (*, {core.shape[n]})")
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "factors", factors)

    @property
    def order(self) -> int:
        return self.core.ndim

    @property
    def shape(self) -> tuple:
        """Shape of the represented tensor."""
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self) -> tuple:
        return self.core.shape

    def parameter_count(self) -> int:
        """Number of stored scalars, factors plus core."""
        return sum(f.size for f in self.factors) + self.core.size


def _check_ranks(shape, ranks):
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(shape):
        raise ShapeError(f"need one rank per mode: shape {shape}, ranks {ranks}")
    for n, (r, d) in enumerate(zip(ranks, shape)):
        if not 1 <= r <= d:
            raise ValueError(f"rank {r} for mode {n} out of range [1, {d}]")
    return ranks


def hosvd(t, ranks: Sequence[int]) -> TuckerNetwork:
    """Truncated higher-order SVD with multilinear ranks `ranks`.

    Factor ``n`` holds the leading left singular vectors of the mode-``n``
    unfolding; the core is ``t`` projected onto them.  A rank larger than
    the rank of the unfolding is padded with orthonormal columns, which
    contribute zero core slices.
    """
    t = as_tensor(t)
    ranks = _check_ranks(t.shape, ranks)
    factors = [extend_orthonormal(svd(unfold(t, n)).u, r) for n, r in enumerate(ranks)]
    core = multi_mode_product(t, factors, transpose=True)
    return TuckerNetwork(core, tuple(factors))


def hosvd_many(samples, ranks: Sequence[int]) -> list[TuckerNetwork]:
    """:func:`hosvd` of every tensor in `samples` (all of one shape).

    Equivalent to ``[hosvd(t, ranks) for t in samples]`` but the per-mode
    SVDs are computed as one batch.
    """
    stack = np.stack([as_tensor(t) for t in samples])
    shape = stack.shape[1:]
    ranks = _check_ranks(shape, ranks)
    per_mode = []
    for n, r in enumerate(ranks):
        unfoldings = np.stack([unfold(t, n) for t in stack])
        per_mode.append([extend_orthonormal(res.u, r) for res in svd_batch(unfoldings)])
    out = []
    for i, t in enumerate(stack):
        factors = [per_mode[n][i] for n in range(len(ranks))]
        core = multi_mode_product(t, factors, transpose=True)
        out.append(TuckerNetwork(core, tuple(factors)))
    return out


def reconstruct(tk: TuckerNetwork) -> np.ndarray:
    return multi_mode_product(tk.core, tk.factors)


def normalize_core(tk: TuckerNetwork) -> TuckerNetwork:
    """Rescale to a unit-norm core without changing the represented tensor.

    With ``eta = ||core||`` the core is divided by ``eta`` and each of the
    ``N`` factors is multiplied by ``eta ** (1 / N)``.

    Raises
    ------
    DegenerateSampleError
        If the core is identically zero.
    """
    eta = frobenius_norm(tk.core)
    if eta == 0.0:
        raise DegenerateSampleError("cannot normalize a Tucker network with an all-zero core")
    scale = eta ** (1.0 / tk.order)
    return TuckerNetwork(tk.core / eta, tuple(f * scale for f in tk.factors))


# Record format, one text file per network:
#
#   tucker-network 1
#   order N
#   <core block>
#   <factor 0 block>
#   ...
#   <factor N-1 block>
#
# where every block is two lines in the tensor dump format of
# ``tnsum.tensor.dump_tensor`` ("shape ..." line, then values in storage order).

_MAGIC = "tucker-network 1"


def format_tucker(tk: TuckerNetwork) -> str:
    parts = [_MAGIC + "\n", f"order {tk.order}\n", dump_tensor(tk.core)]
    parts.extend(dump_tensor(f) for f in tk.factors)
    return "".join(parts)


def parse_tucker(text: str) -> TuckerNetwork:
    lines = text.strip().split("\n")
    if not lines or lines[0].strip() != _MAGIC:
        raise ValueError(f"not a Tucker record: expected first line {_MAGIC!r}")
    order_line = lines[1].split()
    if len(order_line) != 2 or order_line[0] != "order":
        raise ValueError("Tucker record is missing its 'order' line")
    order = int(order_line[1])
    blocks = lines[2:]
    if len(blocks) != 2 * (order + 1):
        raise ValueError(f"Tucker record of order {order} must hold {order + 1} tensor blocks")
    tensors = [parse_tensor(blocks[2 * k] + "\n" + blocks[2 * k + 1]) for k in range(order + 1)]
    return TuckerNetwork(tensors[0], tuple(tensors[1:]))


def save_tucker(tk: TuckerNetwork, path) -> None:
    Path(path).write_text(format_tucker(tk))


def load_tucker(path) -> TuckerNetwork:
    return parse_tucker(Path(path).read_text())
