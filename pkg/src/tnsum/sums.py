"""Summation of tensor networks that share a topology.

Two cases are supported, matrix chains and Tucker-format networks.  In both
the summed network has the same topology as the summands: contraction
nodes are stacked block-diagonally (along the superdiagonal for cores) and
physical nodes are concatenated so that only the contraction dimensions
grow.  Nothing is recompressed afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ShapeError
from .tensor import as_tensor, block_diag
from .tucker import TuckerNetwork

__all__ = [
    "MatrixChain",
    "BlockCore",
    "superdiag_stack",
    "sum_chains",
    "sum_tucker",
    "sum_many",
    "contract_chain",
]


@dataclass(frozen=True)
class MatrixChain:
    """The product ``links[0] @ links[1] @ ... @ links[-1]``."""

    links: tuple

    def __post_init__(self):
        links = tuple(as_tensor(a, 2) for a in self.links)
        if not links:
            raise ShapeError("a matrix chain needs at least one link")
        for k, a in enumerate(links):
            if a.ndim != 2:
                raise ShapeError(f"link {k} is not a matrix (order {a.ndim})")
        for k in range(len(links) - 1):
            if links[k].shape[1] != links[k + 1].shape[0]:
                raise ShapeError(f"links {k} and {k + 1} are not conformable: "
                                 f"{links[k].shape} @ {links[k + 1].shape}")
        object.__setattr__(self, "links", links)

    def __len__(self):
        return len(self.links)

    @property
    def shape(self) -> tuple:
        """Shape ``(I, J)`` of the represented matrix."""
        return self.links[0].shape[0], self.links[-1].shape[1]

    @property
    def ranks(self) -> tuple:
        """Interior dimensions ``R_1, ..., R_{N-1}``."""
        return tuple(a.shape[1] for a in self.links[:-1])


@dataclass(frozen=True)
class BlockCore:
    """Superdiagonal stack of two cores; `tensor` is zero outside the two blocks."""

    tensor: np.ndarray
    x_shape: tuple
    y_shape: tuple

    def x_block(self) -> np.ndarray:
        return self.tensor[tuple(slice(0, d) for d in self.x_shape)]

    def y_block(self) -> np.ndarray:
        return self.tensor[tuple(slice(d, None) for d in self.x_shape)]


def superdiag_stack(gx, gy) -> BlockCore:
    """Place `gx` at the leading corner and `gy` at the trailing corner of a zero tensor."""
    gx = as_tensor(gx)
    gy = as_tensor(gy)
    if gx.ndim != gy.ndim:
        raise ShapeError(f"cannot stack cores of orders {gx.ndim} and {gy.ndim}")
    out = np.zeros(tuple(a + b for a, b in zip(gx.shape, gy.shape)))
    out[tuple(slice(0, d) for d in gx.shape)] = gx
    out[tuple(slice(d, None) for d in gx.shape)] = gy
    return BlockCore(out, gx.shape, gy.shape)


def sum_chains(x: MatrixChain, y: MatrixChain) -> MatrixChain:
    """Chain whose product is ``contract_chain(x) + contract_chain(y)``.

    The first links are concatenated side by side, interior links are
    placed block-diagonally and the last links are stacked vertically.
    Interior ranks of `x` and `y` may differ.
    """
    if len(x) != len(y):
        raise ShapeError(f"chains have different lengths {len(x)} and {len(y)}")
    if len(x) < 2:
        raise ShapeError("chain summation needs chains of length >= 2")
    if x.shape != y.shape:
        raise ShapeError(f"chains represent matrices of different shapes {x.shape} and {y.shape}")
    first = np.hstack([x.links[0], y.links[0]])
    middle = [block_diag(a, b) for a, b in zip(x.links[1:-1], y.links[1:-1])]
    last = np.vstack([x.links[-1], y.links[-1]])
    return MatrixChain((first, *middle, last))


def _check_compatible(x: TuckerNetwork, y: TuckerNetwork):
    if x.order != y.order:
        raise ShapeError(f"networks have different orders {x.order} and {y.order}")
    if x.shape != y.shape:
        raise ShapeError(f"networks represent tensors of different shapes {x.shape} and {y.shape}")


def sum_tucker(x: TuckerNetwork, y: TuckerNetwork) -> TuckerNetwork:
    """Tucker network representing ``reconstruct(x) + reconstruct(y)``.

    Factor ``n`` is ``[x.factors[n], y.factors[n]]`` and the core is the
    superdiagonal stack of the two cores, so ranks add modewise.
    """
    _check_compatible(x, y)
    core = superdiag_stack(x.core, y.core).tensor
    factors = tuple(np.hstack([a, b]) for a, b in zip(x.factors, y.factors))
    return TuckerNetwork(core, factors)


def sum_many(nets) -> TuckerNetwork:
    """Left fold of :func:`sum_tucker` over `nets`."""
    nets = list(nets)
    if not nets:
        raise ValueError("sum_many needs at least one network")
    for k, net in enumerate(nets[1:], start=1):
        try:
            _check_compatible(nets[0], net)
        except ShapeError as exc:
            raise ShapeError(f"networks 0 and {k} are incompatible: {exc}") from None
    return reduce(sum_tucker, nets)


def contract_chain(x: MatrixChain) -> np.ndarray:
    return reduce(np.matmul, x.links)
