"""Summation of tensor networks and sum-of-TNs image classification."""

__version__ = "0.1.0"

from .sums import MatrixChain, contract_chain, sum_chains, sum_many, sum_tucker, superdiag_stack
from .tucker import TuckerNetwork, hosvd, normalize_core, reconstruct

__all__ = [
    "MatrixChain",
    "TuckerNetwork",
    "contract_chain",
    "hosvd",
    "normalize_core",
    "reconstruct",
    "sum_chains",
    "sum_many",
    "sum_tucker",
    "superdiag_stack",
]
