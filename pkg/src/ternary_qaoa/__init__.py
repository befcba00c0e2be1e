"""Ternary (long / flat / short) portfolio selection with QAOA.

Each asset gets two qubits (a short qubit and a long qubit) so the position
z in {-1, 0, +1} is their difference; the search happens either in the full
two-qubit-per-asset space with a quadratic budget penalty, or restricted to
the fixed-Hamming-weight subspace through excitation-preserving mixers and a
symmetric-superposition initial state.  A small dense simulator with a
per-gate depolarizing channel backs the experiments.
"""

__version__ = "0.1.0"

from .finance import PortfolioInstance, random_instance
from .problem import (
    FeasibleSetSummary,
    PenaltyModel,
    cost,
    decode_bitstring,
    enumerate_feasible,
    estimate_penalty_coefficient,
)

__all__ = [
    "PortfolioInstance",
    "random_instance",
    "FeasibleSetSummary",
    "PenaltyModel",
    "cost",
    "decode_bitstring",
    "enumerate_feasible",
    "estimate_penalty_coefficient",
    "__version__",
]
