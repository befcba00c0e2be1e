"""Classical problem layer: ternary cost function, feasibility, exhaustive
oracle, penalty-coefficient estimation, and the two evaluation metrics.

A portfolio is z in {-1, 0, +1}^N (short / none / long per asset); it is
feasible when sum(z) equals the budget B.  Encoded bitstrings use two qubits
per asset, short qubit at position 2a and long qubit at 2a+1, with
z_a = bit[2a+1] - bit[2a]; both (0,0) and (1,1) decode to the no-position
state.  Ternary vectors render as strings like "+-0+0" (asset 1 leftmost).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .finance import ParameterError, PortfolioInstance
from .sim import CapacityError

ENUMERATION_MAX_ASSETS = 16
PENALTY_MAX_ASSETS = 12
PENALTY_MAX_ITERATIONS = 64

# relative slack when collecting argmin ties from float cost values
ARGMIN_RTOL = 1e-12


class EstimationError(Exception):
    """Raised when penalty estimation fails to converge within the guard."""


class NormalizationError(ValueError):
    """Raised when a probability map does not sum to 1."""


@dataclass(frozen=True)
class PenaltyModel:
    """Quadratic constraint penalty: F + A (sum z - B)^2."""

    coefficient_a: float
    budget: int

    def __post_init__(self):
        if self.coefficient_a < 0:
            raise ParameterError(f"penalty coefficient must be >= 0, got {self.coefficient_a}")


@dataclass(frozen=True)
class FeasibleSetSummary:
    f_min: float
    f_max: float
    argmin_set: tuple[str, ...]
    feasible_count: int
    degenerate: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "f_min": self.f_min,
                "f_max": self.f_max,
                "argmin_set": list(self.argmin_set),
                "feasible_count": self.feasible_count,
                "degenerate": self.degenerate,
            },
            indent=2,
        )


@dataclass(frozen=True)
class DistributionMetrics:
    r_bar: float
    p_opt: float
    p_feasible: float


# ---------------------------------------------------------------------------
# encoding


def decode_bitstring(bits: str | np.ndarray) -> np.ndarray:
    """Ternary vector from a 2N-entry bit sequence (text position k = qubit k)."""
    if isinstance(bits, str):
        arr = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(bits, dtype=np.int8)
    if arr.size % 2 != 0:
        raise ParameterError(f"encoded bitstring length {arr.size} is odd")
    return (arr[1::2].astype(np.int8) - arr[0::2].astype(np.int8))


def encode_ternary(z: np.ndarray) -> str:
    """Canonical encoding: long (0,1), short (1,0), no position (0,0)."""
    out = []
    for v in np.asarray(z):
        if v == 1:
            out.append("01")
        elif v == -1:
            out.append("10")
        elif v == 0:
            out.append("00")
        else:
            raise ParameterError(f"ternary entry {v} outside {{-1,0,1}}")
    return "".join(out)


def ternary_string(z: np.ndarray) -> str:
    return "".join({-1: "-", 0: "0", 1: "+"}[int(v)] for v in z)


def parse_ternary(text: str) -> np.ndarray:
    table = {"-": -1, "0": 0, "+": 1}
    try:
        return np.array([table[ch] for ch in text], dtype=np.int8)
    except KeyError as exc:
        raise ParameterError(f"bad ternary character {exc}") from None


def decode_all_indices(n_assets: int) -> np.ndarray:
    """(2^{2N}, N) ternary matrix: row x is decode of basis index x."""
    idx = np.arange(1 << (2 * n_assets))
    cols = []
    for a in range(n_assets):
        short = (idx >> (2 * a)) & 1
        long_ = (idx >> (2 * a + 1)) & 1
        cols.append((long_ - short).astype(np.int8))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# cost


def cost(instance: PortfolioInstance, z: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    if z.shape != (instance.n_assets,):
        raise ParameterError(f"z shape {z.shape} does not match N={instance.n_assets}")
    risk = float(z @ instance.sigma @ z)
    ret = float(instance.mu @ z)
    return instance.q * risk - (1.0 - instance.q) * ret


def cost_many(instance: PortfolioInstance, z_rows: np.ndarray) -> np.ndarray:
    """Vectorized cost over rows of a (M, N) ternary matrix."""
    z = np.asarray(z_rows, dtype=float)
    risk = np.einsum("mi,ij,mj->m", z, instance.sigma, z)
    return instance.q * risk - (1.0 - instance.q) * (z @ instance.mu)


def constraint_gap(z: np.ndarray, budget: int) -> int:
    return int(np.sum(z)) - budget


def penalized_cost(instance: PortfolioInstance, z: np.ndarray,
                   penalty: PenaltyModel) -> float:
    gap = constraint_gap(np.asarray(z), penalty.budget)
    return cost(instance, z) + penalty.coefficient_a * gap * gap


# ---------------------------------------------------------------------------
# exhaustive scan over ternary space


def enumerate_ternary(n_assets: int) -> np.ndarray:
    """(3^N, N) matrix of all ternary vectors in ascending lexicographic
    order with -1 < 0 < +1 and asset 1 most significant."""
    if n_assets > ENUMERATION_MAX_ASSETS:
        raise CapacityError(f"3^{n_assets} enumeration exceeds N <= {ENUMERATION_MAX_ASSETS}")
    m = np.arange(3 ** n_assets)
    powers = 3 ** np.arange(n_assets - 1, -1, -1)
    return ((m[:, None] // powers) % 3 - 1).astype(np.int8)


def enumerate_feasible(instance: PortfolioInstance,
                       penalty: PenaltyModel | None = None) -> FeasibleSetSummary:
    """Scan all 3^N ternary vectors restricted to sum(z) = B.  The penalty
    argument is accepted for interface symmetry; it cannot change any value
    because the penalty term vanishes on feasible vectors."""
    z_all = enumerate_ternary(instance.n_assets)
    feas = z_all.sum(axis=1) == instance.budget
    z_feas = z_all[feas]
    if z_feas.shape[0] == 0:
        raise ParameterError("empty feasible set")
    f = cost_many(instance, z_feas)
    f_min = float(f.min())
    f_max = float(f.max())
    tol = ARGMIN_RTOL * max(1.0, abs(f_min), abs(f_max))
    argmin_rows = z_feas[f <= f_min + tol]
    return FeasibleSetSummary(
        f_min=f_min,
        f_max=f_max,
        argmin_set=tuple(ternary_string(row) for row in argmin_rows),
        feasible_count=int(z_feas.shape[0]),
        degenerate=bool(abs(f_max - f_min) <= tol),
    )


def estimate_penalty_coefficient(instance: PortfolioInstance) -> PenaltyModel:
    """Smallest penalty ladder reaching the separation condition: grow A until
    the infeasible minimum of F^(A) clears the midpoint of the feasible
    minimum and the feasible mean.

    The feasible mean weights each ternary vector by its number of encodings
    2^(count of zero entries), so the denominator is C(2N, N+B).  The argmin
    over infeasible states breaks ties toward the lexicographically lowest
    ternary vector, which pins down g(z*)^2 and hence the increment.
    """
    n, b = instance.n_assets, instance.budget
    if n > PENALTY_MAX_ASSETS:
        raise CapacityError(f"penalty estimation scans 3^N twice; N <= {PENALTY_MAX_ASSETS}")
    z_all = enumerate_ternary(n)
    gap = z_all.sum(axis=1).astype(np.int64) - b
    feas = gap == 0
    f_all = cost_many(instance, z_all)

    f_feas = f_all[feas]
    multiplicity = 2.0 ** (z_all[feas] == 0).sum(axis=1)
    f_min = float(f_feas.min())
    # fsum: the correctly rounded sum, so the mean does not depend on
    # accumulation order and stays reproducible across reimplementations
    f_bar = math.fsum((f_feas * multiplicity).tolist()) / math.comb(2 * n, n + b)
    threshold = 0.5 * (f_min + f_bar)

    f_inf = f_all[~feas]          # lex order preserved from enumerate_ternary
    g2 = (gap[~feas] ** 2).astype(float)
    if f_inf.size == 0:
        return PenaltyModel(0.0, b)

    a = 0.0
    for _ in range(PENALTY_MAX_ITERATIONS):
        vals = f_inf + a * g2
        k = int(np.argmin(vals))  # first occurrence = lex-lowest tie
        f_min_inf = float(vals[k])
        if f_min_inf >= threshold:
            return PenaltyModel(a, b)
        # the ideal step parks the binding value exactly at the threshold,
        # which can round an ulp short and stall; force one ulp of progress
        # so the exit predicate, monotone in a, eventually flips
        a = max(a + (threshold - f_min_inf) / g2[k], math.nextafter(a, math.inf))
    raise EstimationError(
        f"separation not reached within {PENALTY_MAX_ITERATIONS} iterations; last A = {a}"
    )


# ---------------------------------------------------------------------------
# metrics


def approximation_ratio(instance: PortfolioInstance, summary: FeasibleSetSummary,
                        z: np.ndarray) -> float:
    z = np.asarray(z)
    if constraint_gap(z, instance.budget) != 0:
        return 0.0
    if summary.degenerate:
        return 1.0
    return (cost(instance, z) - summary.f_max) / (summary.f_min - summary.f_max)


@dataclass(frozen=True)
class BasisTable:
    """Per-basis-index classical data for a fixed instance: decoded cost,
    constraint gap, feasibility, approximation ratio, and membership in the
    optimal set.  Index-aligned with simulator probability vectors."""

    n_assets: int
    budget: int
    cost_values: np.ndarray       # F(decode(x)), unpenalized
    gap: np.ndarray               # sum(decode(x)) - B
    feasible: np.ndarray          # bool
    ratio: np.ndarray             # r(decode(x)); 0 on infeasible
    optimal: np.ndarray           # bool, decode(x) in argmin set

    def scaled_penalized_values(self, scale: float, coefficient_a: float) -> np.ndarray:
        """lambda * F^(A) over every basis index."""
        return scale * (self.cost_values + coefficient_a * self.gap.astype(float) ** 2)


def build_basis_table(instance: PortfolioInstance,
                      summary: FeasibleSetSummary) -> BasisTable:
    n = instance.n_assets
    z_mat = decode_all_indices(n)
    f = cost_many(instance, z_mat)
    gap = z_mat.sum(axis=1).astype(np.int64) - instance.budget
    feasible = gap == 0
    if summary.degenerate:
        ratio = np.where(feasible, 1.0, 0.0)
    else:
        ratio = np.where(feasible, (f - summary.f_max) / (summary.f_min - summary.f_max), 0.0)
    # membership via base-3 codes, cheaper than row-wise comparison
    powers = 3 ** np.arange(n)
    codes = ((z_mat + 1).astype(np.int64) @ powers)
    opt_codes = {int((parse_ternary(s) + 1).astype(np.int64) @ powers) for s in summary.argmin_set}
    optimal = np.isin(codes, np.fromiter(opt_codes, dtype=np.int64)) & feasible
    return BasisTable(
        n_assets=n, budget=instance.budget, cost_values=f, gap=gap,
        feasible=feasible, ratio=ratio, optimal=optimal,
    )


def probabilities_from_mapping(dist: dict[str, float] | np.ndarray,
                               n_qubits: int) -> np.ndarray:
    """Dense probability vector from a bitstring map or array; validates
    nonnegativity and normalization within 1e-9."""
    if isinstance(dist, np.ndarray):
        p = np.asarray(dist, dtype=float)
        if p.size != 1 << n_qubits:
            raise ParameterError(f"probability vector has {p.size} entries for {n_qubits} qubits")
    else:
        p = np.zeros(1 << n_qubits)
        for bits, prob in dist.items():
            if len(bits) != n_qubits:
                raise ParameterError(f"bitstring {bits!r} is not {n_qubits} bits")
            p[sum(1 << k for k, ch in enumerate(bits) if ch == "1")] += prob
    if p.min() < -1e-12:
        raise NormalizationError(f"negative probability {p.min()}")
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise NormalizationError(f"distribution sums to {total}, not 1")
    return p


def distribution_metrics(instance: PortfolioInstance, summary: FeasibleSetSummary,
                         dist: dict[str, float] | np.ndarray,
                         table: BasisTable | None = None) -> DistributionMetrics:
    """Average approximation ratio and optimal-solution probability of a
    measurement distribution over the 2N-qubit register."""
    if table is None:
        table = build_basis_table(instance, summary)
    p = probabilities_from_mapping(dist, 2 * instance.n_assets)
    return DistributionMetrics(
        r_bar=float(p @ table.ratio),
        p_opt=float(p[table.optimal].sum()),
        p_feasible=float(p[table.feasible].sum()),
    )
