"""Circuit builders: cost unitary, the five mixers, initial states, and
gate/depth accounting.

Register layout: asset a (0-based) owns the short qubit 2a and the long
qubit 2a+1.  Between assets i < j the cost unitary carries four ZZ blocks,
one per qubit-pair combination, with the same-rail pairs (short-short,
long-long) rotated by +2*gamma*W_ij and the cross-rail pairs by
-2*gamma*W_ij; each asset then gets the linear rotations RZ(-2*gamma*w) on
its short qubit and RZ(+2*gamma*w) on its long qubit.  The layer is the
diagonal evolution of the pairwise-plus-linear part of the scaled cost;
the self-quadratic (z_i^2) phases are carried only by the merged variant,
whose intra-asset blocks supply them.  The combined mixer-phase layer uses
the same linear sign and adds the intra-asset and cross-rail ZZ phases
that its fused two-qubit blocks do not absorb.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .finance import ParameterError, PortfolioInstance
from .problem import PenaltyModel, decode_all_indices
from .sim import (
    MAX_STATEVECTOR_QUBITS,
    CapacityError,
    GateSequence,
    StateVector,
)

MIXER_STANDARD = "standard"
MIXER_XY_RING = "xy-ring"
MIXER_XY_PARITY_RING = "xy-parity-ring"
MIXER_XY_FULL = "xy-full"
MIXER_QAMPA = "qampa"

MIXER_KINDS = (
    MIXER_STANDARD,
    MIXER_XY_RING,
    MIXER_XY_PARITY_RING,
    MIXER_XY_FULL,
    MIXER_QAMPA,
)

# mixers whose dynamics stay inside the fixed-budget subspace; these start
# from the symmetric feasible superposition and forbid a penalty term
CONSTRAINED_MIXERS = (MIXER_XY_RING, MIXER_XY_PARITY_RING, MIXER_XY_FULL, MIXER_QAMPA)


class ConfigurationError(Exception):
    """Raised on inconsistent mixer / penalty / size combinations."""


def short_qubit(asset: int) -> int:
    return 2 * asset


def long_qubit(asset: int) -> int:
    return 2 * asset + 1


@dataclass(frozen=True)
class CostCoefficients:
    """Phase-rotation coefficients of the scaled cost: pair[i, j] (i <= j)
    carries W_ij = (scale/2)(q sigma_ij + A) and linear[i] carries
    w_i = (scale/2)[(1-q) mu_i + 2AB]."""

    n_assets: int
    budget: int
    scale: float
    pair: np.ndarray
    linear: np.ndarray
    coefficient_a: float


def mixer_scale(mixer: str, n_assets: int) -> float:
    """Objective scaling: 4N for the full-space mixer, 2N(2N-1) for the
    constrained family, tracking the number of mixer terms."""
    if mixer == MIXER_STANDARD:
        return 4.0 * n_assets
    if mixer in CONSTRAINED_MIXERS:
        return 2.0 * n_assets * (2 * n_assets - 1)
    raise ConfigurationError(f"unknown mixer {mixer!r}")


def build_cost_coefficients(instance: PortfolioInstance,
                            penalty: PenaltyModel | None,
                            mixer: str) -> CostCoefficients:
    a = 0.0 if penalty is None else penalty.coefficient_a
    if mixer != MIXER_STANDARD and a != 0.0:
        raise ConfigurationError(
            f"{mixer} enforces the budget exactly; penalty A={a} must be 0"
        )
    n = instance.n_assets
    lam = mixer_scale(mixer, n)
    pair = np.zeros((n, n))
    iu = np.triu_indices(n)
    pair[iu] = (lam / 2.0) * (instance.q * instance.sigma[iu] + a)
    linear = (lam / 2.0) * ((1.0 - instance.q) * instance.mu + 2.0 * a * instance.budget)
    return CostCoefficients(
        n_assets=n, budget=instance.budget, scale=lam,
        pair=pair, linear=linear, coefficient_a=a,
    )


# ---------------------------------------------------------------------------
# elementary blocks


def _zz_block(seq: GateSequence, qa: int, qb: int, theta: float):
    """exp(-i theta/2 * Z_qa Z_qb) as CNOT, RZ(theta) on qb, CNOT."""
    seq.append("cnot", (qa, qb))
    seq.append("rz", (qb,), (theta,))
    seq.append("cnot", (qa, qb))


def _xy_block(seq: GateSequence, qi: int, qj: int, beta: float):
    """exp(i beta (X_qi X_qj + Y_qi Y_qj)): basis change to the swap frame,
    RX/RZ core, change back."""
    seq.append("rx", (qi,), (-math.pi / 2,))
    seq.append("rx", (qj,), (math.pi / 2,))
    seq.append("cnot", (qi, qj))
    seq.append("rx", (qi,), (-2.0 * beta,))
    seq.append("rz", (qj,), (2.0 * beta,))
    seq.append("cnot", (qi, qj))
    seq.append("rx", (qi,), (math.pi / 2,))
    seq.append("rx", (qj,), (-math.pi / 2,))


def _qampa_block(seq: GateSequence, qi: int, qj: int, beta: float, g: float):
    """exp(i beta (XX + YY) - i g ZZ) as a 3-CNOT block with closed-form
    single-qubit U angles (valid because XX, YY, ZZ commute).  Equals the
    target up to global phase at machine precision."""
    half_pi = math.pi / 2
    seq.append("u", (qi,), (half_pi, -half_pi, math.pi))
    seq.append("u", (qj,), (half_pi, half_pi, math.pi))
    seq.append("cnot", (qj, qi))
    seq.append("u", (qi,), (0.0, half_pi, 0.0))
    seq.append("u", (qj,), (half_pi, 2.0 * beta, math.pi))
    seq.append("cnot", (qi, qj))
    seq.append("u", (qi,), (half_pi, 0.0, math.pi - 2.0 * beta))
    seq.append("u", (qj,), (0.0, 2.0 * g, 0.0))
    seq.append("cnot", (qi, qj))


# ---------------------------------------------------------------------------
# cost unitary


def build_cost_unitary(coeffs: CostCoefficients, gamma: float) -> GateSequence:
    """Diagonal phase layer: four ZZ blocks per asset pair plus the linear
    single-qubit rotations.  There is no intra-asset ZZ block, so the
    self-quadratic phases stay out of this layer; the linear rotation signs
    match the merged mixer-phase layer."""
    n = coeffs.n_assets
    seq = GateSequence(2 * n)
    seq.barrier("cost-unitary")
    for i in range(n):
        for j in range(i + 1, n):
            theta = 2.0 * gamma * coeffs.pair[i, j]
            _zz_block(seq, short_qubit(i), short_qubit(j), theta)
            _zz_block(seq, short_qubit(i), long_qubit(j), -theta)
            _zz_block(seq, long_qubit(i), short_qubit(j), -theta)
            _zz_block(seq, long_qubit(i), long_qubit(j), theta)
    for i in range(n):
        w = 2.0 * gamma * coeffs.linear[i]
        seq.append("rz", (short_qubit(i),), (-w,))
        seq.append("rz", (long_qubit(i),), (w,))
    return seq


def cost_phase(coeffs: CostCoefficients, gamma: float, index: int) -> float:
    """Phase angle phi(x) such that the cost unitary maps |x> to
    exp(i phi(x)) |x>; mirrors the gate construction term by term."""
    n = coeffs.n_assets
    zvals = [1.0 - 2.0 * ((index >> k) & 1) for k in range(2 * n)]
    phi = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            w = coeffs.pair[i, j]
            phi -= gamma * w * (
                zvals[short_qubit(i)] * zvals[short_qubit(j)]
                - zvals[short_qubit(i)] * zvals[long_qubit(j)]
                - zvals[long_qubit(i)] * zvals[short_qubit(j)]
                + zvals[long_qubit(i)] * zvals[long_qubit(j)]
            )
    for i in range(n):
        phi += gamma * coeffs.linear[i] * (zvals[short_qubit(i)] - zvals[long_qubit(i)])
    return phi


# ---------------------------------------------------------------------------
# mixers


def build_standard_mixer(n_qubits: int, beta: float) -> GateSequence:
    """exp(i beta X) on every qubit, i.e. RX(-2 beta) each."""
    seq = GateSequence(n_qubits)
    seq.barrier("standard-mixer")
    for q in range(n_qubits):
        seq.append("rx", (q,), (-2.0 * beta,))
    return seq


def build_xy_pair_block(i: int, j: int, beta: float,
                        n_qubits: int | None = None) -> GateSequence:
    seq = GateSequence(max(i, j) + 1 if n_qubits is None else n_qubits)
    _xy_block(seq, i, j, beta)
    return seq


def asset_pair_layers(kind: str, n_assets: int) -> list[list[tuple[int, int]]]:
    """Asset-index pair layers for each constrained mixer kind.  Layers are
    ordered as executed; pairs within a layer touch disjoint assets except
    for the odd-N ring wraparound."""
    if n_assets < 2:
        raise ConfigurationError("constrained mixers need at least 2 assets")
    if kind == MIXER_XY_RING:
        if n_assets == 2:
            return [[(0, 1)]]  # deduplicated doubled edge
        return [[(a, (a + 1) % n_assets) for a in range(n_assets)]]
    if kind == MIXER_XY_PARITY_RING:
        if n_assets == 2:
            return [[(0, 1)]]
        # site parity is 1-based: even sites i=2,4,... then odd sites i=1,3,...
        even = [(a, (a + 1) % n_assets) for a in range(1, n_assets, 2)]
        odd = [(a, (a + 1) % n_assets) for a in range(0, n_assets, 2)]
        return [even, odd]
    if kind in (MIXER_XY_FULL, MIXER_QAMPA):
        return _round_robin_layers(n_assets)
    raise ConfigurationError(f"{kind!r} has no pair set")


def _round_robin_layers(n: int) -> list[list[tuple[int, int]]]:
    """Circle-method edge coloring of the complete graph on n vertices:
    n-1 disjoint layers for even n, n layers with one bye each for odd n."""
    players = list(range(n)) + ([n] if n % 2 else [])
    m = len(players)
    layers = []
    for _ in range(m - 1):
        layer = []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a < n and b < n:
                layer.append((min(a, b), max(a, b)))
        layers.append(sorted(layer))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return layers


def build_xy_mixer(kind: str, n_assets: int, beta: float) -> GateSequence:
    """Pair blocks over the kind's pair set, applied on the short rail and
    then on the long rail, layer by layer."""
    if kind not in (MIXER_XY_RING, MIXER_XY_PARITY_RING, MIXER_XY_FULL):
        raise ConfigurationError(f"{kind!r} is not an XY mixer kind")
    layers = asset_pair_layers(kind, n_assets)
    seq = GateSequence(2 * n_assets)
    seq.barrier(f"{kind}-mixer")
    for rail in (short_qubit, long_qubit):
        for layer in layers:
            for a, b in layer:
                _xy_block(seq, rail(a), rail(b), beta)
    return seq


def build_qampa_block(i: int, j: int, beta: float, gamma_w: float,
                      n_qubits: int | None = None) -> GateSequence:
    seq = GateSequence(max(i, j) + 1 if n_qubits is None else n_qubits)
    _qampa_block(seq, i, j, beta, gamma_w)
    return seq


def build_qampa_layer(coeffs: CostCoefficients, beta: float, gamma: float) -> GateSequence:
    """Fused mixer-phase layer.  The diagonal leftovers (linear terms,
    intra-asset ZZ, cross-rail ZZ) are applied first, then the fused
    same-rail blocks; within each factor group the printed signs hold:
    linear exp(+i gamma w (Z_short - Z_long)), intra exp(+i gamma W_ii
    Z_short Z_long), cross exp(+i gamma W_ij (Z_i- Z_j+ + Z_i+ Z_j-))."""
    n = coeffs.n_assets
    seq = GateSequence(2 * n)
    seq.barrier("qampa-layer")
    for i in range(n):
        w = 2.0 * gamma * coeffs.linear[i]
        seq.append("rz", (short_qubit(i),), (-w,))
        seq.append("rz", (long_qubit(i),), (w,))
    for i in range(n):
        _zz_block(seq, short_qubit(i), long_qubit(i), -2.0 * gamma * coeffs.pair[i, i])
    for i in range(n):
        for j in range(i + 1, n):
            theta = -2.0 * gamma * coeffs.pair[i, j]
            _zz_block(seq, short_qubit(i), long_qubit(j), theta)
            _zz_block(seq, long_qubit(i), short_qubit(j), theta)
    for rail in (short_qubit, long_qubit):
        for layer in asset_pair_layers(MIXER_QAMPA, n):
            for a, b in layer:
                _qampa_block(seq, rail(a), rail(b), beta, gamma * coeffs.pair[a, b])
    return seq


# ---------------------------------------------------------------------------
# initial states


def build_uniform_initial(n_qubits: int) -> GateSequence:
    seq = GateSequence(n_qubits)
    seq.barrier("uniform-init")
    for q in range(n_qubits):
        seq.append("h", (q,))
    return seq


def _split_shift(seq: GateSequence, m: int, ell: int):
    """One split-and-cyclic-shift stage on the first m qubits, moving up to
    ell excitations.  Angles follow the amplitude split sqrt((m-idx+1)/m) of
    the Dicke recursion; indices below are 1-based stage positions."""
    for idx in range(m, m - ell, -1):
        theta = 2.0 * math.acos(math.sqrt((m - idx + 1) / m))
        if idx == m:
            seq.append("cnot", (m - 2, m - 1))
            seq.append("cry", (m - 1, m - 2), (theta,))
            seq.append("cnot", (m - 2, m - 1))
        else:
            seq.append("cnot", (idx - 2, m - 1))
            seq.append("ccry", (m - 1, idx - 1, idx - 2), (theta,))
            seq.append("cnot", (idx - 2, m - 1))


def build_dicke_initial(n_assets: int, budget: int) -> GateSequence:
    """Symmetric superposition of all feasible encodings: prepare the
    fixed-Hamming-weight (N+B of 2N) symmetric state by the split-and-shift
    cascade, then complement every short qubit."""
    if abs(budget) > n_assets:
        raise ParameterError(f"|budget| = {abs(budget)} exceeds N = {n_assets}")
    n = 2 * n_assets
    k = n_assets + budget
    seq = GateSequence(n)
    seq.barrier("dicke-init")
    for q in range(n - k, n):
        seq.append("x", (q,))
    for m in range(n, k, -1):
        _split_shift(seq, m, k)
    for m in range(k, 1, -1):
        _split_shift(seq, m, m - 1)
    for a in range(n_assets):
        seq.append("x", (short_qubit(a),))
    return seq


def analytic_feasible_superposition(n_assets: int, budget: int) -> StateVector:
    """Amplitude 1/sqrt(K) on every basis index whose decoded portfolio sums
    to the budget, zero elsewhere."""
    if 2 * n_assets > MAX_STATEVECTOR_QUBITS:
        raise CapacityError(f"2N = {2 * n_assets} exceeds statevector capacity")
    if abs(budget) > n_assets:
        raise ParameterError(f"|budget| = {abs(budget)} exceeds N = {n_assets}")
    sums = decode_all_indices(n_assets).sum(axis=1)
    amp = (sums == budget).astype(np.complex128)
    amp /= math.sqrt(amp.real.sum())
    return StateVector(2 * n_assets, amp)


# ---------------------------------------------------------------------------
# accounting


@dataclass(frozen=True)
class CircuitStats:
    total_gates: int
    cnot_count: int
    depth: int


def circuit_stats(seq: GateSequence) -> CircuitStats:
    """Exact gate counts plus depth by greedy as-soon-as-possible layering:
    a gate lands one past the deepest of its qubits.  Only literal CNOTs are
    counted as entangling gates; CRY/CCRY stay native."""
    frontier = [0] * seq.n_qubits
    cnots = 0
    for gate in seq.gates:
        level = 1 + max(frontier[q] for q in gate.targets)
        for q in gate.targets:
            frontier[q] = level
        if gate.kind == "cnot":
            cnots += 1
    return CircuitStats(
        total_gates=len(seq.gates),
        cnot_count=cnots,
        depth=max(frontier) if seq.gates else 0,
    )
