"""Minimal gate-level simulator: statevector and density-matrix backends.

Conventions used throughout the package:

* qubit ``q`` is bit ``q`` of the basis-state index (qubit 0 = least
  significant bit);
* a bitstring rendered as text has character ``k`` equal to the value of
  qubit ``k`` (so the string reads low qubit first, left to right);
* rotation gates follow RX(t) = exp(-i t X / 2) and friends, and
  U(theta, phi, lam) = RZ(phi) RY(theta) RZ(lam).

The density-matrix backend reuses the statevector kernels: a (2^n x 2^n)
matrix flattened row-major is a 2n-qubit vector whose high n bits index the
row.  Applying U to the rows means acting on qubit q+n with U; applying
U-dagger from the right means acting on qubit q with conj(U).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

MAX_STATEVECTOR_QUBITS = 16
MAX_DENSITY_QUBITS = 12

GATE_KINDS = {
    "x": (1, 0),
    "h": (1, 0),
    "rx": (1, 1),
    "ry": (1, 1),
    "rz": (1, 1),
    "u": (1, 3),
    "cnot": (2, 0),
    "cry": (2, 1),
    "ccry": (3, 1),
}


class CapacityError(Exception):
    """Raised when a register exceeds what the backend is sized for."""


class SimulationError(Exception):
    """Raised on malformed gates, states, or backend misuse."""


@dataclass(frozen=True)
class Gate:
    """One gate application: a kind, the qubits it acts on, and its angles.

    For controlled kinds the controls come first in ``targets``:
    cnot = (control, target), cry = (control, target),
    ccry = (control_a, control_b, target).
    """

    kind: str
    targets: tuple[int, ...]
    angles: tuple[float, ...] = ()

    def __post_init__(self):
        spec = GATE_KINDS.get(self.kind)
        if spec is None:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        n_targets, n_angles = spec
        if len(self.targets) != n_targets:
            raise SimulationError(
                f"{self.kind} takes {n_targets} qubit(s), got {self.targets}"
            )
        if len(set(self.targets)) != len(self.targets):
            raise SimulationError(f"{self.kind} targets must be distinct: {self.targets}")
        if len(self.angles) != n_angles:
            raise SimulationError(
                f"{self.kind} takes {n_angles} angle(s), got {self.angles}"
            )


@dataclass
class GateSequence:
    """An ordered gate list over a fixed register, with optional labelled
    barriers used only for reporting (they group gates into logical blocks)."""

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    barriers: list[tuple[int, str]] = field(default_factory=list)

    def append(self, kind: str, targets: tuple[int, ...], angles: tuple[float, ...] = ()):
        gate = Gate(kind, tuple(targets), tuple(float(a) for a in angles))
        for q in gate.targets:
            if not 0 <= q < self.n_qubits:
                raise SimulationError(
                    f"gate {kind} targets qubit {q} outside register of {self.n_qubits}"
                )
        self.gates.append(gate)

    def extend(self, other: "GateSequence"):
        if other.n_qubits != self.n_qubits:
            raise SimulationError("register sizes differ")
        offset = len(self.gates)
        self.gates.extend(other.gates)
        self.barriers.extend((pos + offset, label) for pos, label in other.barriers)

    def barrier(self, label: str):
        self.barriers.append((len(self.gates), label))

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_qubits": self.n_qubits,
                "gates": [
                    {"kind": g.kind, "targets": list(g.targets), "angles": list(g.angles)}
                    for g in self.gates
                ],
                "barriers": [[pos, label] for pos, label in self.barriers],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GateSequence":
        raw = json.loads(text)
        seq = cls(int(raw["n_qubits"]))
        for g in raw["gates"]:
            seq.append(g["kind"], tuple(g["targets"]), tuple(g.get("angles", ())))
        seq.barriers = [(int(p), str(label)) for p, label in raw.get("barriers", [])]
        return seq


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        if n_qubits > MAX_STATEVECTOR_QUBITS:
            raise CapacityError(
                f"statevector backend is sized for <= {MAX_STATEVECTOR_QUBITS} qubits"
            )
        amp = np.zeros(1 << n_qubits, dtype=np.complex128)
        amp[0] = 1.0
        return cls(n_qubits, amp)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass
class DensityMatrix:
    n_qubits: int
    matrix: np.ndarray

    @classmethod
    def zero(cls, n_qubits: int) -> "DensityMatrix":
        if n_qubits > MAX_DENSITY_QUBITS:
            raise CapacityError(
                f"density backend is sized for <= {MAX_DENSITY_QUBITS} qubits"
            )
        dim = 1 << n_qubits
        rho = np.zeros((dim, dim), dtype=np.complex128)
        rho[0, 0] = 1.0
        return cls(n_qubits, rho)

    @classmethod
    def from_statevector(cls, state: StateVector) -> "DensityMatrix":
        if state.n_qubits > MAX_DENSITY_QUBITS:
            raise CapacityError(
                f"density backend is sized for <= {MAX_DENSITY_QUBITS} qubits"
            )
        amp = state.amplitudes
        return cls(state.n_qubits, np.outer(amp, amp.conj()))

    def probabilities(self) -> np.ndarray:
        return np.real(np.diagonal(self.matrix)).copy()


@dataclass(frozen=True)
class NoiseModel:
    """Single-qubit depolarizing channel of strength eta, applied after every
    gate to each qubit the gate touches (both qubits of a CNOT, all three of
    a CCRY)."""

    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise SimulationError(f"eta must lie in [0, 1], got {self.eta}")


# ---------------------------------------------------------------------------
# dense 2x2 building blocks


def _rx(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def _ry(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def _rz_diag(t: float) -> tuple[complex, complex]:
    return complex(np.exp(-0.5j * t)), complex(np.exp(0.5j * t))


def _u3(theta: float, phi: float, lam: float) -> np.ndarray:
    d_phi = np.diag(_rz_diag(phi))
    d_lam = np.diag(_rz_diag(lam))
    return d_phi @ _ry(theta) @ d_lam


_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def gate_unitary_1q(gate: Gate) -> np.ndarray:
    """Dense 2x2 of the rotation applied on the innermost target qubit."""
    if gate.kind == "x":
        return _X.copy()
    if gate.kind == "h":
        return _H.copy()
    if gate.kind == "rx":
        return _rx(gate.angles[0])
    if gate.kind == "ry" or gate.kind in ("cry", "ccry"):
        return _ry(gate.angles[0])
    if gate.kind == "rz":
        return np.diag(_rz_diag(gate.angles[0]))
    if gate.kind == "u":
        return _u3(*gate.angles)
    raise SimulationError(f"{gate.kind} has no single-qubit core")


# ---------------------------------------------------------------------------
# in-place statevector kernels (vec is any flat complex array of length 2^n)


def _kernel_1q(vec: np.ndarray, u: np.ndarray, q: int, n: int):
    s = vec.reshape(1 << (n - q - 1), 2, 1 << q)
    a = s[:, 0, :].copy()
    b = s[:, 1, :]
    s[:, 0, :] = u[0, 0] * a + u[0, 1] * b
    s[:, 1, :] = u[1, 0] * a + u[1, 1] * b


def _kernel_diag1(vec: np.ndarray, d0: complex, d1: complex, q: int, n: int):
    s = vec.reshape(1 << (n - q - 1), 2, 1 << q)
    if d0 != 1.0:
        s[:, 0, :] *= d0
    s[:, 1, :] *= d1


def _kernel_x(vec: np.ndarray, q: int, n: int):
    s = vec.reshape(1 << (n - q - 1), 2, 1 << q)
    tmp = s[:, 0, :].copy()
    s[:, 0, :] = s[:, 1, :]
    s[:, 1, :] = tmp


def _kernel_cnot(vec: np.ndarray, c: int, t: int, n: int):
    hi, lo = (c, t) if c > t else (t, c)
    s = vec.reshape(1 << (n - 1 - hi), 2, 1 << (hi - 1 - lo), 2, 1 << lo)
    if c > t:
        blk = s[:, 1, :, :, :]
        tmp = blk[:, :, 0, :].copy()
        blk[:, :, 0, :] = blk[:, :, 1, :]
        blk[:, :, 1, :] = tmp
    else:
        blk = s[:, :, :, 1, :]
        tmp = blk[:, 0, :, :].copy()
        blk[:, 0, :, :] = blk[:, 1, :, :]
        blk[:, 1, :, :] = tmp


def _kernel_controlled_ry(vec: np.ndarray, theta: float, controls: tuple[int, ...],
                          t: int, n: int):
    idx = np.arange(1 << n)
    mask = np.ones(1 << n, dtype=bool)
    for c in controls:
        mask &= ((idx >> c) & 1) == 1
    i0 = idx[mask & (((idx >> t) & 1) == 0)]
    i1 = i0 | (1 << t)
    co, si = math.cos(theta / 2), math.sin(theta / 2)
    a = vec[i0].copy()
    b = vec[i1]
    vec[i0] = co * a - si * b
    vec[i1] = si * a + co * b


def _apply_gate_flat(vec: np.ndarray, gate: Gate, n: int, offset: int, conj: bool):
    """Apply `gate` on the flat vector, with every target shifted by `offset`
    (0 for kets / statevectors, n_phys for density-matrix rows) and the
    matrix optionally conjugated (density-matrix column side)."""
    qs = tuple(q + offset for q in gate.targets)
    kind = gate.kind
    if kind == "cnot":
        _kernel_cnot(vec, qs[0], qs[1], n)
    elif kind == "x":
        _kernel_x(vec, qs[0], n)
    elif kind == "rz":
        d0, d1 = _rz_diag(gate.angles[0])
        if conj:
            d0, d1 = d0.conjugate(), d1.conjugate()
        _kernel_diag1(vec, d0, d1, qs[0], n)
    elif kind in ("cry", "ccry"):
        theta = gate.angles[0]
        _kernel_controlled_ry(vec, theta, qs[:-1], qs[-1], n)
    else:
        u = gate_unitary_1q(gate)
        if conj:
            u = u.conj()
        _kernel_1q(vec, u, qs[0], n)


# ---------------------------------------------------------------------------
# public gate / channel application


def apply_gate_sv(state: StateVector, gate: Gate):
    """Apply one gate to a statevector, in place."""
    for q in gate.targets:
        if not 0 <= q < state.n_qubits:
            raise SimulationError(f"qubit {q} outside register of {state.n_qubits}")
    _apply_gate_flat(state.amplitudes, gate, state.n_qubits, 0, conj=False)


def apply_gate_dm(rho: DensityMatrix, gate: Gate):
    """Apply one gate as rho -> U rho U-dagger, in place."""
    n = rho.n_qubits
    for q in gate.targets:
        if not 0 <= q < n:
            raise SimulationError(f"qubit {q} outside register of {n}")
    flat = rho.matrix.reshape(-1)
    _apply_gate_flat(flat, gate, 2 * n, n, conj=False)   # row side
    _apply_gate_flat(flat, gate, 2 * n, 0, conj=True)    # column side


def depolarize(rho: DensityMatrix, qubit: int, eta: float):
    """Single-qubit depolarizing: rho -> (1-eta) rho + eta (I/2 (x) tr_q rho),
    in place.  Kraus weights: sqrt(1-3 eta/4) I and sqrt(eta/4) each Pauli."""
    if not 0 <= qubit < rho.n_qubits:
        raise SimulationError(f"qubit {qubit} outside register of {rho.n_qubits}")
    if eta == 0.0:
        return
    n = rho.n_qubits
    hi, lo = qubit + n, qubit
    s = rho.matrix.reshape(
        1 << (2 * n - 1 - hi), 2, 1 << (hi - 1 - lo), 2, 1 << lo
    )
    b00 = s[:, 0, :, 0, :]
    b11 = s[:, 1, :, 1, :]
    tmp = b00.copy()
    b00 *= 1.0 - eta / 2
    b00 += (eta / 2) * b11
    b11 *= 1.0 - eta / 2
    b11 += (eta / 2) * tmp
    s[:, 0, :, 1, :] *= 1.0 - eta
    s[:, 1, :, 0, :] *= 1.0 - eta


def run_sequence(seq: GateSequence, *, backend: str = "statevector",
                 noise: NoiseModel | None = None,
                 initial: StateVector | DensityMatrix | None = None):
    """Run a gate sequence and return the final state object.

    backend 'statevector' -> StateVector (noise must be None);
    backend 'density' -> DensityMatrix, with the depolarizing channel applied
    after every gate to each qubit that gate touches.

    The caller's `initial` object is left untouched; evolution happens on a
    private copy.
    """
    n = seq.n_qubits
    if backend == "statevector":
        if noise is not None and noise.eta != 0.0:
            raise SimulationError("statevector backend cannot carry noise")
        if initial is None:
            state = StateVector.zero(n)
        elif isinstance(initial, DensityMatrix):
            raise SimulationError("statevector backend got a density matrix")
        else:
            state = StateVector(initial.n_qubits, initial.amplitudes.copy())
        if state.n_qubits != n:
            raise SimulationError("initial state register mismatch")
        for gate in seq.gates:
            apply_gate_sv(state, gate)
        return state
    if backend == "density":
        if initial is None:
            state = DensityMatrix.zero(n)
        elif isinstance(initial, StateVector):
            state = DensityMatrix.from_statevector(initial)
        else:
            state = DensityMatrix(initial.n_qubits, initial.matrix.copy())
        if state.n_qubits != n:
            raise SimulationError("initial state register mismatch")
        eta = noise.eta if noise is not None else 0.0
        for gate in seq.gates:
            apply_gate_dm(state, gate)
            if eta:
                for q in gate.targets:
                    depolarize(state, q, eta)
        return state
    raise SimulationError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------------------
# readout


def index_to_bitstring(index: int, n_qubits: int) -> str:
    return "".join(str((index >> k) & 1) for k in range(n_qubits))


def bitstring_to_index(bits: str) -> int:
    return sum(1 << k for k, ch in enumerate(bits) if ch == "1")


def measurement_distribution(state: StateVector | DensityMatrix) -> dict[str, float]:
    """Exact computational-basis distribution as bitstring -> probability.

    Probabilities are clipped at zero (density-matrix diagonals can pick up
    -1e-17 of numerical dust) and renormalised only through that clip."""
    probs = np.clip(state.probabilities(), 0.0, None)
    n = state.n_qubits
    return {index_to_bitstring(i, n): float(p) for i, p in enumerate(probs)}


def sample_shots(dist: dict[str, float] | np.ndarray, shots: int,
                 rng: np.random.Generator | int | None = None) -> dict[str, int]:
    """Multinomial sampling of the exact distribution.  Deterministic given a
    seeded generator; keys are sorted before drawing so the stream does not
    depend on dict construction order.  shots == 0 gives empty counts.
    Negative dust below 1e-12 (density-matrix diagonals) is clipped."""
    if shots < 0:
        raise SimulationError("shots must be non-negative")
    if shots == 0:
        return {}
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    if isinstance(dist, np.ndarray):
        n = int(dist.size - 1).bit_length()
        keys = [index_to_bitstring(i, n) for i in range(dist.size)]
        p = np.asarray(dist, dtype=float)
    else:
        keys = sorted(dist)
        p = np.array([dist[k] for k in keys], dtype=float)
    if p.min() < -1e-12:
        raise SimulationError(f"negative probability {p.min()}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
        raise SimulationError(f"distribution sums to {total}, not 1")
    counts = rng.multinomial(shots, p / total)
    return {k: int(c) for k, c in zip(keys, counts) if c}


def expectation_diagonal(state: StateVector | DensityMatrix,
                         values: dict[str, float] | np.ndarray) -> float:
    """Expectation of a diagonal observable: sum_x p(x) values[x].  `values`
    may be an array over basis indices or a bitstring-keyed map (bitstrings
    missing from the map count as zero)."""
    probs = state.probabilities()
    if isinstance(values, np.ndarray):
        if values.size != probs.size:
            raise SimulationError("diagonal observable has wrong dimension")
        return float(np.real(probs @ values))
    n = state.n_qubits
    return float(
        sum(p * values.get(index_to_bitstring(i, n), 0.0) for i, p in enumerate(probs))
    )
