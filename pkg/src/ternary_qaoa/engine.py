"""Variational driver: ansatz assembly, objective evaluation on three
backends, and the angle-optimization ladder (grid seed at depth 1, warm
transfers between depths, derivative and simplex refinement).

Angle domain: every gamma is wrapped into [0, pi] by triangle reflection
(the cost phases are pi-periodic up to sign) and every beta is clamped to
be nonnegative before a circuit is built, so optimizers may roam freely in
the unconstrained plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuits import (
    CONSTRAINED_MIXERS,
    MIXER_KINDS,
    MIXER_STANDARD,
    ConfigurationError,
    CostCoefficients,
    build_cost_coefficients,
    build_cost_unitary,
    build_dicke_initial,
    build_qampa_layer,
    build_standard_mixer,
    build_uniform_initial,
    build_xy_mixer,
)
from .finance import PortfolioInstance
from .problem import (
    BasisTable,
    DistributionMetrics,
    FeasibleSetSummary,
    PenaltyModel,
    build_basis_table,
    distribution_metrics,
    enumerate_feasible,
    estimate_penalty_coefficient,
    probabilities_from_mapping,
)
from .sim import (
    DensityMatrix,
    GateSequence,
    NoiseModel,
    StateVector,
    run_sequence,
    sample_shots,
)

DEFAULT_EVAL_BUDGET_PER_LAYER = 500
SIMPLEX_SPREAD_TOL = 1e-8
GRADIENT_FLAT_TOL = 1e-10
FD_STEP = 1e-5

BACKEND_KINDS = ("statevector", "sampled", "density")

TRANSFER_STRATEGIES = ("interp", "append-last", "append-zero", "ramp-refit")


@dataclass(frozen=True)
class BackendSpec:
    """How an expectation value is produced.

    statevector: exact circuit amplitudes, exact mean.
    sampled: exact amplitudes, multinomial shots, empirical mean.
    density: noisy density-matrix propagation, exact diagonal mean.
    """

    kind: str = "statevector"
    shots: int = 8192
    eta: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ConfigurationError(f"unknown backend kind {self.kind!r}")
        if self.kind != "density" and self.eta != 0.0:
            raise ConfigurationError("noise requires the density backend")
        if self.kind == "sampled" and self.shots <= 0:
            raise ConfigurationError("sampled backend needs shots > 0")


@dataclass(frozen=True)
class GridSpec:
    gamma_range: tuple[float, float] = (0.05, 2.0)
    beta_range: tuple[float, float] = (0.05, 2.0)
    resolution: int = 40

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.linspace(*self.gamma_range, self.resolution),
            np.linspace(*self.beta_range, self.resolution),
        )


def wrap_gamma(x: float) -> float:
    """Triangle reflection of x into [0, pi]."""
    return math.pi - abs(math.pi - (x % (2.0 * math.pi)))


@dataclass(frozen=True)
class QaoaParams:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        if len(self.gammas) != len(self.betas) or not self.gammas:
            raise ConfigurationError("need equal, nonzero gamma/beta counts")

    @property
    def depth(self) -> int:
        return len(self.gammas)

    def project(self) -> "QaoaParams":
        return QaoaParams(
            gammas=tuple(wrap_gamma(g) for g in self.gammas),
            betas=tuple(max(b, 0.0) for b in self.betas),
        )

    def as_vector(self) -> np.ndarray:
        return np.array(self.gammas + self.betas, dtype=float)

    @staticmethod
    def from_vector(vec: np.ndarray) -> "QaoaParams":
        half = len(vec) // 2
        return QaoaParams(gammas=tuple(vec[:half]), betas=tuple(vec[half:]))


def linear_ramp_params(depth: int, m1: float, m2: float) -> QaoaParams:
    """gamma_i = m1 * x_i rising, beta_i = m2 * (1 - x_i) falling, with
    x_i = (2i - 1) / (2p) the layer midpoints."""
    xs = [(2 * i - 1) / (2 * depth) for i in range(1, depth + 1)]
    return QaoaParams(
        gammas=tuple(m1 * x for x in xs),
        betas=tuple(m2 * (1 - x) for x in xs),
    )


def _layer_midpoints(depth: int) -> np.ndarray:
    return np.array([(2 * i - 1) / (2 * depth) for i in range(1, depth + 1)])


def _interp_extrapolate(x_old: np.ndarray, y_old: np.ndarray,
                        x_new: np.ndarray) -> np.ndarray:
    """Piecewise-linear resample; ends continue the boundary segment slope
    instead of clamping (single-point input stays constant)."""
    if len(x_old) == 1:
        return np.full_like(x_new, y_old[0])
    out = np.interp(x_new, x_old, y_old)
    lo = x_new < x_old[0]
    hi = x_new > x_old[-1]
    s0 = (y_old[1] - y_old[0]) / (x_old[1] - x_old[0])
    s1 = (y_old[-1] - y_old[-2]) / (x_old[-1] - x_old[-2])
    out[lo] = y_old[0] + s0 * (x_new[lo] - x_old[0])
    out[hi] = y_old[-1] + s1 * (x_new[hi] - x_old[-1])
    return out


def transfer_params(prev: QaoaParams, depth: int) -> dict[str, QaoaParams]:
    """Candidate angle schedules at a deeper circuit from a shallower
    optimum: midpoint interpolation, repeat-last padding, zero padding, and
    a through-origin ramp refit of both schedules."""
    if depth <= prev.depth:
        raise ConfigurationError("transfer target must be deeper")
    x_old = _layer_midpoints(prev.depth)
    x_new = _layer_midpoints(depth)
    g_old = np.array(prev.gammas)
    b_old = np.array(prev.betas)
    pad = depth - prev.depth

    m1 = float(x_old @ g_old / (x_old @ x_old))
    m2 = float((1 - x_old) @ b_old / ((1 - x_old) @ (1 - x_old)))

    return {
        "interp": QaoaParams(
            gammas=tuple(_interp_extrapolate(x_old, g_old, x_new)),
            betas=tuple(_interp_extrapolate(x_old, b_old, x_new)),
        ),
        "append-last": QaoaParams(
            gammas=prev.gammas + (prev.gammas[-1],) * pad,
            betas=prev.betas + (prev.betas[-1],) * pad,
        ),
        "append-zero": QaoaParams(
            gammas=prev.gammas + (0.0,) * pad,
            betas=prev.betas + (0.0,) * pad,
        ),
        "ramp-refit": linear_ramp_params(depth, m1, m2),
    }


# ---------------------------------------------------------------------------
# evaluation context


class QaoaEngine:
    """Evaluation context for one (instance, mixer) pair: coefficients,
    cached initial states, basis-value table, objective and metrics."""

    def __init__(self, instance: PortfolioInstance, mixer: str,
                 penalty: PenaltyModel | None = None,
                 summary: FeasibleSetSummary | None = None):
        if mixer not in MIXER_KINDS:
            raise ConfigurationError(f"unknown mixer {mixer!r}")
        self.instance = instance
        self.mixer = mixer
        self.penalty = penalty
        self.coeffs: CostCoefficients = build_cost_coefficients(instance, penalty, mixer)
        self.summary = summary if summary is not None else enumerate_feasible(instance)
        self.table: BasisTable = build_basis_table(instance, self.summary)
        self.scaled_values = self.table.scaled_penalized_values(
            self.coeffs.scale, self.coeffs.coefficient_a)
        self._sv_initial: StateVector | None = None
        self._dm_initial: dict[float, DensityMatrix] = {}

    @property
    def n_qubits(self) -> int:
        return 2 * self.instance.n_assets

    # -- initial states

    def initial_circuit(self) -> GateSequence:
        if self.mixer == MIXER_STANDARD:
            return build_uniform_initial(self.n_qubits)
        return build_dicke_initial(self.instance.n_assets, self.instance.budget)

    def initial_statevector(self) -> StateVector:
        if self._sv_initial is None:
            self._sv_initial = run_sequence(self.initial_circuit(),
                                            backend="statevector")
        return self._sv_initial

    def initial_density(self, eta: float) -> DensityMatrix:
        """State preparation is not noise-free: the prep circuit itself runs
        under the same channel."""
        if eta not in self._dm_initial:
            state = run_sequence(self.initial_circuit(), backend="density",
                                 noise=NoiseModel(eta) if eta > 0 else None)
            self._dm_initial[eta] = state
        return self._dm_initial[eta]

    # -- ansatz

    def layer_sequence(self, gamma: float, beta: float) -> GateSequence:
        n = self.instance.n_assets
        if self.mixer == MIXER_STANDARD:
            seq = build_cost_unitary(self.coeffs, gamma)
            seq.extend(build_standard_mixer(2 * n, beta))
            return seq
        if self.mixer in CONSTRAINED_MIXERS[:-1]:
            seq = build_cost_unitary(self.coeffs, gamma)
            seq.extend(build_xy_mixer(self.mixer, n, beta))
            return seq
        return build_qampa_layer(self.coeffs, beta, gamma)

    def ansatz_sequence(self, params: QaoaParams) -> GateSequence:
        """All layers, without state preparation."""
        seq = GateSequence(self.n_qubits)
        for gamma, beta in zip(params.gammas, params.betas):
            seq.extend(self.layer_sequence(gamma, beta))
        return seq

    def full_sequence(self, params: QaoaParams) -> GateSequence:
        seq = self.initial_circuit()
        seq.extend(self.ansatz_sequence(params))
        return seq

    # -- evaluation

    def statevector(self, params: QaoaParams) -> StateVector:
        return run_sequence(self.ansatz_sequence(params),
                            backend="statevector",
                            initial=self.initial_statevector())

    def density(self, params: QaoaParams, eta: float) -> DensityMatrix:
        return run_sequence(self.ansatz_sequence(params),
                            backend="density",
                            noise=NoiseModel(eta) if eta > 0 else None,
                            initial=self.initial_density(eta))

    def probabilities(self, params: QaoaParams, backend: BackendSpec,
                      rng: np.random.Generator | None = None):
        """Exact probability vector (statevector/density) or an empirical
        frequency dict (sampled)."""
        params = params.project()
        if backend.kind == "statevector":
            return self.statevector(params).probabilities()
        if backend.kind == "density":
            return self.density(params, backend.eta).probabilities()
        probs = self.statevector(params).probabilities()
        if rng is None:
            rng = np.random.default_rng(backend.seed)
        counts = sample_shots(probs, backend.shots, rng)
        return {bits: c / backend.shots for bits, c in counts.items()}

    def evaluate_objective(self, params: QaoaParams, backend: BackendSpec,
                           rng: np.random.Generator | None = None) -> float:
        dist = self.probabilities(params, backend, rng)
        probs = probabilities_from_mapping(dist, self.n_qubits)
        return float(probs @ self.scaled_values)

    def metrics(self, params: QaoaParams, backend: BackendSpec,
                rng: np.random.Generator | None = None) -> DistributionMetrics:
        dist = self.probabilities(params, backend, rng)
        return distribution_metrics(self.instance, self.summary, dist,
                                    table=self.table)

    def sampled_metrics_from_density(self, params: QaoaParams, eta: float,
                                     shots: int,
                                     rng: np.random.Generator | int | None,
                                     ) -> DistributionMetrics:
        """Shot-resolved metrics over the noisy diagonal: what a hardware
        readout of the mixed state would report."""
        probs = self.density(params.project(), eta).probabilities()
        counts = sample_shots(probs, shots, rng)
        freq = {bits: c / shots for bits, c in counts.items()}
        return distribution_metrics(self.instance, self.summary, freq,
                                    table=self.table)


# ---------------------------------------------------------------------------
# optimizers


@dataclass
class OptimizationTrace:
    method: str
    n_evals: int = 0
    best_value: float = math.inf
    best_params: QaoaParams | None = None
    history: list[float] = field(default_factory=list)

    def record(self, params: QaoaParams, value: float):
        self.n_evals += 1
        self.history.append(value)
        if value < self.best_value:
            self.best_value = value
            self.best_params = params


def _make_objective(engine: QaoaEngine, backend: BackendSpec,
                    trace: OptimizationTrace):
    def fn(vec: np.ndarray) -> float:
        params = QaoaParams.from_vector(vec)
        # fresh stream from the same seed per call keeps the sampled
        # objective a deterministic function of the angles
        local = (np.random.default_rng(backend.seed)
                 if backend.kind == "sampled" else None)
        value = engine.evaluate_objective(params, backend, local)
        trace.record(params.project(), value)
        return value

    return fn


def grid_search_p1(engine: QaoaEngine, backend: BackendSpec,
                   grid: GridSpec) -> tuple[QaoaParams, float, np.ndarray, OptimizationTrace]:
    """Dense depth-1 scan; returns the best corner and the full landscape
    (rows indexed by gamma, columns by beta)."""
    trace = OptimizationTrace(method="grid")
    fn = _make_objective(engine, backend, trace)
    gammas, betas = grid.axes()
    landscape = np.empty((len(gammas), len(betas)))
    for a, g in enumerate(gammas):
        for b, be in enumerate(betas):
            landscape[a, b] = fn(np.array([g, be]))
    idx = np.unravel_index(np.argmin(landscape), landscape.shape)
    best = QaoaParams(gammas=(float(gammas[idx[0]]),),
                      betas=(float(betas[idx[1]]),))
    return best, float(landscape[idx]), landscape, trace


def _fd_gradient(fn, x: np.ndarray, trace: OptimizationTrace,
                 max_evals: int) -> np.ndarray | None:
    """Central differences; None when the eval budget runs out mid-stencil."""
    grad = np.zeros_like(x)
    for k in range(len(x)):
        if trace.n_evals + 2 > max_evals:
            return None
        e = np.zeros_like(x)
        e[k] = FD_STEP
        grad[k] = (fn(x + e) - fn(x - e)) / (2 * FD_STEP)
    return grad


def minimize_fd_gradient(fn, x0: np.ndarray, max_evals: int,
                         trace: OptimizationTrace,
                         memory: int = 8) -> tuple[np.ndarray, float]:
    """Quasi-Newton descent on finite-difference gradients: limited-memory
    curvature pairs build the direction (two-loop recursion), an Armijo
    backtracking line search picks the step.  A flat initial gradient
    returns the start; the best visited point is kept, so the result never
    regresses below the starting value."""
    x = np.asarray(x0, dtype=float).copy()
    f = fn(x)
    best_x, best_f = x.copy(), f
    grad = _fd_gradient(fn, x, trace, max_evals)
    if grad is None:
        return best_x, best_f
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    while trace.n_evals < max_evals:
        if float(np.max(np.abs(grad))) < GRADIENT_FLAT_TOL:
            break
        d = -grad
        if s_hist:
            # two-loop recursion over stored curvature pairs
            alphas = []
            q = grad.copy()
            for s, y in zip(reversed(s_hist), reversed(y_hist)):
                a = (s @ q) / (y @ s)
                alphas.append(a)
                q -= a * y
            s, y = s_hist[-1], y_hist[-1]
            q *= (s @ y) / (y @ y)
            for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
                b = (y @ q) / (y @ s)
                q += (a - b) * s
            d = -q
        slope = float(d @ grad)
        if slope >= 0.0:
            d = -grad
            slope = -float(grad @ grad)
        t = 1.0 if s_hist else min(1.0, 1.0 / float(np.linalg.norm(grad)))
        accepted = False
        for _ in range(30):
            if trace.n_evals >= max_evals:
                return best_x, best_f
            cand = x + t * d
            fc = fn(cand)
            if fc <= f + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        new_grad = _fd_gradient(fn, cand, trace, max_evals)
        if new_grad is None:
            if fc < best_f:
                best_x, best_f = cand.copy(), fc
            return best_x, best_f
        s_vec = cand - x
        y_vec = new_grad - grad
        if float(s_vec @ y_vec) > 1e-12:
            s_hist.append(s_vec)
            y_hist.append(y_vec)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        improvement = f - fc
        x, f, grad = cand, fc, new_grad
        if fc < best_f:
            best_x, best_f = cand.copy(), fc
        if improvement < 1e-10 * max(1.0, abs(f)):
            break
    return best_x, best_f


def minimize_nelder_mead(fn, x0: np.ndarray, max_evals: int,
                         trace: OptimizationTrace,
                         scale: float = 0.1) -> tuple[np.ndarray, float]:
    """Downhill simplex (reflect 1, expand 2, contract 0.5, shrink 0.5).
    Stops when the simplex value spread drops below tolerance or the eval
    budget is spent."""
    dim = len(x0)
    pts = [np.asarray(x0, dtype=float)]
    for k in range(dim):
        v = pts[0].copy()
        v[k] += scale if v[k] == 0 else scale * max(1.0, abs(v[k]))
        pts.append(v)
    vals = []
    for v in pts:
        if trace.n_evals >= max_evals:
            break
        vals.append(fn(v))
    while len(vals) < len(pts):
        vals.append(math.inf)
    vals = np.array(vals)
    pts = np.array(pts)

    while trace.n_evals < max_evals:
        order = np.argsort(vals, kind="stable")
        pts, vals = pts[order], vals[order]
        if vals[-1] - vals[0] < SIMPLEX_SPREAD_TOL:
            break
        centroid = pts[:-1].mean(axis=0)
        xr = centroid + (centroid - pts[-1])
        fr = fn(xr)
        if fr < vals[0]:
            if trace.n_evals < max_evals:
                xe = centroid + 2.0 * (centroid - pts[-1])
                fe = fn(xe)
                if fe < fr:
                    pts[-1], vals[-1] = xe, fe
                    continue
            pts[-1], vals[-1] = xr, fr
            continue
        if fr < vals[-2]:
            pts[-1], vals[-1] = xr, fr
            continue
        if trace.n_evals >= max_evals:
            break
        xc = centroid + 0.5 * (pts[-1] - centroid)
        fc = fn(xc)
        if fc < vals[-1]:
            pts[-1], vals[-1] = xc, fc
            continue
        for k in range(1, len(pts)):
            if trace.n_evals >= max_evals:
                break
            pts[k] = pts[0] + 0.5 * (pts[k] - pts[0])
            vals[k] = fn(pts[k])
    k = int(np.argmin(vals))
    return pts[k], float(vals[k])


def refine_params(engine: QaoaEngine, backend: BackendSpec,
                  start: QaoaParams, max_evals: int | None = None,
                  ) -> tuple[QaoaParams, float, OptimizationTrace]:
    """Local polish from a starting schedule: derivative descent on the
    exact backend, simplex on stochastic or mixed-state backends."""
    depth = start.depth
    budget = max_evals if max_evals is not None else DEFAULT_EVAL_BUDGET_PER_LAYER * depth
    trace = OptimizationTrace(
        method="fd-gradient" if backend.kind == "statevector" else "nelder-mead")
    fn = _make_objective(engine, backend, trace)
    x0 = start.as_vector()
    if backend.kind == "statevector":
        minimize_fd_gradient(fn, x0, budget, trace)
    else:
        minimize_nelder_mead(fn, x0, budget, trace)
    if trace.best_params is None or trace.best_value == math.inf:
        value = fn(x0)
        return start.project(), value, trace
    return trace.best_params, trace.best_value, trace


@dataclass(frozen=True)
class DepthResult:
    depth: int
    params: QaoaParams
    objective: float
    n_evals: int
    method: str
    transfer: str | None = None
    landscape: np.ndarray | None = None


def optimize_depth_chain(engine: QaoaEngine, depths: list[int],
                         backend: BackendSpec, grid: GridSpec | None = None,
                         max_evals: int | None = None,
                         keep_landscape: bool = False) -> dict[int, DepthResult]:
    """Warm-started ladder over increasing depths.  Depth 1 seeds from the
    dense grid; each deeper level evaluates all transfer candidates from
    the best shallower result and polishes the winner."""
    grid = grid if grid is not None else GridSpec()
    results: dict[int, DepthResult] = {}
    prev_best: DepthResult | None = None
    for depth in sorted(set(depths)):
        if depth < 1:
            raise ConfigurationError("depth must be >= 1")
        if depth == 1 or prev_best is None:
            if depth == 1:
                seed_params, _, landscape, gtrace = grid_search_p1(
                    engine, backend, grid)
            else:
                # cold deep start: modest ramp slopes
                seed_params = linear_ramp_params(depth, 0.5, 0.5)
                landscape, gtrace = None, OptimizationTrace(method="ramp")
            params, value, trace = refine_params(engine, backend, seed_params,
                                                 max_evals)
            result = DepthResult(
                depth=depth, params=params, objective=value,
                n_evals=trace.n_evals + gtrace.n_evals,
                method=trace.method, transfer=None,
                landscape=landscape if keep_landscape else None,
            )
        else:
            candidates = transfer_params(prev_best.params, depth)
            best_name, params, value, method, n_evals = None, None, math.inf, "", 0
            for name, cand in candidates.items():
                c_params, c_value, c_trace = refine_params(engine, backend,
                                                           cand, max_evals)
                n_evals += c_trace.n_evals
                if c_value < value:
                    best_name, params, value = name, c_params, c_value
                    method = c_trace.method
            result = DepthResult(
                depth=depth, params=params, objective=value,
                n_evals=n_evals, method=method, transfer=best_name,
            )
        results[depth] = result
        if prev_best is None or result.depth > prev_best.depth:
            prev_best = result
    return results


def engine_for(instance: PortfolioInstance, mixer: str) -> QaoaEngine:
    """Experiment-flow constructor: the full-space mixer gets the estimated
    quadratic penalty so its objective steers toward the budget; constrained
    mixers never carry one."""
    penalty = estimate_penalty_coefficient(instance) if mixer == MIXER_STANDARD else None
    return QaoaEngine(instance, mixer, penalty=penalty)


def feasibility_of_distribution(engine: QaoaEngine, dist) -> float:
    """Probability mass on budget-satisfying encodings."""
    metrics = distribution_metrics(engine.instance, engine.summary, dist,
                                   table=engine.table)
    return metrics.p_feasible


__all__ = [
    "BACKEND_KINDS",
    "BackendSpec",
    "DepthResult",
    "GridSpec",
    "OptimizationTrace",
    "QaoaEngine",
    "QaoaParams",
    "TRANSFER_STRATEGIES",
    "engine_for",
    "grid_search_p1",
    "linear_ramp_params",
    "minimize_fd_gradient",
    "minimize_nelder_mead",
    "optimize_depth_chain",
    "refine_params",
    "transfer_params",
    "wrap_gamma",
]
