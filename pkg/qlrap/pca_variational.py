"""
qlrap/pca_variational.py

Classical simulation of variational principal component analysis.

A rank-R state is prepared as the reduced state of a pure vector on
system (x) ancilla, with an ancilla of dimension R. The amplitude matrix
M (d_sys x d_anc) is the parameter, so

    sigma(M) = M M^dagger / ||M||_F^2,

and rank(sigma) <= d_anc holds for every parameter value. Minimising the
Hilbert-Schmidt cost

    C = Tr(rho^2) + Tr(sigma^2) - 2 Tr(rho sigma)

learns tau_R + N_R, whose eigenvectors are rho's top-R principal
components in the same order.

Parameters are stored as one real vector [Re(M).ravel(), Im(M).ravel()].
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Iterator, Mapping

import numpy as np
import pandas as pd
import scipy.optimize

from qlrap.core_linalg import (
    DEFAULT_TOLERANCES,
    DensityMatrix,
    Subsystem,
    Tolerances,
    check_rank_bound,
    eigh,
    frozen_array,
    hs_distance,
    overlap,
    partial_trace,
    purity,
    trace_distance,
    validate_density,
)
from qlrap.errors import (
    BudgetExceeded,
    DimMismatch,
    NO_MISORDERED_MEMBER,
    RankOutOfRange,
    ValidationError,
    ZeroVector,
)
from qlrap.random_states import SeedLike, as_rng
from qlrap.solver import (
    TraceOptimalFamily,
    family_member,
    solve_hs_distance,
    solve_trace_distance,
    trace_family,
    trace_family_contains,
    trace_family_sample,
)
from utils.utils_logger import logger

MIN_STEP = 1e-20
MAX_STEP = 1e3
# relative decrease below which L-BFGS-B stops
LBFGS_FTOL = 1e-15
STEP_RULES = ("lbfgs", "backtracking", "fixed")

#####################################
# Ansatz
#####################################


@dataclass(frozen=True)
class PurificationAnsatz:
    d_sys: int
    d_anc: int
    params: np.ndarray

    def __post_init__(self) -> None:
        if self.d_sys < 1 or self.d_anc < 1:
            raise DimMismatch(f"Dimensions must be positive, got {self.d_sys} x {self.d_anc}.")
        params = np.asarray(self.params, dtype=float).ravel()
        if params.size != 2 * self.d_sys * self.d_anc:
            raise DimMismatch(
                f"Expected {2 * self.d_sys * self.d_anc} parameters, got {params.size}."
            )
        if not np.all(np.isfinite(params)):
            raise ValidationError("Ansatz parameters must be finite.", violation=np.inf)
        object.__setattr__(self, "params", frozen_array(params, float))

    @property
    def amplitudes(self) -> np.ndarray:
        half = self.d_sys * self.d_anc
        re, im = self.params[:half], self.params[half:]
        return (re + 1j * im).reshape(self.d_sys, self.d_anc)

    def with_params(self, params: Any) -> PurificationAnsatz:
        return PurificationAnsatz(self.d_sys, self.d_anc, params)

    @classmethod
    def from_amplitudes(cls, amplitudes: Any) -> PurificationAnsatz:
        m = np.asarray(amplitudes, dtype=np.complex128)
        if m.ndim != 2:
            raise DimMismatch(f"Amplitudes must be a matrix, got shape {m.shape}.")
        return cls(m.shape[0], m.shape[1], np.concatenate([m.real.ravel(), m.imag.ravel()]))

    @classmethod
    def random(cls, d_sys: int, d_anc: int, seed: SeedLike = None) -> PurificationAnsatz:
        rng = as_rng(seed)
        return cls(d_sys, d_anc, rng.standard_normal(2 * d_sys * d_anc))


def ansatz_for_state(sigma: DensityMatrix, d_anc: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> PurificationAnsatz:
    """Purification parameters whose reduced state is sigma (needs rank <= d_anc)."""
    sigma = validate_density(sigma, tolerances)
    rank = sigma.rank(tolerances.rank_tol)
    if rank > d_anc:
        raise RankOutOfRange(f"State of rank {rank} needs an ancilla of dimension >= {rank}.")
    spectrum = eigh(sigma, tolerances)
    amplitudes = np.zeros((sigma.dim, d_anc), dtype=np.complex128)
    keep = min(d_anc, sigma.dim)
    amplitudes[:, :keep] = spectrum.vectors[:, :keep] * np.sqrt(np.clip(spectrum.values[:keep], 0.0, None))
    return PurificationAnsatz.from_amplitudes(amplitudes)


def ancilla_qubits_required(rank: int) -> int:
    """Qubits needed for an ancilla of dimension `rank`: ceil(log2 rank)."""
    if rank < 1:
        raise RankOutOfRange(f"Rank must be at least 1, got {rank}.")
    return (int(rank) - 1).bit_length()


def prepare_state(ansatz: PurificationAnsatz, tolerances: Tolerances = DEFAULT_TOLERANCES) -> DensityMatrix:
    """Normalise the amplitude vector and trace out the ancilla."""
    amplitudes = ansatz.amplitudes
    norm2 = float(np.vdot(amplitudes, amplitudes).real)
    if not norm2 > 0.0:
        raise ZeroVector("Ansatz has no nonzero amplitude.")
    psi = amplitudes.ravel() / np.sqrt(norm2)
    return partial_trace(psi, ansatz.d_sys, ansatz.d_anc, Subsystem.ANCILLA, tolerances)


#####################################
# Cost and Gradient
#####################################


@dataclass(frozen=True)
class CostBreakdown:
    """The three estimands of the HS cost and their combination."""

    total: float
    purity_rho: float
    purity_sigma: float
    overlap: float


def _check_dims(rho: DensityMatrix, ansatz: PurificationAnsatz) -> None:
    if rho.dim != ansatz.d_sys:
        raise DimMismatch(f"State dimension {rho.dim} does not match ansatz system dimension {ansatz.d_sys}.")


def cost_breakdown(
    rho: DensityMatrix,
    ansatz: PurificationAnsatz,
    noise_std: float = 0.0,
    seed: SeedLike = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> CostBreakdown:
    """
    Tr(rho^2) + Tr(sigma^2) - 2 Tr(rho sigma), term by term.

    With noise_std > 0 each term gets independent Gaussian noise, standing
    in for finite-shot overlap estimates.
    """
    rho = validate_density(rho, tolerances)
    _check_dims(rho, ansatz)
    sigma = prepare_state(ansatz, tolerances)
    terms = np.array([purity(rho, tolerances), purity(sigma, tolerances), overlap(rho, sigma, tolerances)])
    if noise_std > 0.0:
        terms = terms + as_rng(seed).normal(0.0, noise_std, size=3)
    p_rho, p_sigma, ov = (float(t) for t in terms)
    return CostBreakdown(total=p_rho + p_sigma - 2.0 * ov, purity_rho=p_rho, purity_sigma=p_sigma, overlap=ov)


def cost(rho: DensityMatrix, ansatz: PurificationAnsatz, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    return cost_breakdown(rho, ansatz, tolerances=tolerances).total


def _cost_and_gradient(rho: np.ndarray, params: np.ndarray, d_sys: int, d_anc: int) -> tuple[float, np.ndarray]:
    half = d_sys * d_anc
    m = (params[:half] + 1j * params[half:]).reshape(d_sys, d_anc)
    norm2 = float(np.vdot(m, m).real)
    if not norm2 > 0.0:
        raise ZeroVector("Ansatz has no nonzero amplitude.")
    sigma = m @ m.conj().T / norm2
    delta = sigma - rho
    value = float(np.vdot(delta, delta).real)

    g = 2.0 * delta
    k = (g @ m - np.einsum("ij,ji->", g, sigma).real * m) / norm2
    grad = np.concatenate([2.0 * k.real.ravel(), 2.0 * k.imag.ravel()])
    return value, grad


def gradient(rho: DensityMatrix, ansatz: PurificationAnsatz, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Analytic gradient of the cost with respect to the real parameter vector."""
    rho = validate_density(rho, tolerances)
    _check_dims(rho, ansatz)
    return _cost_and_gradient(rho.matrix, np.asarray(ansatz.params), ansatz.d_sys, ansatz.d_anc)[1]


#####################################
# Optimizer
#####################################


@dataclass(frozen=True)
class OptimizerConfig:
    """
    step_rule is one of:

    - "backtracking": gradient descent, Armijo backtracking, step doubled after each accepted step
    - "lbfgs": scipy L-BFGS-B with the analytic gradient (noise-free runs only)
    - "fixed": gradient descent with step initial_step

    noise_std perturbs the cost the line search sees; cost_history always
    holds the exact cost of each accepted point.
    """

    max_iters: int = 5000
    restarts: int = 5
    seed: int = 0
    convergence_tol: float = 1e-6
    step_rule: str = "backtracking"
    initial_step: float = 1.0
    armijo: float = 1e-4
    grad_tol: float = 1e-10
    noise_std: float = 0.0

    def with_overrides(self, overrides: Mapping[str, Any]) -> OptimizerConfig:
        known = {f.name: f.type for f in dataclasses.fields(self)}
        unknown = set(overrides) - set(known)
        if unknown:
            raise ValueError(f"Unknown optimizer settings: {sorted(unknown)}")
        cast = {
            key: (str(value) if key == "step_rule" else int(value) if key in ("max_iters", "restarts", "seed") else float(value))
            for key, value in overrides.items()
        }
        return dataclasses.replace(self, **cast)


@dataclass(frozen=True)
class VariationalRun:
    cost_history: tuple[float, ...]
    final_params: PurificationAnsatz
    final_state: DensityMatrix
    final_cost: float
    closed_form_gap: float
    iterations: int
    converged: bool
    budget_exhausted: bool = False
    restart_index: int = 0
    restart_costs: tuple[float, ...] = ()

    def cost_history_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"iteration": np.arange(len(self.cost_history)), "cost": np.asarray(self.cost_history, dtype=float)}
        )

    def to_record(self) -> dict[str, Any]:
        values = np.sort(np.linalg.eigvalsh(self.final_state.matrix))[::-1]
        return {
            "final_cost": float(self.final_cost),
            "closed_form_gap": float(self.closed_form_gap),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "budget_exhausted": bool(self.budget_exhausted),
            "restart_index": int(self.restart_index),
            "restart_costs": [float(c) for c in self.restart_costs],
            "final_spectrum": [float(v) for v in values[: self.final_params.d_anc]],
        }


def _exact_cost(rho: np.ndarray, params: np.ndarray, d_sys: int, d_anc: int) -> float:
    value, _ = _cost_and_gradient(rho, params, d_sys, d_anc)
    return value


def _with_noise(value: float, noise_std: float, rng: np.random.Generator) -> float:
    if noise_std > 0.0:
        # noise on Tr(rho^2), Tr(sigma^2) and the overlap, with the overlap counted twice
        e_rho, e_sigma, e_overlap = rng.normal(0.0, noise_std, size=3)
        value += e_rho + e_sigma - 2.0 * e_overlap
    return value


def _descend_lbfgs(rho: np.ndarray, start: np.ndarray, d_sys: int, d_anc: int, config: OptimizerConfig) -> tuple[np.ndarray, list[float], int, bool]:
    x = start / np.linalg.norm(start)
    history = [_exact_cost(rho, x, d_sys, d_anc)]
    if config.max_iters == 0:
        return x, history, 0, True

    def objective(params: np.ndarray) -> tuple[float, np.ndarray]:
        return _cost_and_gradient(rho, params, d_sys, d_anc)

    def record(params: np.ndarray) -> None:
        history.append(_exact_cost(rho, params, d_sys, d_anc))

    result = scipy.optimize.minimize(
        objective,
        x,
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={"maxiter": config.max_iters, "gtol": config.grad_tol, "ftol": LBFGS_FTOL},
    )
    iterations = int(result.nit)
    return result.x / np.linalg.norm(result.x), history, iterations, iterations >= config.max_iters


def _descend(rho: np.ndarray, start: np.ndarray, d_sys: int, d_anc: int, config: OptimizerConfig, rng: np.random.Generator) -> tuple[np.ndarray, list[float], int, bool]:
    """Gradient descent from `start`; returns params, history, iterations, hit_cap."""
    if config.step_rule == "lbfgs":
        return _descend_lbfgs(rho, start, d_sys, d_anc, config)
    x = start / np.linalg.norm(start)
    exact = _exact_cost(rho, x, d_sys, d_anc)
    f = _with_noise(exact, config.noise_std, rng)
    history = [exact]
    step = config.initial_step

    for iteration in range(config.max_iters):
        _, g = _cost_and_gradient(rho, x, d_sys, d_anc)
        g2 = float(g @ g)
        if np.sqrt(g2) <= config.grad_tol:
            return x, history, iteration, False

        if config.step_rule == "fixed":
            candidate = x - config.initial_step * g
            exact_new = _exact_cost(rho, candidate, d_sys, d_anc)
            f_new = _with_noise(exact_new, config.noise_std, rng)
        else:
            while True:
                candidate = x - step * g
                exact_new = _exact_cost(rho, candidate, d_sys, d_anc)
                f_new = _with_noise(exact_new, config.noise_std, rng)
                # a noisy estimate may pass Armijo on a step that is uphill in the exact cost
                if f_new <= f - config.armijo * step * g2 and exact_new <= exact:
                    break
                step *= 0.5
                if step < MIN_STEP:
                    # no decrease along -g at machine precision
                    return x, history, iteration, False
            step = min(2.0 * step, MAX_STEP)

        x = candidate / np.linalg.norm(candidate)
        f, exact = f_new, exact_new
        history.append(exact)

    return x, history, config.max_iters, True


def optimize(
    rho: DensityMatrix,
    rank_bound: int,
    config: OptimizerConfig = OptimizerConfig(),
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> VariationalRun:
    """
    Best-of-restarts gradient descent on the HS cost with ancilla dimension R.

    Restart k starts from Gaussian parameters drawn with seed config.seed + k.
    converged is final_cost <= D*_HS + convergence_tol. A best run that hit
    max_iters without converging sets budget_exhausted; it is still returned.

    Raises:
        BudgetExceeded: negative max_iters or fewer than one restart.
    """
    rho = validate_density(rho, tolerances)
    check_rank_bound(rank_bound, rho.dim)
    if config.max_iters < 0 or config.restarts < 1:
        raise BudgetExceeded(f"Need max_iters >= 0 and restarts >= 1, got {config.max_iters} and {config.restarts}.")
    if config.step_rule not in STEP_RULES:
        raise ValueError(f"Unknown step rule: {config.step_rule!r}")
    if config.step_rule == "lbfgs" and config.noise_std > 0.0:
        raise ValueError("L-BFGS-B needs an exact cost; use the backtracking rule with noise_std > 0.")
    optimum = solve_hs_distance(rho, rank_bound, tolerances)

    runs = []
    for k in range(config.restarts):
        start = PurificationAnsatz.random(rho.dim, rank_bound, config.seed + k)
        noise_rng = np.random.default_rng(config.seed + k)
        params, history, iterations, hit_cap = _descend(
            rho.matrix, np.asarray(start.params), rho.dim, rank_bound, config, noise_rng
        )
        final_cost, _ = _cost_and_gradient(rho.matrix, params, rho.dim, rank_bound)
        logger.debug(f"restart {k}: cost {final_cost:.12g} after {iterations} iterations")
        runs.append((final_cost, k, params, history, iterations, hit_cap))

    final_cost, best_k, params, history, iterations, hit_cap = min(runs, key=lambda run: (run[0], run[1]))
    ansatz = PurificationAnsatz(rho.dim, rank_bound, params)
    converged = bool(final_cost <= optimum + config.convergence_tol)
    run = VariationalRun(
        cost_history=tuple(float(c) for c in history),
        final_params=ansatz,
        final_state=prepare_state(ansatz, tolerances),
        final_cost=float(final_cost),
        closed_form_gap=float(final_cost - optimum),
        iterations=iterations,
        converged=converged,
        budget_exhausted=bool(hit_cap and not converged),
        restart_index=best_k,
        restart_costs=tuple(float(r[0]) for r in runs),
    )
    logger.info(
        f"Variational run: R={rank_bound}, best restart {best_k}, cost {run.final_cost:.12g}, "
        f"gap {run.closed_form_gap:.3e}, converged={run.converged}"
    )
    return run


#####################################
# Principal Components
#####################################


@dataclass(frozen=True)
class PrincipalComponents:
    values: np.ndarray
    vectors: np.ndarray
    degenerate: bool

    def __iter__(self):
        return iter(zip(self.values, self.vectors.T))

    def __len__(self) -> int:
        return int(self.values.size)


def extract_principal_components(sigma: DensityMatrix, rank_bound: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> PrincipalComponents:
    """
    Top-R eigenpairs of sigma in descending order.

    `degenerate` is set when two of the top-R eigenvalues, or the R-th and
    (R+1)-th, coincide within degeneracy_tol; the ordering is then arbitrary.
    """
    sigma = validate_density(sigma, tolerances)
    check_rank_bound(rank_bound, sigma.dim)
    spectrum = eigh(sigma, tolerances)
    values = spectrum.values
    upto = min(rank_bound + 1, sigma.dim)
    gaps = np.abs(np.diff(values[:upto]))
    positive = values[1:upto] > tolerances.rank_tol
    degenerate = bool(np.any((gaps <= tolerances.degeneracy_tol) & positive))
    if degenerate:
        logger.warning("Principal components are degenerate; their ordering is not unique.")
    return PrincipalComponents(
        values=frozen_array(values[:rank_bound], float),
        vectors=frozen_array(spectrum.vectors[:, :rank_bound]),
        degenerate=degenerate,
    )


def principal_overlaps(rho: DensityMatrix, components: PrincipalComponents, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """|<e_i(rho), e_i(sigma)>| for each extracted component i."""
    reference = eigh(rho, tolerances).vectors[:, : len(components)]
    return np.abs(np.einsum("ji,ji->i", reference.conj(), components.vectors))


#####################################
# Misordering Hazard
#####################################


@dataclass(frozen=True)
class MisorderingReport:
    found: bool
    reason: str
    member: DensityMatrix | None
    member_spectrum: tuple[float, ...]
    swapped_pair: tuple[int, int] | None
    trace_distance: float | None
    optimal_trace_distance: float
    hs_distance: float | None
    optimal_hs_distance: float

    def to_record(self) -> dict[str, Any]:
        return {
            "found": self.found,
            "reason": self.reason,
            "member_spectrum": list(self.member_spectrum),
            "swapped_pair": list(self.swapped_pair) if self.swapped_pair else None,
            "trace_distance": self.trace_distance,
            "optimal_trace_distance": self.optimal_trace_distance,
            "hs_distance": self.hs_distance,
            "optimal_hs_distance": self.optimal_hs_distance,
        }


def _first_inversion(top: np.ndarray, tol: float) -> tuple[int, int] | None:
    for j in range(top.size - 1):
        if top[j] < top[j + 1] - tol:
            return j, j + 1
    return None


def _misordered_candidates(lower: np.ndarray, slack: float, family: TraceOptimalFamily, seed: SeedLike, samples: int) -> Iterator[np.ndarray]:
    rank_bound = lower.size
    canonical = lower + slack / rank_bound
    # swap the closest adjacent pair of the canonical point
    gaps = lower[:-1] - lower[1:]
    j = int(np.argmin(gaps))
    swapped = canonical.copy()
    swapped[j], swapped[j + 1] = canonical[j + 1], canonical[j]
    yield swapped
    # uniform family samples
    rng = as_rng(seed)
    for _ in range(samples):
        member = trace_family_sample(family, rng)
        yield np.asarray(np.einsum("ji,jk,ki->i", family.eigenbasis.conj(), member.matrix, family.eigenbasis).real)
    # all slack on the lower index of each adjacent pair
    for j in range(rank_bound - 1):
        extreme = lower.copy()
        extreme[j + 1] += slack
        yield extreme


def misordering_demo(
    rho: DensityMatrix,
    rank_bound: int,
    seed: SeedLike = 0,
    samples: int = 64,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> MisorderingReport:
    """
    Look for a trace-optimal state whose eigenvalue order disagrees with rho's.

    Such a member exists exactly when the slack exceeds some adjacent gap
    among rho's top-R eigenvalues. The HS optimum is unique and always keeps
    rho's order, so the HS distance of any member found is strictly larger.
    """
    rho = validate_density(rho, tolerances)
    family = trace_family(rho, rank_bound, tolerances)
    optimal_trace = solve_trace_distance(rho, rank_bound, tolerances)
    optimal_hs = solve_hs_distance(rho, rank_bound, tolerances)
    lower = np.asarray(family.lower_bounds, dtype=float)

    if rank_bound >= 2 and family.slack > 0.0:
        for top in _misordered_candidates(lower, family.slack, family, seed, samples):
            pair = _first_inversion(top, tolerances.degeneracy_tol)
            if pair is None or np.any(top < lower - 1e-12):
                continue
            member = family_member(family, top, tolerances)
            if not trace_family_contains(family, member, tol=1e-9):
                continue
            logger.info(f"Misordered trace-optimal member found: {np.round(top, 12).tolist()} swaps {pair}")
            return MisorderingReport(
                found=True,
                reason="found",
                member=member,
                member_spectrum=tuple(float(v) for v in top),
                swapped_pair=pair,
                trace_distance=trace_distance(rho, member),
                optimal_trace_distance=optimal_trace,
                hs_distance=hs_distance(rho, member),
                optimal_hs_distance=optimal_hs,
            )

    logger.info(f"{NO_MISORDERED_MEMBER}: slack {family.slack:.12g} cannot reorder the top-{rank_bound} eigenvalues")
    return MisorderingReport(
        found=False,
        reason=NO_MISORDERED_MEMBER,
        member=None,
        member_spectrum=(),
        swapped_pair=None,
        trace_distance=None,
        optimal_trace_distance=optimal_trace,
        hs_distance=None,
        optimal_hs_distance=optimal_hs,
    )


def converged_state_in_basis(run: VariationalRun, rho: DensityMatrix, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Diagonal of the learned state in rho's eigenbasis."""
    vectors = eigh(rho, tolerances).vectors
    return np.einsum("ji,jk,ki->i", vectors.conj(), run.final_state.matrix, vectors).real
