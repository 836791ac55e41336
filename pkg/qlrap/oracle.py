"""
qlrap/oracle.py

Independent checks of the closed-form solver on small instances.

- grid_oracle: exhaustive search over simplex grid points on every
  support set of size R, in rho's eigenbasis.
- descent_oracle: projected gradient descent on the eigenvalue simplex
  from seeded random starts.
- rotation_test: random unitaries never improve on re-aligning a state's
  spectrum to rho's eigenbasis.
- majorization_audit: a state's spectrum majorizes its diagonal in any
  basis.

The two minimisers search only states diagonal in rho's eigenbasis;
rotation_test checks that restriction separately.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.special import comb

from qlrap.core_linalg import (
    DEFAULT_TOLERANCES,
    DensityMatrix,
    Tolerances,
    density_from_spectrum,
    diagonal_in_basis,
    eigh,
    majorization_margin,
    validate_density,
)
from qlrap.errors import BudgetExceeded, DimMismatch, NoConvergence
from qlrap.random_states import haar_unitary, random_density
from qlrap.solver import MetricTag, SolveFn, metric_distance, solve
from utils.utils_logger import logger

#####################################
# Budget Limits
#####################################

GRID_MAX_DIM = 8
GRID_MAX_RANK = 4
GRID_MAX_RESOLUTION = 200
DESCENT_MAX_DIM = 16

# Candidates within this distance of the best are counted as optimal.
NEAR_OPTIMAL_TOL = 1e-12

HS_STEP = 0.25
HUBER_WIDTH = 0.05
DESCENT_MAX_ITERS = 2000
DESCENT_STEP_TOL = 1e-13
DESCENT_MAX_SUPPORTS = 70

ROTATION_TOL = 1e-9

#####################################
# Reports
#####################################


@dataclass(frozen=True)
class OracleReport:
    check_name: str
    metric: MetricTag
    spectrum: tuple[float, ...]
    rank_bound: int
    seed: int | None
    oracle_distance: float
    closed_form_distance: float
    best_candidate: DensityMatrix
    candidates_evaluated: int
    gap_bound: float
    optimal_count: int = 1
    failed_restarts: int = 0
    terminal_candidates: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @property
    def dim(self) -> int:
        return len(self.spectrum)

    @property
    def gap(self) -> float:
        return self.oracle_distance - self.closed_form_distance

    def to_record(self) -> dict[str, Any]:
        return {
            "check_name": self.check_name,
            "metric": self.metric.value,
            "dim": self.dim,
            "rank_bound": self.rank_bound,
            "seed": self.seed,
            "spectrum": [float(v) for v in self.spectrum],
            "oracle_distance": float(self.oracle_distance),
            "closed_form_distance": float(self.closed_form_distance),
            "gap": float(self.gap),
            "gap_bound": float(self.gap_bound),
            "candidates_evaluated": int(self.candidates_evaluated),
            "optimal_count": int(self.optimal_count),
            "failed_restarts": int(self.failed_restarts),
        }


@dataclass(frozen=True)
class RotationResult:
    metric: MetricTag
    passed: bool
    worst_margin: float
    trials: int


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    worst_margin: float
    trials: int
    failures: int


#####################################
# Helper Functions
#####################################


@functools.lru_cache(maxsize=32)
def simplex_compositions(resolution: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length `parts` summing to `resolution`."""
    slots = resolution + parts - 1
    rows = []
    for bars in itertools.combinations(range(slots), parts - 1):
        edges = (-1, *bars, slots)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(parts)])
    out = np.array(rows, dtype=np.int64).reshape(-1, parts)
    out.setflags(write=False)
    return out


def project_to_simplex(rows: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Euclidean projection of each row onto {x >= 0, sum x = total} (sort-based)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    n = rows.shape[1]
    u = -np.sort(-rows, axis=1)
    css = np.cumsum(u, axis=1) - total
    positive = u - css / np.arange(1, n + 1) > 0
    # index of the last position where the threshold condition holds
    k = n - 1 - np.argmax(positive[:, ::-1], axis=1)
    theta = css[np.arange(rows.shape[0]), k] / (k + 1)
    return np.maximum(rows - theta[:, None], 0.0)


def _clipped_values(rho: DensityMatrix, tolerances: Tolerances) -> tuple[np.ndarray, np.ndarray]:
    spectrum = eigh(rho, tolerances)
    values = np.where(spectrum.values < tolerances.rank_tol, 0.0, spectrum.values)
    return values, spectrum.vectors


def _co_diagonal_distances(candidates: np.ndarray, values: np.ndarray, support: Sequence[int], metric: MetricTag) -> np.ndarray:
    """Distance from diag(values) to each candidate row placed on `support`."""
    target = values[list(support)]
    outside = np.delete(values, list(support))
    if metric is MetricTag.HILBERT_SCHMIDT:
        squares = np.einsum("ij,ij->i", candidates, candidates)
        return squares - 2.0 * (candidates @ target) + target @ target + outside @ outside
    return 0.5 * (np.abs(candidates - target).sum(axis=1) + outside.sum())


def _embed(top: np.ndarray, support: Sequence[int], dim: int) -> np.ndarray:
    full = np.zeros(dim)
    full[list(support)] = top
    return full


def _report_spectrum(values: np.ndarray) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


#####################################
# Grid Oracle
#####################################


def grid_gap_bound(rank_bound: int, resolution: int, metric: MetricTag | str) -> float:
    """Worst-case excess of the best grid point over the true optimum."""
    if MetricTag.parse(metric) is MetricTag.HILBERT_SCHMIDT:
        return rank_bound / resolution**2
    return rank_bound / (2.0 * resolution)


def grid_oracle(
    rho: DensityMatrix,
    rank_bound: int,
    resolution: int = 100,
    metric: MetricTag | str = MetricTag.HILBERT_SCHMIDT,
    supports: Iterable[Sequence[int]] | None = None,
    seed: int | None = None,
    solver: SolveFn = solve,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> OracleReport:
    """
    Exhaustive search over co-diagonal candidates.

    Every support set of size R (or only those given in `supports`) is
    paired with every grid point of the R-simplex at spacing 1/resolution.

    Raises:
        BudgetExceeded: d > 8, R > 4 or resolution outside [1, 200].
    """
    metric = MetricTag.parse(metric)
    rho = validate_density(rho, tolerances)
    dim = rho.dim
    if dim > GRID_MAX_DIM or rank_bound > GRID_MAX_RANK or not 1 <= resolution <= GRID_MAX_RESOLUTION:
        raise BudgetExceeded(
            f"Grid oracle limited to d <= {GRID_MAX_DIM}, R <= {GRID_MAX_RANK}, "
            f"resolution <= {GRID_MAX_RESOLUTION}; got d={dim}, R={rank_bound}, resolution={resolution}."
        )
    closed_form = solver(rho, rank_bound, metric, tolerances).distance_star

    values, vectors = _clipped_values(rho, tolerances)
    support_sets = [tuple(s) for s in supports] if supports is not None else list(
        itertools.combinations(range(dim), rank_bound)
    )
    for support in support_sets:
        if len(support) != rank_bound or not set(support) <= set(range(dim)):
            raise DimMismatch(f"Support {support} is not a size-{rank_bound} subset of range({dim}).")
    candidates = simplex_compositions(resolution, rank_bound) / resolution

    best_distance, best_point, best_support = np.inf, None, None
    # only supports whose minimum is near the running best are kept
    near_best: list[np.ndarray] = []
    for support in support_sets:
        distances = _co_diagonal_distances(candidates, values, support, metric)
        i = int(np.argmin(distances))
        if distances[i] < best_distance:
            best_distance, best_point, best_support = float(distances[i]), candidates[i], support
        if distances[i] <= best_distance + NEAR_OPTIMAL_TOL:
            near_best.append(distances)

    optimal_count = sum(
        int(np.count_nonzero(d <= best_distance + NEAR_OPTIMAL_TOL)) for d in near_best
    )
    evaluated = len(support_sets) * len(candidates)
    best = density_from_spectrum(_embed(best_point, best_support, dim), vectors, tolerances)
    logger.debug(
        f"grid_oracle {metric.value}: d={dim}, R={rank_bound}, res={resolution}, "
        f"best={best_distance:.12g}, closed={closed_form:.12g}, candidates={evaluated}"
    )
    return OracleReport(
        check_name="grid_oracle",
        metric=metric,
        spectrum=_report_spectrum(values),
        rank_bound=rank_bound,
        seed=seed,
        oracle_distance=best_distance,
        closed_form_distance=closed_form,
        best_candidate=best,
        candidates_evaluated=evaluated,
        gap_bound=grid_gap_bound(rank_bound, resolution, metric),
        optimal_count=optimal_count,
    )


#####################################
# Descent Oracle
#####################################


def _descent_supports(values: np.ndarray, rank_bound: int, max_supports: int) -> list[tuple[int, ...]]:
    """All supports of size R, or the max_supports that capture the most weight."""
    supports = list(itertools.combinations(range(values.size), rank_bound))
    if support_count(values.size, rank_bound) <= max_supports:
        return supports
    weights = np.array([values[list(s)].sum() for s in supports])
    keep = np.argsort(-weights, kind="stable")[:max_supports]
    return [supports[i] for i in keep]


def _descent_step(x: np.ndarray, target: np.ndarray, metric: MetricTag) -> np.ndarray:
    if metric is MetricTag.HILBERT_SCHMIDT:
        return project_to_simplex(x - HS_STEP * 2.0 * (x - target))
    # Huber-smoothed |x - target|; its minimisers on the simplex sit inside
    # the trace-optimal set for that support.
    slope = np.clip((x - target) / HUBER_WIDTH, -1.0, 1.0)
    return project_to_simplex(x - HUBER_WIDTH * slope)


def descent_oracle(
    rho: DensityMatrix,
    rank_bound: int,
    metric: MetricTag | str = MetricTag.HILBERT_SCHMIDT,
    restarts: int = 5,
    seed: int = 0,
    max_iters: int = DESCENT_MAX_ITERS,
    max_supports: int = DESCENT_MAX_SUPPORTS,
    solver: SolveFn = solve,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> OracleReport:
    """
    Projected gradient descent on the eigenvalue simplex of each support.

    Restart k starts from a Dirichlet(1, ..., 1) point drawn with seed
    seed + k. Runs that hit max_iters are counted as failed; distances
    are reported from the exact metric on the surviving runs.

    Raises:
        BudgetExceeded: d > 16 or restarts < 1.
        NoConvergence: every run hit the iteration cap.
    """
    metric = MetricTag.parse(metric)
    rho = validate_density(rho, tolerances)
    dim = rho.dim
    if dim > DESCENT_MAX_DIM or restarts < 1:
        raise BudgetExceeded(f"Descent oracle needs d <= {DESCENT_MAX_DIM} and restarts >= 1.")
    closed_form = solver(rho, rank_bound, metric, tolerances).distance_star

    values, vectors = _clipped_values(rho, tolerances)
    supports = _descent_supports(values, rank_bound, max_supports)
    starts = np.concatenate(
        [np.random.default_rng(seed + k).dirichlet(np.ones(rank_bound), size=len(supports)) for k in range(restarts)]
    )
    row_support = np.tile(np.arange(len(supports)), restarts)
    targets = np.array([values[list(supports[s])] for s in row_support])

    x = starts
    active = np.ones(len(x), dtype=bool)
    iterations = 0
    while active.any() and iterations < max_iters:
        stepped = _descent_step(x[active], targets[active], metric)
        moved = np.max(np.abs(stepped - x[active]), axis=1)
        x[active] = stepped
        still = np.flatnonzero(active)[moved > DESCENT_STEP_TOL]
        active[:] = False
        active[still] = True
        iterations += 1

    failed = int(active.sum())
    if failed == len(x):
        raise NoConvergence(f"All {failed} descent runs hit the {max_iters}-iteration cap.")
    if failed:
        logger.warning(f"descent_oracle: {failed} of {len(x)} runs hit the iteration cap.")

    survivors = np.flatnonzero(~active)
    distances = np.empty(len(survivors))
    for j, row in enumerate(survivors):
        support = supports[row_support[row]]
        distances[j] = _co_diagonal_distances(x[row][None, :], values, support, metric)[0]

    best_j = int(np.argmin(distances))
    best_row = survivors[best_j]
    best_support = supports[row_support[best_row]]
    candidate = density_from_spectrum(_embed(x[best_row], best_support, dim), vectors, tolerances)
    oracle_distance = metric_distance(metric, rho, candidate)

    same_support = [r for r in survivors if row_support[r] == row_support[best_row]]
    terminal = tuple(_embed(x[r], best_support, dim) for r in same_support)
    logger.debug(
        f"descent_oracle {metric.value}: d={dim}, R={rank_bound}, runs={len(x)}, "
        f"iterations={iterations}, best={oracle_distance:.12g}, closed={closed_form:.12g}"
    )
    return OracleReport(
        check_name="descent_oracle",
        metric=metric,
        spectrum=_report_spectrum(values),
        rank_bound=rank_bound,
        seed=seed,
        oracle_distance=oracle_distance,
        closed_form_distance=closed_form,
        best_candidate=candidate,
        candidates_evaluated=len(x),
        gap_bound=1e-6,
        optimal_count=int(np.count_nonzero(distances <= distances[best_j] + NEAR_OPTIMAL_TOL)),
        failed_restarts=failed,
        terminal_candidates=terminal,
    )


#####################################
# Rotation Test
#####################################


def _aligned(rho: DensityMatrix, sigma: DensityMatrix, tolerances: Tolerances) -> DensityMatrix:
    """sigma's spectrum, sorted descending, placed on rho's eigenvectors."""
    basis = eigh(rho, tolerances).vectors
    sigma_values = np.clip(np.sort(np.linalg.eigvalsh(sigma.matrix))[::-1], 0.0, None)
    return density_from_spectrum(sigma_values / sigma_values.sum(), basis, tolerances)


def rotation_margin(
    rho: DensityMatrix,
    sigma_diag: DensityMatrix,
    unitary: np.ndarray,
    metric: MetricTag | str = MetricTag.HILBERT_SCHMIDT,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """D(rho, U sigma U^dagger) - D(rho, sigma'); never below -1e-9 for valid inputs."""
    rho = validate_density(rho, tolerances)
    sigma_diag = validate_density(sigma_diag, tolerances)
    aligned = _aligned(rho, sigma_diag, tolerances)
    return _margin(rho, sigma_diag, aligned, np.asarray(unitary), MetricTag.parse(metric), tolerances)


def _margin(rho: DensityMatrix, sigma: DensityMatrix, aligned: DensityMatrix, unitary: np.ndarray, metric: MetricTag, tolerances: Tolerances) -> float:
    rotated = validate_density(unitary @ sigma.matrix @ unitary.conj().T, tolerances)
    return metric_distance(metric, rho, rotated) - metric_distance(metric, rho, aligned)


def rotation_test(
    rho: DensityMatrix,
    sigma_diag: DensityMatrix,
    n_trials: int = 1000,
    seed: int = 0,
    metric: MetricTag | str = MetricTag.HILBERT_SCHMIDT,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> RotationResult:
    """Trial i draws a Haar unitary with seed + i and records the margin."""
    metric = MetricTag.parse(metric)
    rho = validate_density(rho, tolerances)
    sigma_diag = validate_density(sigma_diag, tolerances)
    aligned = _aligned(rho, sigma_diag, tolerances)

    worst = np.inf
    for trial in range(n_trials):
        unitary = haar_unitary(rho.dim, seed + trial)
        worst = min(worst, _margin(rho, sigma_diag, aligned, unitary, metric, tolerances))
    worst = float(worst) if n_trials else 0.0
    passed = worst >= -ROTATION_TOL
    logger.debug(f"rotation_test {metric.value}: trials={n_trials}, worst margin={worst:.3e}")
    return RotationResult(metric=metric, passed=passed, worst_margin=worst, trials=n_trials)


#####################################
# Majorization Audit
#####################################


def majorization_audit(
    n_trials: int = 1000,
    seed: int = 0,
    dim: int = 6,
    rho: DensityMatrix | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> AuditResult:
    """
    Check that a state's spectrum majorizes its diagonal in a random basis.

    Trial i uses seed + i for both the random state (unless `rho` is
    given) and the Haar basis.
    """
    if rho is not None:
        rho = validate_density(rho, tolerances)
        dim = rho.dim

    worst, failures = np.inf, 0
    for trial in range(n_trials):
        rng = np.random.default_rng(seed + trial)
        sigma = rho if rho is not None else random_density(dim, seed=rng, tolerances=tolerances)
        basis = haar_unitary(dim, rng)
        diagonal = diagonal_in_basis(sigma, basis)
        spectrum = np.linalg.eigvalsh(sigma.matrix)
        margin = majorization_margin(spectrum, diagonal)
        if margin < -tolerances.sum_tol:
            failures += 1
        worst = min(worst, margin)

    worst = float(worst) if n_trials else 0.0
    logger.debug(f"majorization_audit: trials={n_trials}, failures={failures}, worst={worst:.3e}")
    return AuditResult(passed=failures == 0, worst_margin=worst, trials=n_trials, failures=failures)


def support_count(dim: int, rank_bound: int) -> int:
    """Number of support sets of size R in dimension d."""
    return int(comb(dim, rank_bound, exact=True))
