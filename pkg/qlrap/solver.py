"""
qlrap/solver.py

Closed-form solutions of the rank-constrained state approximation problem

    sigma*(R) = argmin D(rho, sigma)  over states sigma with rank(sigma) <= R

for the Hilbert-Schmidt and trace distances.

Both optima are built from the top-R eigenpairs of rho:

- truncation     tau_R = Pi_R rho Pi_R (trace generally below one)
- normalisation  N_R   = ((1 - Tr tau_R) / R) Pi_R
- HS optimum     sigma* = tau_R + N_R, unique
- trace optimum  any sigma diagonal in rho's eigenbasis, supported on the
                 top R indices, with every eigenvalue at least lambda_i;
                 tau_R + N_R is one member

Eigenvalues below rank_tol are treated as exact zeros, so distances reach
exactly 0 once R covers the rank of rho.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Callable, Iterable

import numpy as np

from qlrap.core_linalg import (
    DEFAULT_TOLERANCES,
    DensityMatrix,
    HermitianOperator,
    Spectrum,
    Tolerances,
    frozen_array,
    as_hermitian,
    check_rank_bound,
    density_from_spectrum,
    eigh,
    hs_distance,
    top_projector,
    trace_distance,
    validate_density,
)
from qlrap.errors import DEGENERATE_BOUNDARY, DimMismatch, ZeroTrace
from qlrap.random_states import SeedLike, as_rng
from utils.utils_logger import logger

#####################################
# Domain Types
#####################################


class MetricTag(str, enum.Enum):
    HILBERT_SCHMIDT = "hs"
    TRACE = "trace"

    @classmethod
    def parse(cls, value: Any) -> MetricTag:
        """Accept a MetricTag, 'hs', 'trace' or 'hilbert_schmidt' (any case)."""
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().replace("-", "_")
        if text in ("hs", "hilbert_schmidt"):
            return cls.HILBERT_SCHMIDT
        if text == "trace":
            return cls.TRACE
        raise ValueError(f"Unknown metric: {value!r} (expected 'hs' or 'trace').")


@dataclass(frozen=True)
class QlrapSolution:
    metric: MetricTag
    rank_bound: int
    sigma_star: DensityMatrix
    distance_star: float
    eigenbasis: Spectrum
    truncated_weight: float
    warnings: tuple[str, ...] = ()

    @property
    def sigma_spectrum(self) -> np.ndarray:
        """Eigenvalues of sigma* on rho's top-R eigenvectors, in rho's order."""
        vectors = self.eigenbasis.vectors[:, : self.rank_bound]
        return np.einsum("ji,jk,ki->i", vectors.conj(), self.sigma_star.matrix, vectors).real

    def to_record(self) -> dict[str, Any]:
        return {
            "metric": self.metric.value,
            "rank_bound": self.rank_bound,
            "dim": self.sigma_star.dim,
            "input_spectrum": [float(v) for v in self.eigenbasis.values],
            "sigma_spectrum": [float(v) for v in self.sigma_spectrum],
            "distance_star": float(self.distance_star),
            "truncated_weight": float(self.truncated_weight),
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class TraceOptimalFamily:
    """Every state diagonal in rho's eigenbasis, supported on the top R
    indices, with eigenvalue i at least lower_bounds[i]."""

    spectrum: Spectrum
    rank_bound: int
    lower_bounds: np.ndarray
    slack: float

    @property
    def eigenbasis(self) -> np.ndarray:
        return self.spectrum.vectors[:, : self.rank_bound]

    @property
    def dim(self) -> int:
        return self.spectrum.dim

    def describe(self) -> dict[str, Any]:
        return {
            "rank_bound": self.rank_bound,
            "lower_bounds": [float(v) for v in self.lower_bounds],
            "slack": float(self.slack),
        }


@dataclass(frozen=True)
class FamilyViolations:
    """How far a state is from each membership condition (0 means satisfied)."""

    off_diagonal: float
    outside_support: float
    lower_bound: float
    trace: float

    def worst(self) -> float:
        return max(self.off_diagonal, self.outside_support, self.lower_bound, self.trace)

    def satisfied(self, tol: float) -> bool:
        return self.worst() <= tol


SolveFn = Callable[..., QlrapSolution]

#####################################
# Helper Functions
#####################################


def _spectrum_of(rho: Any, tolerances: Tolerances) -> tuple[DensityMatrix, Spectrum, np.ndarray]:
    """Validate rho and return it with its spectrum and the clipped eigenvalues."""
    rho = validate_density(rho, tolerances)
    spectrum = eigh(rho, tolerances)
    values = np.where(spectrum.values < tolerances.rank_tol, 0.0, spectrum.values)
    return rho, spectrum, values


def _slack(values: np.ndarray, rank_bound: int) -> float:
    """1 - sum of the top R eigenvalues; exactly 0 once R covers the rank."""
    if not np.any(values[rank_bound:] > 0.0):
        return 0.0
    return float(1.0 - values[:rank_bound].sum())


def _degeneracy_warnings(values: np.ndarray, rank_bound: int, tolerances: Tolerances) -> tuple[str, ...]:
    if rank_bound >= values.size:
        return ()
    upper, lower = values[rank_bound - 1], values[rank_bound]
    if abs(upper - lower) > tolerances.degeneracy_tol or upper <= tolerances.rank_tol:
        return ()
    message = (
        f"{DEGENERATE_BOUNDARY}: eigenvalues {rank_bound} and {rank_bound + 1} are equal "
        f"within {tolerances.degeneracy_tol:g} ({upper:.12g}); the top-{rank_bound} "
        "projector is one of several equally valid choices."
    )
    logger.warning(message)
    return (message,)


def _shifted_state(spectrum: Spectrum, values: np.ndarray, rank_bound: int, tolerances: Tolerances) -> DensityMatrix:
    """tau_R + N_R written in rho's eigenbasis."""
    shift = _slack(values, rank_bound) / rank_bound
    shifted = np.zeros_like(values)
    shifted[:rank_bound] = values[:rank_bound] + shift
    return density_from_spectrum(shifted, spectrum.vectors, tolerances)


#####################################
# Truncation and Distances
#####################################


def truncate(rho: DensityMatrix, rank_bound: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> HermitianOperator:
    """tau_R = Pi_R rho Pi_R, the Eckart-Young truncation of rho."""
    rho = validate_density(rho, tolerances)
    spectrum = eigh(rho, tolerances)
    projector = top_projector(spectrum, rank_bound).matrix
    return as_hermitian(projector @ rho.matrix @ projector, tolerances)


def solve_hs_distance(rho: DensityMatrix, rank_bound: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """sum_{i>R} lambda_i^2 + R ((1 - sum_{i<=R} lambda_i) / R)^2."""
    _, spectrum, values = _spectrum_of(rho, tolerances)
    check_rank_bound(rank_bound, spectrum.dim)
    tail = values[rank_bound:]
    return float((tail**2).sum() + _slack(values, rank_bound) ** 2 / rank_bound)


def solve_trace_distance(rho: DensityMatrix, rank_bound: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """1 - Tr[Pi_R rho], i.e. the eigenvalue weight beyond the top R."""
    _, spectrum, values = _spectrum_of(rho, tolerances)
    check_rank_bound(rank_bound, spectrum.dim)
    return float(values[rank_bound:].sum())


def eckart_young_error(rho: DensityMatrix, rank_bound: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """||rho - tau_R||_F^2, the unconstrained low-rank error."""
    _, spectrum, values = _spectrum_of(rho, tolerances)
    check_rank_bound(rank_bound, spectrum.dim)
    return float((values[rank_bound:] ** 2).sum())


def trace_constraint_penalty(rho: DensityMatrix, rank_bound: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Extra HS cost of requiring unit trace: slack^2 / R."""
    _, spectrum, values = _spectrum_of(rho, tolerances)
    check_rank_bound(rank_bound, spectrum.dim)
    return _slack(values, rank_bound) ** 2 / rank_bound


def support_set_distance(values: Iterable[float], support: Iterable[int], metric: MetricTag | str) -> float:
    """
    Smallest distance from diag(values) to a state diagonal in the same
    basis and supported only on `support`.

    HS:    (sum_{i not in S} lambda_i)^2 / |S| + sum_{i not in S} lambda_i^2
    trace: sum_{i not in S} lambda_i
    """
    values = np.asarray(list(values), dtype=float)
    support = sorted(set(int(i) for i in support))
    if not support or support[0] < 0 or support[-1] >= values.size:
        raise DimMismatch(f"Support {support} is not a non-empty subset of range({values.size}).")
    outside = np.delete(values, support)
    if MetricTag.parse(metric) is MetricTag.HILBERT_SCHMIDT:
        return float(outside.sum() ** 2 / len(support) + (outside**2).sum())
    return float(outside.sum())


def metric_distance(metric: MetricTag | str, rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if MetricTag.parse(metric) is MetricTag.HILBERT_SCHMIDT:
        return hs_distance(rho, sigma)
    return trace_distance(rho, sigma)


#####################################
# Solvers
#####################################


def solve_hs(rho: DensityMatrix, rank_bound: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> QlrapSolution:
    """The unique Hilbert-Schmidt optimum sigma* = tau_R + N_R."""
    return _solve(rho, rank_bound, MetricTag.HILBERT_SCHMIDT, tolerances)


def solve_trace_canonical(rho: DensityMatrix, rank_bound: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> QlrapSolution:
    """tau_R + N_R as one trace-distance optimum (see trace_family for the rest)."""
    return _solve(rho, rank_bound, MetricTag.TRACE, tolerances)


def solve(rho: DensityMatrix, rank_bound: int, metric: MetricTag | str = MetricTag.HILBERT_SCHMIDT, tolerances: Tolerances = DEFAULT_TOLERANCES) -> QlrapSolution:
    return _solve(rho, rank_bound, MetricTag.parse(metric), tolerances)


def _solve(rho: Any, rank_bound: int, metric: MetricTag, tolerances: Tolerances) -> QlrapSolution:
    rho, spectrum, values = _spectrum_of(rho, tolerances)
    check_rank_bound(rank_bound, spectrum.dim)

    sigma = _shifted_state(spectrum, values, rank_bound, tolerances)
    tail = values[rank_bound:]
    slack = _slack(values, rank_bound)
    if metric is MetricTag.HILBERT_SCHMIDT:
        distance = float((tail**2).sum() + slack**2 / rank_bound)
    else:
        distance = float(tail.sum())

    logger.debug(f"Solved {metric.value} problem: d={spectrum.dim}, R={rank_bound}, D*={distance:.12g}")
    return QlrapSolution(
        metric=metric,
        rank_bound=int(rank_bound),
        sigma_star=sigma,
        distance_star=distance,
        eigenbasis=spectrum,
        truncated_weight=slack,
        warnings=_degeneracy_warnings(values, rank_bound, tolerances),
    )


def naive_rescale(rho: DensityMatrix, rank_bound: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> DensityMatrix:
    """tau_R / Tr[tau_R]. Never better than solve_hs in HS distance."""
    _, spectrum, values = _spectrum_of(rho, tolerances)
    check_rank_bound(rank_bound, spectrum.dim)
    kept = values[:rank_bound].sum()
    if kept <= tolerances.rank_tol:
        raise ZeroTrace(f"Top-{rank_bound} eigenvalues sum to {kept:.3e}; cannot rescale.")
    scaled = np.zeros_like(values)
    scaled[:rank_bound] = values[:rank_bound] / kept
    return density_from_spectrum(scaled, spectrum.vectors, tolerances)


#####################################
# Trace-Distance Optimal Family
#####################################


def trace_family(rho: DensityMatrix, rank_bound: int, tolerances: Tolerances = DEFAULT_TOLERANCES) -> TraceOptimalFamily:
    _, spectrum, values = _spectrum_of(rho, tolerances)
    check_rank_bound(rank_bound, spectrum.dim)
    return TraceOptimalFamily(
        spectrum=spectrum,
        rank_bound=int(rank_bound),
        lower_bounds=frozen_array(values[:rank_bound], float),
        slack=_slack(values, rank_bound),
    )


def _degenerate_blocks(values: np.ndarray, tol: float) -> list[list[int]]:
    blocks: list[list[int]] = []
    for i, value in enumerate(values):
        if blocks and abs(values[blocks[-1][0]] - value) <= tol:
            blocks[-1].append(i)
        else:
            blocks.append([i])
    return blocks


def trace_family_violations(
    family: TraceOptimalFamily,
    sigma: DensityMatrix,
    allow_block_rotation: bool = False,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> FamilyViolations:
    """
    Measure sigma against each membership condition in rho's eigenbasis.

    With allow_block_rotation, rotations inside degenerate eigenspaces of
    rho are not counted as off-diagonal: each degenerate block of sigma is
    replaced by its own eigenvalues before the bound and support checks.
    """
    matrix = sigma.matrix if isinstance(sigma, DensityMatrix) else np.asarray(sigma, dtype=np.complex128)
    if matrix.shape != (family.dim, family.dim):
        raise DimMismatch(f"State has shape {matrix.shape}, family dimension is {family.dim}.")

    vectors = family.spectrum.vectors
    rotated = vectors.conj().T @ matrix @ vectors
    diagonal = rotated.diagonal().real.copy()
    off = rotated - np.diag(rotated.diagonal())

    if allow_block_rotation:
        for block in _degenerate_blocks(family.spectrum.values, tolerances.degeneracy_tol):
            if len(block) < 2:
                continue
            index = np.ix_(block, block)
            diagonal[block] = np.linalg.eigvalsh(rotated[index])[::-1]
            off[index] = 0.0

    rank_bound = family.rank_bound
    outside = diagonal[rank_bound:]
    deficit = np.asarray(family.lower_bounds) - diagonal[:rank_bound]
    return FamilyViolations(
        off_diagonal=float(np.max(np.abs(off), initial=0.0)),
        outside_support=float(np.max(np.abs(outside), initial=0.0)),
        lower_bound=float(max(0.0, np.max(deficit, initial=0.0))),
        trace=float(abs(np.trace(matrix).real - 1.0)),
    )


def trace_family_contains(
    family: TraceOptimalFamily,
    sigma: DensityMatrix,
    tol: float = 1e-9,
    allow_block_rotation: bool = False,
) -> bool:
    return trace_family_violations(family, sigma, allow_block_rotation).satisfied(tol)


def trace_family_sample(family: TraceOptimalFamily, seed: SeedLike = None, tolerances: Tolerances = DEFAULT_TOLERANCES) -> DensityMatrix:
    """
    Uniform member of the family: lower_bounds + delta, where delta is
    uniform on {delta >= 0, sum delta = slack} via sorted uniform spacings.
    """
    rank_bound = family.rank_bound
    if family.slack <= 0.0 or rank_bound == 1:
        delta = np.full(rank_bound, family.slack if rank_bound == 1 else 0.0)
    else:
        cuts = np.sort(as_rng(seed).uniform(size=rank_bound - 1))
        delta = np.diff(np.concatenate(([0.0], cuts, [1.0]))) * family.slack
    values = np.zeros(family.dim)
    values[:rank_bound] = np.asarray(family.lower_bounds) + delta
    return density_from_spectrum(values, family.spectrum.vectors, tolerances)


def family_member(family: TraceOptimalFamily, top_values: Iterable[float], tolerances: Tolerances = DEFAULT_TOLERANCES) -> DensityMatrix:
    """State with the given eigenvalues on rho's top-R eigenvectors (membership not checked)."""
    top = np.asarray(list(top_values), dtype=float)
    if top.size != family.rank_bound:
        raise DimMismatch(f"Expected {family.rank_bound} values, got {top.size}.")
    values = np.zeros(family.dim)
    values[: family.rank_bound] = top
    return density_from_spectrum(values, family.spectrum.vectors, tolerances)


#####################################
# Main Function for Testing
#####################################


def main() -> None:
    """Solve the four-level worked example for both metrics."""
    rho = density_from_spectrum([0.41, 0.39, 0.2, 0.0])
    for metric in MetricTag:
        solution = solve(rho, 2, metric)
        logger.info(f"{metric.value}: {solution.to_record()}")
    logger.info(f"naive rescale HS distance: {hs_distance(rho, naive_rescale(rho, 2)):.12g}")


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    main()
