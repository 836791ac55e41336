"""
qlrap/core_linalg.py

Hermitian matrix types, validation, spectral decomposition, distances,
and partial trace.

Every value type here is a frozen dataclass over a read-only complex128
numpy array, so a validated state can be shared freely. Tolerances are
passed in explicitly as a `Tolerances` value; nothing in this module
reads the environment.

Conventions:
- Hilbert-Schmidt distance is Tr[(rho - sigma)^2] with no square root.
- Trace distance is half the sum of absolute eigenvalues of rho - sigma.
- Spectra are returned in non-increasing order; ties keep solver order.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from qlrap.errors import (
    DimMismatch,
    LengthMismatch,
    NoConvergence,
    NotHermitian,
    NotNormalized,
    NotPSD,
    NotUnitTrace,
    RankOutOfRange,
    SumMismatch,
    ValidationError,
)
from utils.utils_logger import logger

#####################################
# Tolerances
#####################################


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by every qlrap operation."""

    herm_tol: float = 1e-9
    trace_tol: float = 1e-9
    psd_tol: float = 1e-9
    ortho_tol: float = 1e-8
    recon_tol: float = 1e-8
    proj_tol: float = 1e-9
    imag_tol: float = 1e-9
    sum_tol: float = 1e-9
    rank_tol: float = 1e-10
    degeneracy_tol: float = 1e-9

    def with_overrides(self, overrides: Mapping[str, Any]) -> Tolerances:
        """Return a copy with the given fields replaced; unknown keys raise ValueError."""
        known = {field.name for field in dataclasses.fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"Unknown tolerance settings: {sorted(unknown)}")
        return dataclasses.replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT_TOLERANCES = Tolerances()


def frozen_array(array: Any, dtype: Any = np.complex128) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


#####################################
# Domain Types
#####################################


@dataclass(frozen=True)
class HermitianOperator:
    """A d x d complex matrix that is Hermitian within herm_tol."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True)
class DensityMatrix:
    """A Hermitian operator that is also PSD and unit-trace."""

    op: HermitianOperator

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def dim(self) -> int:
        return self.op.dim

    def rank(self, rank_tol: float = DEFAULT_TOLERANCES.rank_tol) -> int:
        """Number of eigenvalues above rank_tol."""
        return int(np.count_nonzero(np.linalg.eigvalsh(self.matrix) > rank_tol))


@dataclass(frozen=True)
class Spectrum:
    """Non-increasing eigenvalues; column i of `vectors` pairs with values[i]."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def vector(self, i: int) -> np.ndarray:
        return self.vectors[:, i]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector onto the span of the columns of `basis`.

    `indices` records which eigenvectors of the source spectrum were kept.
    """

    indices: tuple[int, ...]
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    @property
    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def idempotence_error(self) -> float:
        p = self.matrix
        return float(np.max(np.abs(p @ p - p), initial=0.0))


class Subsystem(enum.Enum):
    """Which factor of a system (x) ancilla vector to trace out."""

    SYSTEM = "system"
    ANCILLA = "ancilla"


#####################################
# Construction and Validation
#####################################


def _matrix_of(value: HermitianOperator | DensityMatrix | np.ndarray) -> np.ndarray:
    if isinstance(value, (HermitianOperator, DensityMatrix)):
        return value.matrix
    return np.asarray(value, dtype=np.complex128)


def as_hermitian(
    array: Any, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> HermitianOperator:
    """
    Check shape, finiteness and Hermiticity of a square matrix.

    The stored matrix is the exact symmetrisation (A + A^dagger)/2, so
    downstream code can rely on exact Hermiticity.

    Raises:
        DimMismatch: not a non-empty square matrix.
        ValidationError: NaN or Inf entries.
        NotHermitian: deviation above herm_tol (violation = max deviation).
    """
    if isinstance(array, HermitianOperator):
        return array
    matrix = np.asarray(array, dtype=np.complex128)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise DimMismatch(f"Expected a non-empty square matrix, got shape {matrix.shape}.")
    if not np.all(np.isfinite(matrix)):
        logger.error("Matrix contains NaN or Inf entries.")
        raise ValidationError("Matrix contains NaN or Inf entries.", violation=np.inf)

    deviation = float(np.max(np.abs(matrix - matrix.conj().T)))
    if deviation > tolerances.herm_tol:
        logger.error(f"Matrix is not Hermitian: deviation {deviation:.3e}")
        raise NotHermitian(
            f"Matrix is not Hermitian (max deviation {deviation:.3e}).", violation=deviation
        )
    return HermitianOperator(frozen_array((matrix + matrix.conj().T) / 2))


def validate_density(
    operator: Any, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> DensityMatrix:
    """
    Promote a Hermitian operator to a DensityMatrix.

    Checks run in order Hermitian, unit trace, PSD. Eigenvalues in
    (-psd_tol, 0) are clamped to zero and the trace renormalised.

    Raises:
        NotHermitian, NotUnitTrace, NotPSD: with the measured violation.
    """
    if isinstance(operator, DensityMatrix):
        return operator
    op = as_hermitian(operator, tolerances)
    matrix = op.matrix

    trace = float(np.trace(matrix).real)
    if abs(trace - 1.0) > tolerances.trace_tol:
        violation = abs(trace - 1.0)
        logger.error(f"State trace is {trace:.12g}, not 1.")
        raise NotUnitTrace(f"Trace is {trace:.12g}, expected 1.", violation=violation)

    values, vectors = np.linalg.eigh(matrix)
    smallest = float(values[0])
    if smallest < -tolerances.psd_tol:
        logger.error(f"State is not PSD: smallest eigenvalue {smallest:.12g}")
        raise NotPSD(
            f"Smallest eigenvalue {smallest:.12g} is negative.", violation=-smallest
        )

    if smallest < 0.0:
        clamped = np.clip(values, 0.0, None)
        clamped = clamped / clamped.sum()
        repaired = (vectors * clamped) @ vectors.conj().T
        logger.debug(f"Clamped eigenvalue {smallest:.3e} to zero and renormalised.")
        return DensityMatrix(HermitianOperator(frozen_array((repaired + repaired.conj().T) / 2)))

    return DensityMatrix(op)


def density_from_spectrum(
    values: Any,
    basis: Any | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> DensityMatrix:
    """Build V diag(values) V^dagger; computational basis when `basis` is None."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise DimMismatch("Spectrum must be a non-empty vector.")
    if basis is None:
        return validate_density(np.diag(values).astype(np.complex128), tolerances)
    vectors = np.asarray(basis, dtype=np.complex128)
    if vectors.shape != (values.size, values.size):
        raise DimMismatch(
            f"Basis shape {vectors.shape} does not match spectrum length {values.size}."
        )
    return validate_density((vectors * values) @ vectors.conj().T, tolerances)


#####################################
# Spectral Decomposition
#####################################


def eigh(
    operator: HermitianOperator | DensityMatrix | np.ndarray,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Spectrum:
    """
    Eigendecomposition with eigenvalues in non-increasing order.

    Raises:
        NoConvergence: the LAPACK solver failed, or its output misses the
            orthonormality or reconstruction tolerance.
    """
    matrix = as_hermitian(_matrix_of(operator), tolerances).matrix
    try:
        values, vectors = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as e:
        logger.error(f"Eigensolver failed: {e}")
        raise NoConvergence(f"Eigensolver did not converge: {e}") from e

    # Stable sort keeps the solver order among exactly equal eigenvalues.
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]

    ortho_error = float(np.max(np.abs(vectors.conj().T @ vectors - np.eye(len(values)))))
    if ortho_error > tolerances.ortho_tol:
        raise NoConvergence(f"Eigenvectors not orthonormal (error {ortho_error:.3e}).")

    scale = max(1.0, float(np.max(np.abs(matrix))))
    recon_error = float(np.max(np.abs(matrix - (vectors * values) @ vectors.conj().T)))
    if recon_error > tolerances.recon_tol * scale:
        raise NoConvergence(f"Reconstruction error {recon_error:.3e} above tolerance.")

    return Spectrum(values=frozen_array(values, float), vectors=frozen_array(vectors))


def top_projector(spectrum: Spectrum, rank_bound: int) -> Projector:
    """Projector onto the eigenvectors with the `rank_bound` largest eigenvalues."""
    check_rank_bound(rank_bound, spectrum.dim)
    return Projector(
        indices=tuple(range(rank_bound)),
        basis=frozen_array(spectrum.vectors[:, :rank_bound]),
    )


def check_rank_bound(rank_bound: int, dim: int) -> None:
    if not 1 <= int(rank_bound) <= dim:
        raise RankOutOfRange(f"Rank bound {rank_bound} outside [1, {dim}].")


def diagonal_in_basis(sigma: DensityMatrix | np.ndarray, basis: Any) -> np.ndarray:
    """Real diagonal entries <b_i|sigma|b_i> for the columns b_i of `basis`."""
    matrix = _matrix_of(sigma)
    vectors = np.asarray(basis, dtype=np.complex128)
    if vectors.shape[0] != matrix.shape[0]:
        raise DimMismatch("Basis and state dimensions differ.")
    return np.einsum("ji,jk,ki->i", vectors.conj(), matrix, vectors).real


#####################################
# Distances
#####################################


def _pair(rho: Any, sigma: Any) -> tuple[np.ndarray, np.ndarray]:
    a, b = _matrix_of(rho), _matrix_of(sigma)
    if a.shape != b.shape:
        raise DimMismatch(f"Dimension mismatch: {a.shape} vs {b.shape}.")
    return a, b


def hs_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Tr[(rho - sigma)^2]."""
    a, b = _pair(rho, sigma)
    delta = a - b
    return float(np.vdot(delta, delta).real)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Half the sum of absolute eigenvalues of rho - sigma."""
    a, b = _pair(rho, sigma)
    return float(0.5 * np.abs(np.linalg.eigvalsh(a - b)).sum())


def overlap(rho: DensityMatrix, sigma: DensityMatrix, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """
    Tr(rho sigma), real for Hermitian arguments.

    Raises:
        NotHermitian: the imaginary part exceeds imag_tol.
    """
    a, b = _pair(rho, sigma)
    value = complex(np.einsum("ij,ji->", a, b))
    if abs(value.imag) > tolerances.imag_tol:
        raise NotHermitian(f"Tr(rho sigma) has imaginary part {value.imag:.3e}.", violation=abs(value.imag))
    return float(value.real)


def purity(rho: DensityMatrix, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    return overlap(rho, rho, tolerances)


def helstrom_projector(rho: DensityMatrix, sigma: DensityMatrix, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Projector:
    """
    Projector onto the positive eigenspace of rho - sigma.

    It attains the trace distance: D_T(rho, sigma) = Tr[P (rho - sigma)],
    the maximum of Tr[P (rho - sigma)] over all projectors P.

    Raises:
        NoConvergence: the eigenvectors are not orthonormal to proj_tol.
    """
    a, b = _pair(rho, sigma)
    values, vectors = np.linalg.eigh(a - b)
    keep = np.flatnonzero(values > 0.0)
    projector = Projector(indices=tuple(int(i) for i in keep), basis=frozen_array(vectors[:, keep]))
    error = projector.idempotence_error()
    if error > tolerances.proj_tol:
        raise NoConvergence(f"Positive-part projector has |P^2 - P| = {error:.3e}.")
    return projector


#####################################
# Partial Trace
#####################################


def partial_trace(
    psi: Any,
    d_sys: int,
    d_anc: int,
    trace_out: Subsystem = Subsystem.ANCILLA,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> DensityMatrix:
    """
    Reduced state of a pure vector on system (x) ancilla.

    The amplitude vector is read in system-major order, so it reshapes to a
    d_sys x d_anc matrix M. Tracing out the ancilla gives M M^dagger.

    Raises:
        DimMismatch: psi does not have d_sys * d_anc entries.
        NotNormalized: |<psi|psi> - 1| > trace_tol.
    """
    vector = np.asarray(psi, dtype=np.complex128).ravel()
    if d_sys < 1 or d_anc < 1 or vector.size != d_sys * d_anc:
        raise DimMismatch(
            f"State of length {vector.size} does not factor as {d_sys} x {d_anc}."
        )
    norm = float(np.vdot(vector, vector).real)
    if abs(norm - 1.0) > tolerances.trace_tol:
        raise NotNormalized(f"State norm^2 is {norm:.12g}.", violation=abs(norm - 1.0))

    amplitudes = vector.reshape(d_sys, d_anc)
    if trace_out is Subsystem.ANCILLA:
        reduced = amplitudes @ amplitudes.conj().T
    else:
        reduced = amplitudes.T @ amplitudes.conj()
    return validate_density(reduced, tolerances)


#####################################
# Majorization
#####################################


def majorization_margin(a: Any, b: Any) -> float:
    """
    Smallest prefix-sum difference between sorted-descending a and b.

    Raises:
        LengthMismatch: vectors differ in length or are empty.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size == 0:
        raise LengthMismatch(f"Vectors have lengths {a.size} and {b.size}; need equal and nonzero.")
    prefix_a = np.cumsum(np.sort(a)[::-1])
    prefix_b = np.cumsum(np.sort(b)[::-1])
    return float(np.min(prefix_a - prefix_b))


def majorizes(a: Any, b: Any, tolerances: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """
    True iff a majorizes b: every prefix sum of sorted-descending a is at
    least the matching prefix sum of b, and the totals agree.

    Raises:
        LengthMismatch: vectors differ in length or are empty.
        SumMismatch: totals differ by more than sum_tol.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size == 0:
        raise LengthMismatch(f"Vectors have lengths {a.size} and {b.size}; need equal and nonzero.")
    if abs(a.sum() - b.sum()) > tolerances.sum_tol:
        raise SumMismatch(f"Totals differ: {a.sum():.12g} vs {b.sum():.12g}.")
    return majorization_margin(a, b) >= -tolerances.sum_tol
