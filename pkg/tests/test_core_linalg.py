"""
tests/test_core_linalg.py

Validation, spectral decomposition, distances, partial trace and
majorization.

Usage:
  pytest -q tests/test_core_linalg.py
"""

#####################################
# Imports
#####################################

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlrap.core_linalg import (
    DEFAULT_TOLERANCES,
    DensityMatrix,
    Subsystem,
    Tolerances,
    as_hermitian,
    density_from_spectrum,
    diagonal_in_basis,
    eigh,
    helstrom_projector,
    hs_distance,
    majorization_margin,
    majorizes,
    overlap,
    partial_trace,
    purity,
    top_projector,
    trace_distance,
    validate_density,
)
from qlrap.errors import (
    DimMismatch,
    LengthMismatch,
    NotHermitian,
    NotNormalized,
    NotPSD,
    NotUnitTrace,
    RankOutOfRange,
    SumMismatch,
    ValidationError,
)
from qlrap.random_states import haar_unitary, random_density, random_hermitian, random_pure_state

#####################################
# Helper Functions
#####################################


def _jacobi_eigenvalues(matrix: np.ndarray, sweeps: int = 60) -> np.ndarray:
    """Cyclic Jacobi rotations on a real symmetric matrix; eigenvalues descending."""
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(max(np.sum(a**2) - np.sum(np.diag(a) ** 2), 0.0))
        if off < 1e-15:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                sign = 1.0 if theta >= 0 else -1.0
                t = sign / (abs(theta) + np.sqrt(theta**2 + 1.0))
                c = 1.0 / np.sqrt(t**2 + 1.0)
                s = t * c
                rotation = np.eye(n)
                rotation[p, p] = rotation[q, q] = c
                rotation[p, q] = s
                rotation[q, p] = -s
                a = rotation.T @ a @ rotation
    return np.sort(np.diag(a))[::-1]


def _hermitian_eigenvalues_by_jacobi(h: np.ndarray) -> np.ndarray:
    # [[A, -B], [B, A]] carries every eigenvalue of A + iB twice
    a, b = h.real, h.imag
    doubled = _jacobi_eigenvalues(np.block([[a, -b], [b, a]]))
    return doubled[::2]


#####################################
# Validation
#####################################


def test_as_hermitian_symmetrises_within_tolerance():
    m = np.array([[1.0, 0.5 + 1e-12j], [0.5, 0.0]])
    op = as_hermitian(m)
    assert np.array_equal(op.matrix, op.matrix.conj().T)


def test_as_hermitian_rejects_non_square():
    with pytest.raises(DimMismatch):
        as_hermitian(np.zeros((2, 3)))


def test_as_hermitian_rejects_nan():
    with pytest.raises(ValidationError):
        as_hermitian(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_not_hermitian_reports_violation():
    with pytest.raises(NotHermitian) as info:
        as_hermitian(np.array([[0.5, 0.2], [0.0, 0.5]]))
    assert info.value.violation == pytest.approx(0.2)


def test_validate_density_checks_trace_before_psd():
    # both trace 2 and negative eigenvalue; trace is reported
    with pytest.raises(NotUnitTrace) as info:
        validate_density(np.diag([3.0, -1.0]))
    assert info.value.violation == pytest.approx(1.0)


def test_validate_density_rejects_negative_eigenvalue():
    with pytest.raises(NotPSD) as info:
        validate_density(np.diag([1.1, -0.1]))
    assert info.value.violation == pytest.approx(0.1)


def test_validate_density_clamps_tiny_negative_eigenvalue():
    rho = validate_density(np.diag([0.5 + 5e-10, 0.5, -5e-10]))
    values = np.linalg.eigvalsh(rho.matrix)
    assert values.min() >= -1e-15
    assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-15)


def test_validate_density_accepts_pure_state():
    psi = random_pure_state(3, seed=1)
    rho = validate_density(np.outer(psi, psi.conj()))
    assert isinstance(rho, DensityMatrix)
    assert rho.rank() == 1


def test_tolerance_overrides_reject_unknown_keys():
    assert Tolerances().with_overrides({"herm_tol": "1e-6"}).herm_tol == 1e-6
    with pytest.raises(ValueError):
        Tolerances().with_overrides({"not_a_tol": 1.0})


#####################################
# Spectral Decomposition
#####################################


def test_eigh_orders_values_descending(rho_tilde):
    spectrum = eigh(rho_tilde)
    assert np.allclose(spectrum.values, [0.41, 0.39, 0.2, 0.0], atol=1e-12)
    assert np.allclose(spectrum.reconstruct(), rho_tilde.matrix, atol=1e-12)


def test_eigh_matches_jacobi_on_random_hermitian():
    h = random_hermitian(5, seed=2024).matrix
    values = eigh(h).values
    assert np.allclose(values, _hermitian_eigenvalues_by_jacobi(h), atol=1e-10)


def test_eigh_vectors_are_orthonormal():
    spectrum = eigh(random_density(6, seed=3))
    v = spectrum.vectors
    assert np.allclose(v.conj().T @ v, np.eye(6), atol=1e-12)


def test_degenerate_eigenvalues_keep_a_valid_basis():
    spectrum = eigh(np.diag([0.25, 0.25, 0.25, 0.25]).astype(complex))
    assert np.allclose(spectrum.values, 0.25)
    assert np.allclose(spectrum.reconstruct(), np.eye(4) / 4, atol=1e-14)


def test_top_projector_is_idempotent(rho_tilde_rotated):
    projector = top_projector(eigh(rho_tilde_rotated), 2)
    assert projector.idempotence_error() < 1e-12
    assert np.trace(projector.matrix).real == pytest.approx(2.0)
    with pytest.raises(RankOutOfRange):
        top_projector(eigh(rho_tilde_rotated), 0)


def test_diagonal_in_basis_recovers_spectrum(rho_tilde_rotated):
    basis = eigh(rho_tilde_rotated).vectors
    assert np.allclose(diagonal_in_basis(rho_tilde_rotated, basis), [0.41, 0.39, 0.2, 0.0], atol=1e-12)


#####################################
# Distances
#####################################


def test_distances_between_orthogonal_pure_states():
    rho = density_from_spectrum([1.0, 0.0])
    sigma = density_from_spectrum([0.0, 1.0])
    assert hs_distance(rho, sigma) == pytest.approx(2.0)
    assert trace_distance(rho, sigma) == pytest.approx(1.0)
    assert overlap(rho, sigma) == pytest.approx(0.0)


def test_distances_of_a_state_to_itself_vanish():
    rho = random_density(4, seed=5)
    assert hs_distance(rho, rho) == pytest.approx(0.0, abs=1e-15)
    assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)


def test_distance_rejects_mismatched_dimensions():
    with pytest.raises(DimMismatch):
        hs_distance(random_density(2, seed=1), random_density(3, seed=1))


def test_purity_of_maximally_mixed_state():
    assert purity(density_from_spectrum([0.25] * 4)) == pytest.approx(0.25)



def test_overlap_rejects_complex_value():
    # Tr(I @ iI) = 2i
    with pytest.raises(NotHermitian):
        overlap(np.eye(2), 1j * np.eye(2))
    assert overlap(np.eye(2), 1j * np.eye(2), Tolerances(imag_tol=3.0)) == 0.0


def test_helstrom_projector_is_idempotent():
    rho, sigma = random_density(4, seed=14), random_density(4, rank=1, seed=15)
    projector = helstrom_projector(rho, sigma, Tolerances(proj_tol=1e-12))
    assert projector.idempotence_error() <= 1e-12


def test_distances_are_unitarily_invariant():
    rho, sigma = random_density(4, seed=8), random_density(4, rank=2, seed=9)
    u = haar_unitary(4, seed=10)
    rot = lambda s: DensityMatrix(as_hermitian(u @ s.matrix @ u.conj().T))  # noqa: E731
    assert hs_distance(rot(rho), rot(sigma)) == pytest.approx(hs_distance(rho, sigma), abs=1e-12)
    assert trace_distance(rot(rho), rot(sigma)) == pytest.approx(trace_distance(rho, sigma), abs=1e-12)


def test_helstrom_projector_attains_trace_distance():
    rho, sigma = random_density(5, seed=12), random_density(5, rank=2, seed=13)
    projector = helstrom_projector(rho, sigma)
    value = np.trace(projector.matrix @ (rho.matrix - sigma.matrix)).real
    assert value == pytest.approx(trace_distance(rho, sigma), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1), dim=st.integers(min_value=2, max_value=6))
def test_trace_distance_bounds_hs(seed, dim):
    rho, sigma = random_density(dim, seed=seed), random_density(dim, seed=seed + 1)
    d_t = trace_distance(rho, sigma)
    assert 0.0 <= d_t <= 1.0 + 1e-12
    # ||X||_2^2 <= ||X||_1^2 = 4 D_T^2
    assert hs_distance(rho, sigma) <= 4.0 * d_t**2 + 1e-12


#####################################
# Partial Trace
#####################################


def test_partial_trace_matches_schmidt_coefficients():
    psi = random_pure_state(8, seed=21)
    reduced = partial_trace(psi, 4, 2)
    schmidt = np.linalg.svd(psi.reshape(4, 2), compute_uv=False)
    expected = np.concatenate([np.sort(schmidt**2)[::-1], np.zeros(2)])
    values = np.sort(np.linalg.eigvalsh(reduced.matrix))[::-1]
    assert reduced.rank() <= 2
    assert np.allclose(values, expected, atol=1e-10)


def test_partial_trace_over_system_has_same_nonzero_spectrum():
    psi = random_pure_state(6, seed=22)
    on_system = np.sort(np.linalg.eigvalsh(partial_trace(psi, 3, 2).matrix))[::-1][:2]
    on_ancilla = np.sort(np.linalg.eigvalsh(partial_trace(psi, 3, 2, Subsystem.SYSTEM).matrix))[::-1]
    assert np.allclose(on_system, on_ancilla, atol=1e-12)


def test_partial_trace_of_balanced_entangled_state():
    psi = np.zeros(8, dtype=complex)
    psi[0] = psi[3] = np.sqrt(0.5)  # |0>|0> + |1>|1>
    reduced = partial_trace(psi, 4, 2)
    assert np.allclose(reduced.matrix, np.diag([0.5, 0.5, 0.0, 0.0]), atol=1e-15)


def test_partial_trace_rejects_bad_inputs():
    with pytest.raises(DimMismatch):
        partial_trace(np.ones(7) / np.sqrt(7), 4, 2)
    with pytest.raises(NotNormalized):
        partial_trace(np.ones(8), 4, 2)


#####################################
# Majorization
#####################################


def test_majorization_basic_cases():
    assert majorizes([1.0, 0.0, 0.0], [0.5, 0.3, 0.2])
    assert not majorizes([0.5, 0.3, 0.2], [1.0, 0.0, 0.0])
    assert majorizes([0.2, 0.5, 0.3], [0.3, 0.2, 0.5])
    assert majorization_margin([0.5, 0.5], [1.0, 0.0]) == pytest.approx(-0.5)


def test_majorization_argument_errors():
    with pytest.raises(LengthMismatch):
        majorizes([1.0], [0.5, 0.5])
    with pytest.raises(SumMismatch):
        majorizes([1.0, 0.0], [0.5, 0.6])
    with pytest.raises(LengthMismatch):
        majorizes([], [])
    with pytest.raises(LengthMismatch):
        majorization_margin([], [])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_diagonal_is_majorized_by_spectrum(seed):
    # Schur-Horn: the diagonal of a Hermitian matrix is majorized by its eigenvalues
    rho = random_density(5, seed=seed)
    diagonal = np.diag(rho.matrix).real
    spectrum = np.linalg.eigvalsh(rho.matrix)
    assert majorizes(spectrum, diagonal, DEFAULT_TOLERANCES)
