"""
qlrap/random_states.py

Seeded generators for test instances: Haar unitaries, Hermitian
matrices, density matrices of exact rank, pure states and spectra.

Every function accepts an int seed or a numpy Generator.
"""

from __future__ import annotations

from typing import Union

import numpy as np
import scipy.linalg

from qlrap.core_linalg import (
    DEFAULT_TOLERANCES,
    DensityMatrix,
    HermitianOperator,
    Tolerances,
    as_hermitian,
    density_from_spectrum,
)
from qlrap.errors import RankOutOfRange

SeedLike = Union[int, np.random.Generator, None]


def as_rng(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(seed)


def _complex_gaussian(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def haar_unitary(dim: int, seed: SeedLike = None) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Gaussian matrix."""
    rng = as_rng(seed)
    q, r = scipy.linalg.qr(_complex_gaussian(rng, (dim, dim)))
    diag = np.diag(r)
    magnitude = np.abs(diag)
    phases = np.where(magnitude > 0.0, diag / np.where(magnitude > 0.0, magnitude, 1.0), 1.0)
    return q * phases


def random_hermitian(dim: int, seed: SeedLike = None) -> HermitianOperator:
    rng = as_rng(seed)
    a = _complex_gaussian(rng, (dim, dim))
    return as_hermitian((a + a.conj().T) / 2)


def random_pure_state(dim: int, seed: SeedLike = None) -> np.ndarray:
    rng = as_rng(seed)
    vector = _complex_gaussian(rng, (dim,))
    return vector / np.linalg.norm(vector)


def random_spectrum(dim: int, seed: SeedLike = None, rank: int | None = None) -> np.ndarray:
    """Non-increasing Dirichlet(1, ..., 1) weights on `rank` entries, zeros after."""
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise RankOutOfRange(f"Rank {rank} outside [1, {dim}].")
    rng = as_rng(seed)
    values = np.zeros(dim)
    values[:rank] = np.sort(rng.dirichlet(np.ones(rank)))[::-1]
    return values


def random_density(
    dim: int,
    rank: int | None = None,
    seed: SeedLike = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> DensityMatrix:
    """Density matrix of exact rank: Haar basis with a Dirichlet spectrum on `rank` entries."""
    rng = as_rng(seed)
    values = random_spectrum(dim, rng, rank)
    basis = haar_unitary(dim, rng)
    return density_from_spectrum(values, basis, tolerances)
