# tests/conftest.py
import sys
import pathlib

import numpy as np
import pytest

# Put the project root (the folder that contains `utils/` and `qlrap/`) on sys.path
ROOT = pathlib.Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from qlrap.core_linalg import DEFAULT_TOLERANCES, density_from_spectrum  # noqa: E402
from qlrap.random_states import haar_unitary  # noqa: E402

RHO_TILDE_SPECTRUM = (0.41, 0.39, 0.2, 0.0)


@pytest.fixture
def tolerances():
    return DEFAULT_TOLERANCES


@pytest.fixture
def rho_tilde():
    """Diagonal four-level state with spectrum (0.41, 0.39, 0.2, 0)."""
    return density_from_spectrum(RHO_TILDE_SPECTRUM)


@pytest.fixture
def rho_tilde_rotated():
    """Same spectrum as rho_tilde in a Haar-random basis."""
    return density_from_spectrum(RHO_TILDE_SPECTRUM, haar_unitary(4, seed=11))


@pytest.fixture
def data_dir():
    return ROOT / "data"
