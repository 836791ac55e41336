"""
qlrap/state_files.py

Read and write state files.

Two JSON layouts are accepted:

    {"dim": 2, "entries": [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]}

    {"spectrum": [0.41, 0.39, 0.2, 0.0], "basis": "computational"}

In the shorthand layout, "basis" may also be a unitary in the same
[re, im] entry layout; its columns are the eigenvectors. Both layouts
accept optional "label" and "seed" keys. A file is written back in the
layout it was read in, so fixtures round-trip unchanged.
"""

from __future__ import annotations

import json
import pathlib
from dataclasses import dataclass
from typing import Any

import numpy as np

from qlrap.core_linalg import DEFAULT_TOLERANCES, DensityMatrix, Tolerances, validate_density
from qlrap.errors import ParseError
from utils.utils_logger import logger


@dataclass(frozen=True)
class MatrixFile:
    matrix: np.ndarray
    label: str | None = None
    seed: int | None = None
    # set when the file uses the spectrum shorthand
    spectrum: tuple[float, ...] | None = None
    basis: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def density(self, tolerances: Tolerances = DEFAULT_TOLERANCES) -> DensityMatrix:
        return validate_density(self.matrix, tolerances)

    def to_json_obj(self) -> dict[str, Any]:
        if self.spectrum is not None:
            obj: dict[str, Any] = {
                "spectrum": list(self.spectrum),
                "basis": "computational" if self.basis is None else _encode_entries(self.basis),
            }
        else:
            obj = {"dim": self.dim, "entries": _encode_entries(self.matrix)}
        if self.label is not None:
            obj["label"] = self.label
        if self.seed is not None:
            obj["seed"] = self.seed
        return obj

    @classmethod
    def from_state(cls, state: DensityMatrix | np.ndarray, label: str | None = None, seed: int | None = None) -> MatrixFile:
        matrix = state.matrix if isinstance(state, DensityMatrix) else np.asarray(state, dtype=np.complex128)
        return cls(matrix=np.array(matrix, dtype=np.complex128), label=label, seed=seed)

    @classmethod
    def from_spectrum(cls, values: Any, basis: Any | None = None, label: str | None = None, seed: int | None = None) -> MatrixFile:
        values = tuple(float(v) for v in values)
        if not values:
            raise ParseError("Spectrum must not be empty.")
        vectors = None if basis is None else np.asarray(basis, dtype=np.complex128)
        if vectors is not None and vectors.shape != (len(values), len(values)):
            raise ParseError(f"Basis shape {vectors.shape} does not match spectrum length {len(values)}.")
        diag = np.diag(np.asarray(values, dtype=np.complex128))
        matrix = diag if vectors is None else vectors @ diag @ vectors.conj().T
        return cls(matrix=matrix, label=label, seed=seed, spectrum=values, basis=vectors)


#####################################
# Helper Functions
#####################################


def _encode_entries(matrix: np.ndarray) -> list[list[list[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(matrix)]


def _decode_entries(entries: Any, dim: int | None = None) -> np.ndarray:
    try:
        array = np.asarray(entries, dtype=float)
    except (TypeError, ValueError) as e:
        raise ParseError(f"Entries are not numeric [re, im] pairs: {e}") from e
    if array.ndim != 3 or array.shape[2] != 2 or array.shape[0] != array.shape[1]:
        raise ParseError(f"Entries must be a d x d array of [re, im] pairs, got shape {array.shape}.")
    if dim is not None and array.shape[0] != dim:
        raise ParseError(f"Declared dim {dim} does not match entries of size {array.shape[0]}.")
    return array[..., 0] + 1j * array[..., 1]


def parse_spectrum_shorthand(text: str) -> np.ndarray:
    """Parse '0.41,0.39,0.2,0' into a float vector."""
    try:
        values = np.array([float(part) for part in text.split(",") if part.strip()], dtype=float)
    except ValueError as e:
        raise ParseError(f"Cannot parse spectrum {text!r}: {e}") from e
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise ParseError(f"Spectrum {text!r} must hold at least one finite number.")
    return values


def parse_matrix_obj(obj: Any) -> MatrixFile:
    if not isinstance(obj, dict):
        raise ParseError("State file must contain a JSON object.")
    label = obj.get("label")
    seed = obj.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ParseError("'seed' must be an integer.")

    if "spectrum" in obj:
        values = obj["spectrum"]
        if not isinstance(values, list) or not values:
            raise ParseError("'spectrum' must be a non-empty list of numbers.")
        try:
            values = [float(v) for v in values]
        except (TypeError, ValueError) as e:
            raise ParseError(f"'spectrum' must hold numbers: {e}") from e
        basis = obj.get("basis", "computational")
        vectors = None if basis == "computational" else _decode_entries(basis, len(values))
        return MatrixFile.from_spectrum(values, vectors, label=label, seed=seed)

    if "entries" in obj:
        dim = obj.get("dim")
        if dim is not None and not isinstance(dim, int):
            raise ParseError("'dim' must be an integer.")
        return MatrixFile(matrix=_decode_entries(obj["entries"], dim), label=label, seed=seed)

    raise ParseError("State file needs either 'entries' or 'spectrum'.")


#####################################
# File Functions
#####################################


def read_matrix_file(path: pathlib.Path | str) -> MatrixFile:
    path = pathlib.Path(path)
    logger.debug(f"Reading state file {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path} is not valid JSON: {e}") from e
    return parse_matrix_obj(obj)


def write_matrix_file(path: pathlib.Path | str, matrix_file: MatrixFile) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(matrix_file.to_json_obj(), indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote state file {path}")
    return path
