"""
qlrap/__init__.py

Optimal rank-constrained approximation of density matrices under the
Hilbert-Schmidt and trace distances, with oracles that check the closed
forms and a variational purification model for quantum PCA.
"""

from qlrap.core_linalg import DEFAULT_TOLERANCES, DensityMatrix, Tolerances, validate_density
from qlrap.errors import QlrapError
from qlrap.solver import MetricTag, QlrapSolution, solve, trace_family

__all__ = [
    "DEFAULT_TOLERANCES",
    "DensityMatrix",
    "MetricTag",
    "QlrapError",
    "QlrapSolution",
    "Tolerances",
    "solve",
    "trace_family",
    "validate_density",
]
