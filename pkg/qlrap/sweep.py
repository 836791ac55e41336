"""
qlrap/sweep.py

Distance landscape over rank-2 candidates diag(x1, x2, 0, ..., 0) in
rho's eigenbasis, for contour plots of the optimal set.

Columns, in this order:
    lambda_sigma1, lambda_sigma2, distance, on_trace_constraint, in_optimal_set

Rows run over x1 (outer) then x2 (inner), each axis being
lo + (hi - lo) * i / (resolution - 1). Candidates need not have unit
trace; `on_trace_constraint` marks the cells within half a grid spacing
of x1 + x2 = 1, and `in_optimal_set` marks the cells on that line that
attain the rank-2 optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from qlrap.core_linalg import DEFAULT_TOLERANCES, DensityMatrix, Tolerances, eigh, validate_density
from qlrap.errors import DimMismatch, ParseError
from qlrap.solver import MetricTag, solve_hs_distance, solve_trace_distance

SWEEP_COLUMNS = ("lambda_sigma1", "lambda_sigma2", "distance", "on_trace_constraint", "in_optimal_set")
TRACE_OPTIMAL_TOL = 1e-9


@dataclass(frozen=True)
class SweepGrid:
    range1: tuple[float, float] = (0.0, 1.0)
    range2: tuple[float, float] = (0.0, 1.0)
    resolution: int = 201
    metric: MetricTag = MetricTag.HILBERT_SCHMIDT

    def __post_init__(self) -> None:
        for lo, hi in (self.range1, self.range2):
            if not 0.0 <= lo < hi <= 1.0:
                raise ParseError(f"Sweep range ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1.")
        if self.resolution < 2:
            raise ParseError(f"Sweep resolution must be at least 2, got {self.resolution}.")
        object.__setattr__(self, "metric", MetricTag.parse(self.metric))

    def axis(self, which: int) -> np.ndarray:
        lo, hi = self.range1 if which == 1 else self.range2
        return lo + (hi - lo) * np.arange(self.resolution) / (self.resolution - 1)

    @property
    def spacing(self) -> float:
        width = max(self.range1[1] - self.range1[0], self.range2[1] - self.range2[0])
        return width / (self.resolution - 1)

    def preamble(self) -> dict[str, Any]:
        return {
            "metric": self.metric.value,
            "rank_bound": 2,
            "resolution": self.resolution,
            "range1": f"{self.range1[0]:.12g}:{self.range1[1]:.12g}",
            "range2": f"{self.range2[0]:.12g}:{self.range2[1]:.12g}",
        }


def sweep_frame(rho: DensityMatrix, grid: SweepGrid = SweepGrid(), tolerances: Tolerances = DEFAULT_TOLERANCES) -> pd.DataFrame:
    """Distance of every grid candidate to rho, with constraint and optimality flags."""
    rho = validate_density(rho, tolerances)
    if rho.dim < 2:
        raise DimMismatch("A rank-2 sweep needs a state of dimension at least 2.")
    spectrum = eigh(rho, tolerances)
    values = np.where(spectrum.values < tolerances.rank_tol, 0.0, spectrum.values)
    tail = values[2:]

    x1, x2 = np.meshgrid(grid.axis(1), grid.axis(2), indexing="ij")
    x1, x2 = x1.ravel(), x2.ravel()
    h = grid.spacing
    on_line = np.abs(x1 + x2 - 1.0) <= h / 2

    if grid.metric is MetricTag.HILBERT_SCHMIDT:
        distance = (x1 - values[0]) ** 2 + (x2 - values[1]) ** 2 + float((tail**2).sum())
        optimum = solve_hs_distance(rho, 2, tolerances)
        optimal = on_line & (distance <= optimum + h**2 / 2)
    else:
        distance = 0.5 * (np.abs(x1 - values[0]) + np.abs(x2 - values[1]) + float(tail.sum()))
        optimum = solve_trace_distance(rho, 2, tolerances)
        optimal = on_line & (distance <= optimum + TRACE_OPTIMAL_TOL)

    return pd.DataFrame(
        {
            "lambda_sigma1": x1,
            "lambda_sigma2": x2,
            "distance": distance,
            "on_trace_constraint": on_line.astype(int),
            "in_optimal_set": optimal.astype(int),
        },
        columns=list(SWEEP_COLUMNS),
    )
