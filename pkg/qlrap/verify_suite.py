"""
qlrap/verify_suite.py

The seeded verification battery behind `qlrap verify`.

For each dimension d in 2..max_dim and each of `instances` seeded random
states, every rank bound R in 1..d is checked:

- grid_oracle (where the grid budget allows) and descent_oracle, both
  metrics: the oracle never beats the closed form and gets within its gap
  bound of it
- HS uniqueness: the descent optimum equals sigma* entrywise
- trace family: every descent terminal point is a family member
- monotonicity: both optimal distances are non-increasing in R and reach
  zero exactly when R covers the rank

The four-level worked example (0.41, 0.39, 0.2, 0) goes through the same
per-instance checks with seed base_seed. Rotation tests (the worked
example plus one instance per d) and a majorization audit run once each.

Instance (d, i) uses seed base_seed + 1000 * d + i; rank cycles through
1..d so rank-deficient states are covered.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from qlrap.core_linalg import (
    DEFAULT_TOLERANCES,
    DensityMatrix,
    Tolerances,
    density_from_spectrum,
)
from qlrap.errors import QlrapError
from qlrap.oracle import (
    GRID_MAX_DIM,
    GRID_MAX_RANK,
    OracleReport,
    descent_oracle,
    grid_oracle,
    majorization_audit,
    rotation_test,
)
from qlrap.random_states import random_density
from qlrap.solver import (
    MetricTag,
    QlrapSolution,
    SolveFn,
    eckart_young_error,
    naive_rescale,
    solve,
    trace_family,
    trace_family_contains,
)
from utils.utils_logger import logger

Record = dict[str, Any]
Sink = Callable[[Record], bool]

# oracle may undercut the closed form by at most this much
NOISE_TOL = 1e-9
UNIQUENESS_TOL = 1e-5
FAMILY_TOL = 1e-5
MONOTONE_TOL = 1e-12

WORKED_EXAMPLE_SPECTRUM = (0.41, 0.39, 0.2, 0.0)

#####################################
# Settings and Report
#####################################


@dataclass(frozen=True)
class VerifySettings:
    instances: int = 50
    max_dim: int = 8
    resolution: int = 100
    restarts: int = 5
    trials: int = 1000
    majorization_trials: int = 1000
    majorization_dim: int = 6
    seed: int = 0
    tolerances: Tolerances = DEFAULT_TOLERANCES
    solver: SolveFn = solve


@dataclass
class SuiteReport:
    records: list[Record] = field(default_factory=list)

    @property
    def failures(self) -> list[Record]:
        return [r for r in self.records if not r["passed"]]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> Record:
        by_check: dict[str, dict[str, int]] = {}
        for record in self.records:
            counts = by_check.setdefault(record["check_name"], {"passed": 0, "failed": 0})
            counts["passed" if record["passed"] else "failed"] += 1
        return {
            "passed": self.passed,
            "checks": len(self.records),
            "failed": len(self.failures),
            "by_check": by_check,
            "first_failure": self.failures[0] if self.failures else None,
        }


#####################################
# Mutation Fixture
#####################################


def tampered_solve(
    rho: DensityMatrix,
    rank_bound: int,
    metric: MetricTag | str = MetricTag.HILBERT_SCHMIDT,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> QlrapSolution:
    """A deliberately wrong solver that drops the N_R term.

    The reported distance is that of the bare truncation tau_R, and the
    state is tau_R rescaled to unit trace. The verify battery must reject it.
    """
    honest = solve(rho, rank_bound, metric, tolerances)
    tail = np.asarray(honest.eigenbasis.values[rank_bound:]).clip(0.0)
    if honest.metric is MetricTag.HILBERT_SCHMIDT:
        distance = eckart_young_error(rho, rank_bound, tolerances)
    else:
        distance = 0.5 * float(tail.sum())
    return dataclasses.replace(
        honest,
        sigma_star=naive_rescale(rho, rank_bound, tolerances),
        distance_star=distance,
        truncated_weight=0.0,
    )


#####################################
# Helper Functions
#####################################


def _oracle_record(report: OracleReport) -> Record:
    record = report.to_record()
    lower_ok = report.gap >= -NOISE_TOL
    upper_ok = report.gap <= report.gap_bound + NOISE_TOL
    record["passed"] = bool(lower_ok and upper_ok)
    record["worst_margin"] = float(min(report.gap + NOISE_TOL, report.gap_bound + NOISE_TOL - report.gap))
    return record


def _record(check_name: str, passed: bool, worst_margin: float, **details: Any) -> Record:
    return {"check_name": check_name, "passed": bool(passed), "worst_margin": float(worst_margin), **details}


def _emit(report: SuiteReport, record: Record, sink: Sink | None) -> None:
    report.records.append(record)
    if not record["passed"]:
        logger.error(f"Verification failed: {record}")
    if sink is not None:
        sink(record)


def _instance(dim: int, index: int, settings: VerifySettings) -> tuple[DensityMatrix, int]:
    seed = settings.seed + 1000 * dim + index
    rank = 1 + index % dim
    return random_density(dim, rank, seed, settings.tolerances), seed


def _check_instance(rho: DensityMatrix, seed: int, settings: VerifySettings, report: SuiteReport, sink: Sink | None) -> None:
    dim = rho.dim
    rank = rho.rank(settings.tolerances.rank_tol)
    spectrum = [float(v) for v in np.sort(np.linalg.eigvalsh(rho.matrix))[::-1]]
    base = {"dim": dim, "seed": seed, "spectrum": spectrum}
    optimal: dict[MetricTag, list[float]] = {metric: [] for metric in MetricTag}

    for rank_bound in range(1, dim + 1):
        for metric in MetricTag:
            solution = settings.solver(rho, rank_bound, metric, settings.tolerances)
            optimal[metric].append(solution.distance_star)

            if dim <= GRID_MAX_DIM and rank_bound <= GRID_MAX_RANK:
                grid = grid_oracle(
                    rho, rank_bound, settings.resolution, metric,
                    seed=seed, solver=settings.solver, tolerances=settings.tolerances,
                )
                _emit(report, _oracle_record(grid), sink)

            descent = descent_oracle(
                rho, rank_bound, metric, settings.restarts, seed,
                solver=settings.solver, tolerances=settings.tolerances,
            )
            _emit(report, _oracle_record(descent), sink)

            if metric is MetricTag.HILBERT_SCHMIDT:
                deviation = float(np.max(np.abs(descent.best_candidate.matrix - solution.sigma_star.matrix)))
                _emit(report, _record(
                    "hs_uniqueness", deviation <= UNIQUENESS_TOL, UNIQUENESS_TOL - deviation,
                    metric=metric.value, rank_bound=rank_bound, **base,
                ), sink)
            else:
                family = trace_family(rho, rank_bound, settings.tolerances)
                members = [
                    trace_family_contains(family, density_from_spectrum(point, family.spectrum.vectors), FAMILY_TOL)
                    for point in descent.terminal_candidates
                ]
                _emit(report, _record(
                    "trace_family", all(members), float(sum(members) - len(members)),
                    metric=metric.value, rank_bound=rank_bound, terminal_points=len(members), **base,
                ), sink)

    for metric, distances in optimal.items():
        steps = np.diff(distances)
        monotone = bool(np.all(steps <= MONOTONE_TOL))
        zero_pattern = all((d == 0.0) == (r + 1 >= rank) for r, d in enumerate(distances))
        worst = float(-steps.max()) if steps.size else 0.0
        _emit(report, _record(
            "monotonicity", monotone and zero_pattern, worst,
            metric=metric.value, rank=rank, distances=[float(d) for d in distances], **base,
        ), sink)


def _check_rotations(rho: DensityMatrix, label: str, settings: VerifySettings, report: SuiteReport, sink: Sink | None) -> None:
    for metric in MetricTag:
        rank_bound = max(1, rho.dim // 2)
        sigma = settings.solver(rho, rank_bound, metric, settings.tolerances).sigma_star
        result = rotation_test(rho, sigma, settings.trials, settings.seed, metric, settings.tolerances)
        _emit(report, _record(
            "rotation_test", result.passed, result.worst_margin,
            metric=metric.value, dim=rho.dim, rank_bound=rank_bound, instance=label, trials=result.trials,
        ), sink)


#####################################
# Suite Driver
#####################################


def run_verify_suite(settings: VerifySettings = VerifySettings(), sink: Sink | None = None) -> SuiteReport:
    """Run the whole battery; every record is also passed to `sink` if given."""
    report = SuiteReport()
    logger.info(
        f"Verify battery: d=2..{settings.max_dim}, {settings.instances} instances, "
        f"resolution {settings.resolution}, {settings.restarts} restarts, seed {settings.seed}"
    )

    try:
        worked = density_from_spectrum(WORKED_EXAMPLE_SPECTRUM, tolerances=settings.tolerances)
        _check_instance(worked, settings.seed, settings, report, sink)
        _check_rotations(worked, "worked_example", settings, report, sink)

        for dim in range(2, settings.max_dim + 1):
            for index in range(settings.instances):
                rho, seed = _instance(dim, index, settings)
                _check_instance(rho, seed, settings, report, sink)
                if index == 0:
                    _check_rotations(rho, f"d{dim}_seed{seed}", settings, report, sink)
            logger.info(f"Verified d={dim}: {len(report.records)} checks so far, {len(report.failures)} failed")

        audit = majorization_audit(
            settings.majorization_trials, settings.seed, settings.majorization_dim,
            tolerances=settings.tolerances,
        )
        _emit(report, _record(
            "majorization_audit", audit.passed, audit.worst_margin,
            dim=settings.majorization_dim, trials=audit.trials, failures=audit.failures,
        ), sink)
    except QlrapError as e:
        _emit(report, _record("suite_error", False, float("-inf"), error=f"{type(e).__name__}: {e}"), sink)

    logger.info(f"Verify battery finished: {report.summary()['checks']} checks, {len(report.failures)} failed")
    return report
