"""
tests/test_oracle.py

Grid and descent oracles, rotation tests, the majorization audit and the
verify battery (a reduced battery by default; the full one is marked slow).

Usage:
  pytest -q tests/test_oracle.py
  pytest -q -m slow tests/test_oracle.py
"""

#####################################
# Imports
#####################################

import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlrap.core_linalg import density_from_spectrum, diagonal_in_basis, eigh, majorization_margin
from qlrap.errors import BudgetExceeded
from qlrap.oracle import (
    DESCENT_MAX_DIM,
    descent_oracle,
    grid_gap_bound,
    grid_oracle,
    majorization_audit,
    project_to_simplex,
    rotation_margin,
    rotation_test,
    simplex_compositions,
    support_count,
)
from qlrap.random_states import random_density
from qlrap.solver import MetricTag, solve, trace_family, trace_family_contains
from qlrap.verify_suite import VerifySettings, run_verify_suite, tampered_solve
from utils.emitters import file_emitter

SMALL_BATTERY = VerifySettings(
    instances=2,
    max_dim=4,
    resolution=20,
    restarts=2,
    trials=20,
    majorization_trials=20,
    majorization_dim=4,
    seed=3,
)

#####################################
# Simplex Helpers
#####################################


def test_simplex_compositions_enumerates_grid():
    rows = simplex_compositions(3, 2)
    assert sorted(map(tuple, rows)) == [(0, 3), (1, 2), (2, 1), (3, 0)]
    assert len(simplex_compositions(100, 3)) == 5151
    assert np.all(simplex_compositions(10, 4).sum(axis=1) == 10)


def test_project_to_simplex_examples():
    assert np.allclose(project_to_simplex([[0.2, 0.8]]), [[0.2, 0.8]])
    assert np.allclose(project_to_simplex([[2.0, 0.0]]), [[1.0, 0.0]])
    assert np.allclose(project_to_simplex([[0.5, 0.5, 0.5]]), [[1 / 3, 1 / 3, 1 / 3]])
    assert np.allclose(project_to_simplex([[-1.0, 0.4, 0.3]]), [[0.0, 0.55, 0.45]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=8))
def test_projection_lands_on_simplex_and_is_closest(row):
    point = project_to_simplex([row])[0]
    assert np.all(point >= 0.0)
    assert point.sum() == pytest.approx(1.0, abs=1e-9)
    # no vertex of the simplex is closer than the projection
    row = np.asarray(row)
    vertices = np.eye(row.size)
    assert np.linalg.norm(row - point) <= np.min(np.linalg.norm(vertices - row, axis=1)) + 1e-9


def test_support_count():
    assert support_count(8, 4) == 70
    assert support_count(4, 2) == 6


#####################################
# Grid Oracle
#####################################


def test_grid_oracle_hs_worked_example(rho_tilde):
    report = grid_oracle(rho_tilde, 2, resolution=100, metric="hs")
    spectrum = np.diag(report.best_candidate.matrix).real
    assert np.allclose(spectrum, [0.51, 0.49, 0.0, 0.0], atol=0.01)
    assert -1e-9 <= report.gap <= 1e-3
    assert report.candidates_evaluated == 6 * 101
    assert report.to_record()["check_name"] == "grid_oracle"


def test_grid_oracle_trace_exhibits_degeneracy(rho_tilde):
    report = grid_oracle(rho_tilde, 2, resolution=100, metric="trace")
    assert report.oracle_distance == pytest.approx(0.2, abs=1e-3)
    assert report.gap >= -1e-9
    # lambda_1 in {0.41, ..., 0.61} on the (0, 1) support
    assert report.optimal_count == 21


def test_grid_oracle_at_full_rank_recovers_input(rho_tilde):
    report = grid_oracle(rho_tilde, 3, resolution=100, metric="hs")
    assert report.oracle_distance <= grid_gap_bound(3, 100, "hs")
    assert report.closed_form_distance == 0.0


@pytest.mark.parametrize("metric", ["hs", "trace"])
def test_supports_missing_a_top_index_are_worse(rho_tilde, metric):
    best = grid_oracle(rho_tilde, 2, resolution=100, metric=metric)
    others = grid_oracle(rho_tilde, 2, resolution=100, metric=metric, supports=[(0, 2), (1, 2), (0, 3), (1, 3), (2, 3)])
    assert others.oracle_distance > best.oracle_distance + 0.01


def test_grid_oracle_budget_guard():
    with pytest.raises(BudgetExceeded):
        grid_oracle(random_density(9, seed=1), 2)
    with pytest.raises(BudgetExceeded):
        grid_oracle(random_density(8, seed=1), 5)
    with pytest.raises(BudgetExceeded):
        grid_oracle(random_density(4, seed=1), 2, resolution=201)


#####################################
# Descent Oracle
#####################################


def test_descent_oracle_hs_worked_example(rho_tilde):
    report = descent_oracle(rho_tilde, 2, "hs", restarts=3, seed=0)
    spectrum = np.diag(report.best_candidate.matrix).real
    assert np.allclose(spectrum, [0.51, 0.49, 0.0, 0.0], atol=1e-6)
    assert -1e-9 <= report.gap <= 1e-6
    grid = grid_oracle(rho_tilde, 2, resolution=100, metric="hs")
    assert report.oracle_distance <= grid.oracle_distance + 1e-12


def test_descent_oracle_rank_one_hand_value():
    report = descent_oracle(density_from_spectrum([0.5, 0.3, 0.2]), 1, "hs", restarts=2, seed=0)
    assert np.allclose(report.best_candidate.matrix, np.diag([1.0, 0.0, 0.0]), atol=1e-6)
    assert report.oracle_distance == pytest.approx(0.38, abs=1e-6)


def test_descent_oracle_at_full_rank(rho_tilde):
    report = descent_oracle(rho_tilde, 3, "hs", restarts=2, seed=0)
    assert report.oracle_distance <= 1e-10


def test_descent_trace_terminal_points_are_family_members(rho_tilde_rotated):
    report = descent_oracle(rho_tilde_rotated, 2, "trace", restarts=4, seed=5)
    assert report.gap >= -1e-9
    assert report.gap <= 1e-6
    family = trace_family(rho_tilde_rotated, 2)
    vectors = eigh(rho_tilde_rotated).vectors
    assert report.terminal_candidates
    for point in report.terminal_candidates:
        assert trace_family_contains(family, density_from_spectrum(point, vectors), tol=1e-5)


def test_descent_oracle_budget_guard(rho_tilde):
    with pytest.raises(BudgetExceeded):
        descent_oracle(random_density(DESCENT_MAX_DIM + 1, seed=2), 2)
    with pytest.raises(BudgetExceeded):
        descent_oracle(rho_tilde, 2, restarts=0)


#####################################
# Rotation Test and Majorization Audit
#####################################


@pytest.mark.parametrize("metric", list(MetricTag))
def test_rotation_test_passes_for_optimum(rho_tilde, metric):
    sigma = solve(rho_tilde, 2, metric).sigma_star
    result = rotation_test(rho_tilde, sigma, n_trials=200, seed=0, metric=metric)
    assert result.passed
    assert result.worst_margin >= -1e-9
    assert result.trials == 200


def test_rotation_margin_identity_is_zero(rho_tilde):
    sigma = solve(rho_tilde, 2).sigma_star
    assert rotation_margin(rho_tilde, sigma, np.eye(4)) == pytest.approx(0.0, abs=1e-12)


def test_rotation_margin_rewards_alignment(rho_tilde):
    misaligned = density_from_spectrum([0.2, 0.8, 0.0, 0.0])
    assert rotation_margin(rho_tilde, misaligned, np.eye(4), "hs") > 0.0
    assert rotation_margin(rho_tilde, misaligned, np.eye(4), "trace") > 0.0


def test_majorization_audit_passes():
    result = majorization_audit(n_trials=200, seed=0, dim=6)
    assert result.passed
    assert result.failures == 0
    assert result.worst_margin >= -1e-9


def test_majorization_audit_on_pure_state():
    pure = density_from_spectrum([1.0, 0.0, 0.0])
    assert majorization_audit(n_trials=20, seed=1, rho=pure).passed


def test_identity_basis_gives_equality(rho_tilde):
    diagonal = diagonal_in_basis(rho_tilde, np.eye(4))
    assert majorization_margin([0.41, 0.39, 0.2, 0.0], diagonal) == pytest.approx(0.0, abs=1e-12)


#####################################
# Verify Battery
#####################################


def test_small_battery_passes(tmp_path):
    sink_path = tmp_path / "verify.jsonl"
    report = run_verify_suite(SMALL_BATTERY, sink=lambda r: file_emitter.emit_record(r, path=sink_path))
    assert report.passed, report.failures[:3]

    checks = {r["check_name"] for r in report.records}
    assert {"grid_oracle", "descent_oracle", "hs_uniqueness", "trace_family", "monotonicity",
            "rotation_test", "majorization_audit"} <= checks
    lines = sink_path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == len(report.records)
    assert json.loads(lines[-1])["check_name"] == "majorization_audit"
    assert report.summary()["failed"] == 0


def test_coarse_grid_still_passes():
    coarse = dataclasses.replace(SMALL_BATTERY, resolution=10, max_dim=3)
    assert run_verify_suite(coarse).passed


def _slack(record):
    return float(np.clip(record["spectrum"][record["rank_bound"]:], 0.0, None).sum())


def test_tampered_solver_is_rejected():
    # three instances per d so rank-3 states appear at d = 3 and d = 4
    settings = dataclasses.replace(SMALL_BATTERY, instances=3, solver=tampered_solve)
    report = run_verify_suite(settings)
    assert not report.passed

    descent = [r for r in report.records if r["check_name"] == "descent_oracle"]
    for record in descent:
        slack = _slack(record)
        if slack == 0.0:
            assert record["passed"], record
            continue
        # the claimed distance drops slack^2 / R (HS) or slack / 2 (trace)
        expected = slack**2 / record["rank_bound"] if record["metric"] == "hs" else slack / 2.0
        assert record["gap"] == pytest.approx(expected, abs=1e-6)
        if expected > 2e-6:
            assert not record["passed"], record

    uniqueness = [r for r in report.records if r["check_name"] == "hs_uniqueness"]
    assert any(not r["passed"] for r in uniqueness)


def test_tampered_solver_on_worked_example():
    settings = dataclasses.replace(SMALL_BATTERY, max_dim=2, solver=tampered_solve)
    report = run_verify_suite(settings)
    # the worked example is checked with the base seed itself
    worked = [r for r in report.records if r.get("seed") == settings.seed]

    failed = {(r["check_name"], r.get("metric"), r.get("rank_bound")) for r in worked if not r["passed"]}
    for metric in ("hs", "trace"):
        assert ("descent_oracle", metric, 1) in failed
        assert ("descent_oracle", metric, 2) in failed
        assert ("descent_oracle", metric, 3) not in failed
    # at R = 1 truncate-and-rescale is the pure top state, same as the optimum
    assert ("hs_uniqueness", "hs", 2) in failed
    assert ("hs_uniqueness", "hs", 1) not in failed

    gaps = {(r["metric"], r["rank_bound"]): r["gap"] for r in worked if r["check_name"] == "descent_oracle"}
    assert gaps["hs", 2] == pytest.approx(0.02, abs=1e-6)
    assert gaps["trace", 2] == pytest.approx(0.1, abs=1e-6)


@pytest.mark.slow
def test_full_battery_passes():
    report = run_verify_suite(VerifySettings())
    assert report.passed, report.failures[:3]
