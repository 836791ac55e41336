"""
tests/test_cli_io.py

State files, the rank-2 sweep and the command-line entry point.

Usage:
  pytest -q tests/test_cli_io.py
"""

#####################################
# Imports
#####################################

import json

import numpy as np
import pandas as pd
import pytest

from qlrap.cli import main
from qlrap.core_linalg import density_from_spectrum
from qlrap.errors import DimMismatch, ParseError
from qlrap.random_states import haar_unitary, random_density
from qlrap.solver import solve
from qlrap.state_files import (
    MatrixFile,
    parse_matrix_obj,
    parse_spectrum_shorthand,
    read_matrix_file,
    write_matrix_file,
)
from qlrap.sweep import SWEEP_COLUMNS, SweepGrid, sweep_frame

SPECTRUM_ARG = "0.41,0.39,0.2,0"

#####################################
# Helper Functions
#####################################


def _run_json(capsys, *argv):
    code = main(["--format", "json", *argv])
    return code, json.loads(capsys.readouterr().out)


def _flagged(frame):
    return frame[frame["in_optimal_set"] == 1]


#####################################
# State Files
#####################################


def test_shipped_fixtures_parse(data_dir):
    rho = read_matrix_file(data_dir / "rho_tilde.json")
    assert rho.spectrum == (0.41, 0.39, 0.2, 0.0)
    assert np.allclose(rho.density().matrix, np.diag([0.41, 0.39, 0.2, 0.0]))

    qubit = read_matrix_file(data_dir / "qubit_mixed.json").density()
    assert np.allclose(np.linalg.eigvalsh(qubit.matrix), [0.2, 0.8], atol=1e-12)
    assert solve(qubit, 1).distance_star == pytest.approx(0.08, abs=1e-12)

    degenerate = read_matrix_file(data_dir / "degenerate_pair.json").density()
    assert solve(degenerate, 2).warnings


def test_dense_file_round_trips(tmp_path):
    state = random_density(3, rank=2, seed=1)
    path = write_matrix_file(tmp_path / "nested" / "state.json", MatrixFile.from_state(state, label="r", seed=1))
    again = read_matrix_file(path)
    assert np.allclose(again.matrix, state.matrix, atol=1e-15)
    assert (again.label, again.seed, again.dim) == ("r", 1, 3)


def test_spectrum_file_keeps_its_layout(tmp_path):
    basis = haar_unitary(2, seed=3)
    original = MatrixFile.from_spectrum([0.8, 0.2], basis, label="rotated")
    again = read_matrix_file(write_matrix_file(tmp_path / "s.json", original))
    assert again.spectrum == (0.8, 0.2)
    assert again.to_json_obj().keys() == original.to_json_obj().keys()
    assert np.allclose(np.linalg.eigvalsh(again.density().matrix), [0.2, 0.8], atol=1e-12)


@pytest.mark.parametrize(
    "obj",
    [
        [1, 2],
        {},
        {"entries": [[1.0, 2.0]]},
        {"dim": 3, "entries": [[[1.0, 0.0]]]},
        {"entries": [[["a", 0.0]]]},
        {"spectrum": []},
        {"spectrum": ["x"]},
        {"spectrum": [1.0], "seed": "7"},
        {"spectrum": [0.5, 0.5], "basis": [[[1.0, 0.0]]]},
    ],
)
def test_malformed_objects_raise_parse_error(obj):
    with pytest.raises(ParseError):
        parse_matrix_obj(obj)


def test_invalid_json_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ParseError):
        read_matrix_file(path)


def test_spectrum_shorthand():
    assert np.allclose(parse_spectrum_shorthand(SPECTRUM_ARG), [0.41, 0.39, 0.2, 0.0])
    for text in ("", "a,b", "0.5,nan"):
        with pytest.raises(ParseError):
            parse_spectrum_shorthand(text)


#####################################
# Sweep
#####################################


def test_sweep_shape_and_columns(rho_tilde):
    frame = sweep_frame(rho_tilde, SweepGrid(resolution=11))
    assert list(frame.columns) == list(SWEEP_COLUMNS)
    assert len(frame) == 121
    # x1 outer, x2 inner
    assert frame["lambda_sigma1"].iloc[1] == 0.0
    assert frame["lambda_sigma2"].iloc[1] == pytest.approx(0.1)


def test_hs_sweep_flags_the_unique_optimum(rho_tilde):
    flagged = _flagged(sweep_frame(rho_tilde, SweepGrid()))
    assert len(flagged) == 1
    row = flagged.iloc[0]
    assert (row["lambda_sigma1"], row["lambda_sigma2"]) == pytest.approx((0.51, 0.49), abs=1e-12)
    assert row["distance"] == pytest.approx(0.06, abs=1e-12)


def test_trace_sweep_flags_a_segment(rho_tilde):
    flagged = _flagged(sweep_frame(rho_tilde, SweepGrid(metric="trace")))
    assert len(flagged) == 41
    assert flagged["lambda_sigma1"].min() == pytest.approx(0.41, abs=1e-12)
    assert flagged["lambda_sigma1"].max() == pytest.approx(0.61, abs=1e-12)
    assert np.allclose(flagged["distance"], 0.2, atol=1e-12)


def test_sweep_of_reachable_state():
    flagged = _flagged(sweep_frame(density_from_spectrum([0.5, 0.5, 0.0, 0.0]), SweepGrid()))
    assert len(flagged) == 1
    assert flagged["distance"].iloc[0] == pytest.approx(0.0, abs=1e-15)


def test_sweep_argument_errors():
    with pytest.raises(ParseError):
        SweepGrid(range1=(0.6, 0.4))
    with pytest.raises(ParseError):
        SweepGrid(resolution=1)
    with pytest.raises(DimMismatch):
        sweep_frame(density_from_spectrum([1.0]))


#####################################
# Command Line
#####################################


def test_cli_solve_hs_report(capsys):
    code, report = _run_json(capsys, "solve", "--spectrum", SPECTRUM_ARG, "--rank", "2")
    assert code == 0
    assert report["distance_star"] == pytest.approx(0.06)
    assert report["sigma_spectrum"] == pytest.approx([0.51, 0.49])
    assert report["eckart_young_error"] == pytest.approx(0.04)
    assert report["trace_constraint_penalty"] == pytest.approx(0.02)
    assert report["naive_rescale_distance"] == pytest.approx(0.0600125)


def test_cli_solve_trace_report(capsys, data_dir):
    code, report = _run_json(capsys, "solve", "--input", str(data_dir / "rho_tilde.json"), "--rank", "2", "--metric", "trace")
    assert code == 0
    assert report["distance_star"] == pytest.approx(0.2)
    assert report["misordered_member"] == pytest.approx([0.49, 0.51])
    assert report["family"]["rank_bound"] == 2


def test_cli_solve_writes_state(capsys, tmp_path):
    output = tmp_path / "sigma.json"
    code = main(["solve", "--spectrum", SPECTRUM_ARG, "--rank", "2", "--output", str(output)])
    assert code == 0
    assert "distance_star: 0.06" in capsys.readouterr().out
    sigma = read_matrix_file(output).density()
    assert np.allclose(sigma.matrix, np.diag([0.51, 0.49, 0.0, 0.0]), atol=1e-12)


@pytest.mark.parametrize(
    "argv, error",
    [
        (["solve", "--spectrum", SPECTRUM_ARG, "--rank", "5"], "RankOutOfRange"),
        (["solve", "--spectrum", "0.5,0.6", "--rank", "1"], "NotUnitTrace"),
        (["solve", "--spectrum", "1.1,-0.1", "--rank", "1"], "NotPSD"),
        (["sweep", "--spectrum", "1.0"], "DimMismatch"),
    ],
)
def test_cli_validation_failures_exit_one(capsys, argv, error):
    assert main(argv) == 1
    assert error in capsys.readouterr().err


def test_cli_config_file(capsys, tmp_path, data_dir):
    code, _ = _run_json(capsys, "--config", str(data_dir / "config_example.json"), "solve", "--spectrum", SPECTRUM_ARG, "--rank", "1")
    assert code == 0

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": {}}), encoding="utf-8")
    assert main(["--config", str(bad), "solve", "--spectrum", SPECTRUM_ARG, "--rank", "1"]) == 1


def test_cli_missing_rank_is_usage_error():
    with pytest.raises(SystemExit):
        main(["solve", "--spectrum", SPECTRUM_ARG])


def test_cli_pca_converges(capsys, tmp_path):
    history = tmp_path / "history.csv"
    record = tmp_path / "runs.jsonl"
    code, report = _run_json(
        capsys, "pca", "--spectrum", SPECTRUM_ARG, "--rank", "2", "--output", str(history), "--record", str(record)
    )
    assert code == 0
    assert report["converged"]
    assert report["ancilla_qubits"] == 1
    assert report["state_in_input_basis"] == pytest.approx([0.51, 0.49], abs=1e-3)
    frame = pd.read_csv(history, comment="#")
    assert list(frame.columns) == ["iteration", "cost"]
    assert json.loads(record.read_text(encoding="utf-8").splitlines()[0])["converged"] is True


def test_cli_pca_budget_exhausted_exits_two(capsys):
    code, report = _run_json(capsys, "pca", "--spectrum", SPECTRUM_ARG, "--rank", "2", "--max-iters", "0")
    assert code == 2
    assert report["budget_exhausted"]


def test_cli_random_is_reproducible(capsys):
    assert main(["random", "--dim", "3", "--rank", "2", "--seed", "7"]) == 0
    first = capsys.readouterr().out
    assert main(["random", "--dim", "3", "--rank", "2", "--seed", "7"]) == 0
    assert capsys.readouterr().out == first
    state = parse_matrix_obj(json.loads(first))
    assert state.seed == 7
    assert state.density().rank() == 2


def test_cli_random_single_level(capsys):
    assert main(["random", "--dim", "1", "--rank", "1", "--seed", "0"]) == 0
    state = parse_matrix_obj(json.loads(capsys.readouterr().out))
    assert np.allclose(state.matrix, [[1.0]])


def test_cli_sweep_writes_csv(capsys, tmp_path):
    output = tmp_path / "sweep.csv"
    code, report = _run_json(capsys, "sweep", "--spectrum", SPECTRUM_ARG, "--metric", "trace", "--output", str(output))
    assert code == 0
    assert report["in_optimal_set"] == 41
    assert report["optimal_lambda_sigma1"] == pytest.approx([0.41, 0.61])
    header = output.read_text(encoding="utf-8").splitlines()[0]
    assert header == "# metric=trace"
    assert len(pd.read_csv(output, comment="#")) == 201 * 201


VERIFY_ARGS = ["verify", "--instances", "2", "--max-dim", "3", "--resolution", "10", "--trials", "5", "--restarts", "2"]


def test_cli_verify_passes_and_sinks_records(capsys, tmp_path):
    sink = tmp_path / "verify.jsonl"
    code, summary = _run_json(capsys, *VERIFY_ARGS, "--sink", "jsonl", "--sink-path", str(sink))
    assert code == 0
    assert summary["passed"] and not summary["tampered"]
    assert len(sink.read_text(encoding="utf-8").splitlines()) == summary["checks"]


def test_cli_verify_rejects_tampered_solver(capsys):
    code, summary = _run_json(capsys, *VERIFY_ARGS, "--tamper")
    assert code == 1
    assert summary["tampered"]
    assert summary["failed"] > 0
