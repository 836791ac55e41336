"""
qlrap/cli.py

Command-line entry point.

Usage (from the project root):

    python -m qlrap solve  --spectrum 0.41,0.39,0.2,0 --rank 2 --metric hs
    python -m qlrap verify --instances 5 --max-dim 5
    python -m qlrap sweep  --spectrum 0.41,0.39,0.2,0 --metric trace --output data/sweep_trace.csv
    python -m qlrap pca    --input data/rho_tilde.json --rank 2
    python -m qlrap random --dim 4 --rank 3 --seed 7 --output data/random_d4_r3.json

Global flags (before the subcommand):
    --config PATH      JSON file overriding tolerances / optimizer / oracle settings
    --format text|json report format on stdout

Exit codes: 0 success, 1 validation or verification failure,
2 budget or convergence failure. Logs go to stderr and logs/project_log.log;
stdout carries only the report.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import argparse
import dataclasses
import json
import pathlib
import sys
from typing import Any, Callable, Sequence

import numpy as np

from qlrap.core_linalg import DEFAULT_TOLERANCES, DensityMatrix, Tolerances, hs_distance
from qlrap.errors import QlrapError
from qlrap.pca_variational import (
    OptimizerConfig,
    ancilla_qubits_required,
    converged_state_in_basis,
    extract_principal_components,
    misordering_demo,
    optimize,
    principal_overlaps,
)
from qlrap.random_states import random_density
from qlrap.solver import (
    MetricTag,
    eckart_young_error,
    naive_rescale,
    solve,
    trace_constraint_penalty,
    trace_family,
)
from qlrap.state_files import (
    MatrixFile,
    parse_spectrum_shorthand,
    read_matrix_file,
    write_matrix_file,
)
from qlrap.sweep import SweepGrid, sweep_frame
from qlrap.verify_suite import VerifySettings, run_verify_suite, tampered_solve
from utils import utils_config as config
from utils.emitters import csv_emitter, duckdb_emitter, file_emitter
from utils.utils_logger import logger

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BUDGET = 2

#####################################
# Report Formatting
#####################################


def _round12(value: Any) -> Any:
    """Round every float in a nested structure to 12 significant digits."""
    if isinstance(value, (float, np.floating)):
        return float(f"{float(value):.12g}")
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, dict):
        return {k: _round12(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round12(v) for v in value]
    return value


def _format_text(report: dict[str, Any], indent: str = "") -> list[str]:
    lines = []
    for key, value in report.items():
        if isinstance(value, dict):
            lines.append(f"{indent}{key}:")
            lines.extend(_format_text(value, indent + "  "))
        elif isinstance(value, list):
            lines.append(f"{indent}{key}: " + ", ".join(str(v) for v in value))
        else:
            lines.append(f"{indent}{key}: {value}")
    return lines


def emit_report(report: dict[str, Any], fmt: str) -> None:
    report = _round12(report)
    if fmt == "json":
        sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write("\n".join(_format_text(report)) + "\n")


#####################################
# Helper Functions
#####################################


def _load_state(args: argparse.Namespace, tolerances: Tolerances) -> tuple[DensityMatrix, MatrixFile]:
    if args.input is not None:
        matrix_file = read_matrix_file(args.input)
    else:
        matrix_file = MatrixFile.from_spectrum(parse_spectrum_shorthand(args.spectrum))
    return matrix_file.density(tolerances), matrix_file


def _add_state_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--input", type=pathlib.Path, help="State file (JSON).")
    group.add_argument("--spectrum", type=str, help="Diagonal state, e.g. 0.41,0.39,0.2,0")


def _optimizer_config(args: argparse.Namespace, settings: dict[str, dict[str, Any]]) -> OptimizerConfig:
    overrides = dict(settings["optimizer"])
    for key in ("max_iters", "restarts", "seed", "convergence_tol", "noise_std"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return OptimizerConfig().with_overrides(overrides)


def _verify_settings(args: argparse.Namespace, settings: dict[str, dict[str, Any]], tolerances: Tolerances) -> VerifySettings:
    known = {f.name for f in dataclasses.fields(VerifySettings)} - {"tolerances", "solver"}
    overrides = {k: v for k, v in settings["oracle"].items() if k in known}
    unknown = set(settings["oracle"]) - known
    if unknown:
        raise ValueError(f"Unknown oracle settings: {sorted(unknown)}")
    for key in ("instances", "max_dim", "resolution", "restarts", "trials", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return VerifySettings(
        tolerances=tolerances,
        solver=tampered_solve if args.tamper else solve,
        **{k: int(v) for k, v in overrides.items()},
    )


def _verify_sink(args: argparse.Namespace) -> Callable[[dict[str, Any]], bool] | None:
    if args.sink == "none":
        return None
    data_dir = config.get_base_data_path()
    if args.sink == "jsonl":
        path = args.sink_path or data_dir / "verify_reports.jsonl"
        return lambda record: file_emitter.emit_record(record, path=path)
    db_path = args.sink_path or data_dir / "verify_reports.duckdb"
    return lambda record: duckdb_emitter.emit_record(record, db_path=db_path)


#####################################
# Commands
#####################################


def cmd_solve(args: argparse.Namespace, settings: dict[str, dict[str, Any]], tolerances: Tolerances) -> int:
    logger.info("STEP 1. Read the input state.")
    rho, _ = _load_state(args, tolerances)

    logger.info(f"STEP 2. Solve for R={args.rank}, metric={args.metric}.")
    metric = MetricTag.parse(args.metric)
    solution = solve(rho, args.rank, metric, tolerances)
    report = solution.to_record()
    if metric is MetricTag.HILBERT_SCHMIDT:
        report["eckart_young_error"] = eckart_young_error(rho, args.rank, tolerances)
        report["trace_constraint_penalty"] = trace_constraint_penalty(rho, args.rank, tolerances)
        if solution.truncated_weight > 0.0:
            report["naive_rescale_distance"] = hs_distance(rho, naive_rescale(rho, args.rank, tolerances))
    else:
        report["family"] = trace_family(rho, args.rank, tolerances).describe()
        demo = misordering_demo(rho, args.rank, args.seed, tolerances=tolerances)
        report["misordered_member"] = list(demo.member_spectrum) if demo.found else demo.reason

    if args.output is not None:
        logger.info("STEP 3. Write the optimal state.")
        label = f"sigma_star R={args.rank} metric={metric.value}"
        write_matrix_file(args.output, MatrixFile.from_state(solution.sigma_star, label=label))
        report["output"] = str(args.output)

    emit_report(report, args.format)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, settings: dict[str, dict[str, Any]], tolerances: Tolerances) -> int:
    logger.info("STEP 1. Resolve verify settings.")
    verify_settings = _verify_settings(args, settings, tolerances)
    if args.tamper:
        logger.warning("Running the battery against the tampered solver; failures are expected.")

    logger.info("STEP 2. Run the verification battery.")
    report = run_verify_suite(verify_settings, sink=_verify_sink(args))

    summary = report.summary()
    summary["tampered"] = bool(args.tamper)
    emit_report(summary, args.format)
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_sweep(args: argparse.Namespace, settings: dict[str, dict[str, Any]], tolerances: Tolerances) -> int:
    logger.info("STEP 1. Read the input state.")
    rho, _ = _load_state(args, tolerances)

    logger.info("STEP 2. Evaluate the sweep grid.")
    grid = SweepGrid(tuple(args.range1), tuple(args.range2), args.resolution, MetricTag.parse(args.metric))
    frame = sweep_frame(rho, grid, tolerances)

    logger.info("STEP 3. Write the CSV.")
    output = args.output or config.get_base_data_path() / f"sweep_{grid.metric.value}.csv"
    preamble = {**grid.preamble(), "spectrum": ",".join(f"{v:.12g}" for v in np.sort(np.linalg.eigvalsh(rho.matrix))[::-1])}
    if not csv_emitter.emit_frame(frame, path=output, preamble=preamble):
        return EXIT_FAILURE

    flagged = frame[frame["in_optimal_set"] == 1]
    report = {
        "output": str(output),
        "rows": len(frame),
        "on_trace_constraint": int(frame["on_trace_constraint"].sum()),
        "in_optimal_set": len(flagged),
        "optimal_lambda_sigma1": [float(flagged["lambda_sigma1"].min()), float(flagged["lambda_sigma1"].max())] if len(flagged) else [],
    }
    emit_report(report, args.format)
    return EXIT_OK


def cmd_pca(args: argparse.Namespace, settings: dict[str, dict[str, Any]], tolerances: Tolerances) -> int:
    logger.info("STEP 1. Read the input state and optimizer settings.")
    rho, _ = _load_state(args, tolerances)
    optimizer = _optimizer_config(args, settings)

    logger.info(f"STEP 2. Optimize the rank-{args.rank} purification ansatz.")
    run = optimize(rho, args.rank, optimizer, tolerances)

    logger.info("STEP 3. Extract principal components.")
    components = extract_principal_components(run.final_state, args.rank, tolerances)
    report = run.to_record()
    report["ancilla_qubits"] = ancilla_qubits_required(args.rank)
    report["state_in_input_basis"] = converged_state_in_basis(run, rho, tolerances)[: args.rank].tolist()
    report["component_values"] = [float(v) for v in components.values]
    report["component_overlaps"] = principal_overlaps(rho, components, tolerances).tolist()
    report["components_degenerate"] = components.degenerate

    if args.output is not None:
        csv_emitter.emit_frame(run.cost_history_frame(), path=args.output, preamble={"rank_bound": args.rank, "seed": optimizer.seed})
        report["cost_history"] = str(args.output)
    if args.record is not None:
        file_emitter.emit_record(_round12(report), path=args.record)

    emit_report(report, args.format)
    return EXIT_OK if run.converged else EXIT_BUDGET


def cmd_random(args: argparse.Namespace, settings: dict[str, dict[str, Any]], tolerances: Tolerances) -> int:
    seed = args.seed if args.seed is not None else int(settings["optimizer"].get("seed", 0))
    logger.info(f"STEP 1. Draw a random state: d={args.dim}, rank={args.rank}, seed={seed}.")
    state = random_density(args.dim, args.rank, seed, tolerances)
    matrix_file = MatrixFile.from_state(state, label=f"random d={args.dim} rank={args.rank}", seed=seed)

    if args.output is not None:
        write_matrix_file(args.output, matrix_file)
        emit_report({"output": str(args.output), "dim": args.dim, "rank": state.rank(tolerances.rank_tol), "seed": seed}, args.format)
    else:
        sys.stdout.write(json.dumps(matrix_file.to_json_obj(), indent=2) + "\n")
    return EXIT_OK


#####################################
# Argument Parser
#####################################


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlrap", description="Optimal low-rank approximation of density matrices.")
    parser.add_argument("--config", type=pathlib.Path, default=None, help="JSON settings file.")
    parser.add_argument("--format", choices=("text", "json"), default="text", help="Report format.")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("solve", help="Closed-form optimum for one state.")
    _add_state_arguments(p)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--metric", choices=("hs", "trace"), default="hs")
    p.add_argument("--seed", type=int, default=0, help="Seed for the trace-family search.")
    p.add_argument("--output", type=pathlib.Path, default=None, help="Write sigma* as a state file.")
    p.set_defaults(handler=cmd_solve)

    p = commands.add_parser("verify", help="Run the oracle battery.")
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--max-dim", dest="max_dim", type=int, default=None)
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sink", choices=("none", "jsonl", "duckdb"), default="none")
    p.add_argument("--sink-path", dest="sink_path", type=pathlib.Path, default=None)
    p.add_argument("--tamper", action="store_true", help="Verify a solver with N_R removed.")
    p.set_defaults(handler=cmd_verify)

    p = commands.add_parser("sweep", help="Rank-2 distance landscape as CSV.")
    _add_state_arguments(p)
    p.add_argument("--metric", choices=("hs", "trace"), default="hs")
    p.add_argument("--resolution", type=int, default=201)
    p.add_argument("--range1", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--range2", type=float, nargs=2, default=(0.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--output", type=pathlib.Path, default=None)
    p.set_defaults(handler=cmd_sweep)

    p = commands.add_parser("pca", help="Variational principal component analysis.")
    _add_state_arguments(p)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--convergence-tol", dest="convergence_tol", type=float, default=None)
    p.add_argument("--noise-std", dest="noise_std", type=float, default=None)
    p.add_argument("--output", type=pathlib.Path, default=None, help="Cost-history CSV.")
    p.add_argument("--record", type=pathlib.Path, default=None, help="Append the run record (JSONL).")
    p.set_defaults(handler=cmd_pca)

    p = commands.add_parser("random", help="Random density matrix of exact rank.")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", type=pathlib.Path, default=None)
    p.set_defaults(handler=cmd_random)
    return parser


#####################################
# Main Function
#####################################


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logger.info(f"START: qlrap {args.command}")

    try:
        settings = config.resolve_settings(args.config)
        tolerances = DEFAULT_TOLERANCES.with_overrides(settings["tolerances"])
        return args.handler(args, settings, tolerances)
    except QlrapError as e:
        logger.error(f"ERROR: {type(e).__name__}: {e}")
        sys.stderr.write(f"error: {type(e).__name__}: {e}\n")
        return e.exit_code
    except (OSError, ValueError) as e:
        logger.error(f"ERROR: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_FAILURE
    finally:
        logger.info(f"END: qlrap {args.command}")


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    sys.exit(main())
