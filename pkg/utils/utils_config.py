"""
Config Utility
File: utils/utils_config.py

This script provides the configuration functions for the project.

It centralizes the configuration management
by loading environment variables from .env in the root project folder
and constructing file paths using pathlib.

Precedence (lowest to highest):
- built-in defaults (the numbers in this module)
- environment variables / .env
- the optional JSON file passed with --config

If you rename any variables in .env, remember to:
- update .env.example
- update the corresponding function in this module.
"""

#####################################
# Imports
#####################################

# import from Python Standard Library
import json
import os
import pathlib
from typing import Any

# import from external packages
from dotenv import load_dotenv

# import from local modules
from .utils_logger import logger

#####################################
# Load Environment Variables
#####################################

load_dotenv()

CONFIG_SECTIONS = ("tolerances", "optimizer", "oracle")

#####################################
# Getter Functions for .env Variables
#####################################


def _get_float(name: str, default: float) -> float:
    value = float(os.getenv(name, default))
    logger.debug(f"{name}: {value}")
    return value


def _get_int(name: str, default: int) -> int:
    value = int(os.getenv(name, default))
    logger.debug(f"{name}: {value}")
    return value


def get_herm_tol() -> float:
    """Fetch QLRAP_HERM_TOL from environment or use default."""
    return _get_float("QLRAP_HERM_TOL", 1e-9)


def get_trace_tol() -> float:
    """Fetch QLRAP_TRACE_TOL from environment or use default."""
    return _get_float("QLRAP_TRACE_TOL", 1e-9)


def get_psd_tol() -> float:
    """Fetch QLRAP_PSD_TOL from environment or use default."""
    return _get_float("QLRAP_PSD_TOL", 1e-9)


def get_ortho_tol() -> float:
    """Fetch QLRAP_ORTHO_TOL from environment or use default."""
    return _get_float("QLRAP_ORTHO_TOL", 1e-8)


def get_recon_tol() -> float:
    """Fetch QLRAP_RECON_TOL from environment or use default."""
    return _get_float("QLRAP_RECON_TOL", 1e-8)


def get_rank_tol() -> float:
    """Fetch QLRAP_RANK_TOL from environment or use default."""
    return _get_float("QLRAP_RANK_TOL", 1e-10)


def get_degeneracy_tol() -> float:
    """Fetch QLRAP_DEGENERACY_TOL from environment or use default."""
    return _get_float("QLRAP_DEGENERACY_TOL", 1e-9)


def get_max_iters() -> int:
    """Fetch QLRAP_MAX_ITERS from environment or use default."""
    return _get_int("QLRAP_MAX_ITERS", 5000)


def get_restarts() -> int:
    """Fetch QLRAP_RESTARTS from environment or use default."""
    return _get_int("QLRAP_RESTARTS", 5)


def get_convergence_tol() -> float:
    """Fetch QLRAP_CONVERGENCE_TOL from environment or use default."""
    return _get_float("QLRAP_CONVERGENCE_TOL", 1e-6)


def get_grid_resolution() -> int:
    """Fetch QLRAP_GRID_RESOLUTION from environment or use default."""
    return _get_int("QLRAP_GRID_RESOLUTION", 100)


def get_seed() -> int:
    """Fetch QLRAP_SEED from environment or use default."""
    return _get_int("QLRAP_SEED", 0)


def get_base_data_path() -> pathlib.Path:
    """Fetch BASE_DATA_DIR from environment or use default."""
    project_root = pathlib.Path(__file__).parent.parent
    data_dir = project_root / os.getenv("BASE_DATA_DIR", "data")
    logger.debug(f"BASE_DATA_DIR: {data_dir}")
    return data_dir


#####################################
# Grouped Settings
#####################################


def get_tolerance_settings() -> dict[str, float]:
    """Tolerances from the environment, keyed like qlrap.core_linalg.Tolerances."""
    return {
        "herm_tol": get_herm_tol(),
        "trace_tol": get_trace_tol(),
        "psd_tol": get_psd_tol(),
        "ortho_tol": get_ortho_tol(),
        "recon_tol": get_recon_tol(),
        "rank_tol": get_rank_tol(),
        "degeneracy_tol": get_degeneracy_tol(),
    }


def get_optimizer_settings() -> dict[str, Any]:
    """Optimizer settings from the environment, keyed like OptimizerConfig."""
    return {
        "max_iters": get_max_iters(),
        "restarts": get_restarts(),
        "convergence_tol": get_convergence_tol(),
        "seed": get_seed(),
    }


def get_oracle_settings() -> dict[str, Any]:
    """Oracle settings from the environment."""
    return {"resolution": get_grid_resolution(), "seed": get_seed()}


def load_config_file(path: pathlib.Path | str | None) -> dict[str, dict[str, Any]]:
    """
    Read the optional JSON config file.

    The file holds up to three sections, each a flat object:
    {"tolerances": {...}, "optimizer": {...}, "oracle": {...}}.

    Args:
        path: Path to the JSON file, or None for no file.

    Returns:
        dict: One (possibly empty) dict per section.

    Raises:
        ValueError: If the file is not a JSON object or has unknown sections.
    """
    sections: dict[str, dict[str, Any]] = {name: {} for name in CONFIG_SECTIONS}
    if path is None:
        return sections

    path = pathlib.Path(path)
    logger.info(f"Reading config file: {path}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        msg = f"Config file {path} must contain a JSON object."
        logger.error(msg)
        raise ValueError(msg)

    unknown = set(raw) - set(CONFIG_SECTIONS)
    if unknown:
        msg = f"Unknown config sections in {path}: {sorted(unknown)}"
        logger.error(msg)
        raise ValueError(msg)

    for name in CONFIG_SECTIONS:
        section = raw.get(name, {})
        if not isinstance(section, dict):
            msg = f"Config section '{name}' must be an object."
            logger.error(msg)
            raise ValueError(msg)
        sections[name] = dict(section)
    return sections


def resolve_settings(path: pathlib.Path | str | None = None) -> dict[str, dict[str, Any]]:
    """Merge environment settings with the config file (file wins)."""
    file_sections = load_config_file(path)
    merged = {
        "tolerances": {**get_tolerance_settings(), **file_sections["tolerances"]},
        "optimizer": {**get_optimizer_settings(), **file_sections["optimizer"]},
        "oracle": {**get_oracle_settings(), **file_sections["oracle"]},
    }
    logger.debug(f"Resolved settings: {merged}")
    return merged


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    logger.info("Testing configuration.")
    try:
        logger.info(f"Resolved settings: {resolve_settings()}")
        logger.info(f"Data folder: {get_base_data_path()}")
        logger.info("SUCCESS: Configuration function tests complete.")
    except Exception as e:
        logger.error(f"ERROR: Configuration function test failed: {e}")
