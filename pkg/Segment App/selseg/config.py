from __future__ import annotations

import json
import os
import logging
from pathlib import Path

try:
    from dotenv import load_dotenv, find_dotenv
except Exception:  # pragma: no cover - optional dependency
    def load_dotenv(*_args, **_kwargs) -> None:
        pass

    def find_dotenv(*_args, **_kwargs) -> str | None:
        return None

# Repository root is three levels up from this file
_REPO_ROOT = Path(__file__).resolve().parents[2]

# Default locations matching the repository layout
_DEFAULT_OUTPUT_DIR = _REPO_ROOT / "output"
_DEFAULT_LOG_PATH = _REPO_ROOT / "selseg.log"

# Solver defaults
_DEFAULT_COARSEST_SIZE = 32
_DEFAULT_SIGMA_JUMP = 1.5
_DEFAULT_LFA_SAMPLES = 256
_DEFAULT_MAX_CYCLES = 50
_DEFAULT_ETA = 1e-4
_DEFAULT_COARSE_ITERS = 100
_DEFAULT_THREADS = 1

# Logger used for configuration warnings
logger = logging.getLogger("selseg")

# Public configuration variables (will be initialised by ``load_config``)
OUTPUT_DIR: Path = _DEFAULT_OUTPUT_DIR
LOG_PATH: Path = _DEFAULT_LOG_PATH
COARSEST_SIZE: int = _DEFAULT_COARSEST_SIZE
SIGMA_JUMP: float = _DEFAULT_SIGMA_JUMP
LFA_SAMPLES: int = _DEFAULT_LFA_SAMPLES
MAX_CYCLES: int = _DEFAULT_MAX_CYCLES
ETA: float = _DEFAULT_ETA
COARSE_ITERS: int = _DEFAULT_COARSE_ITERS
THREADS: int = _DEFAULT_THREADS

__all__ = [
    "OUTPUT_DIR",
    "LOG_PATH",
    "COARSEST_SIZE",
    "SIGMA_JUMP",
    "LFA_SAMPLES",
    "MAX_CYCLES",
    "ETA",
    "COARSE_ITERS",
    "THREADS",
    "load_config",
]


def load_config() -> None:
    """Load configuration from ``.env`` and ``config.json`` if present."""
    dotenv_file = find_dotenv(usecwd=True)
    if dotenv_file:
        load_dotenv(dotenv_file)

    config_file = _REPO_ROOT / "config.json"
    config: dict[str, str] = {}
    if config_file.exists():
        try:
            config = json.loads(config_file.read_text(encoding="utf-8"))
        except Exception:
            logger.warning("Ignoring unreadable %s", config_file)
            config = {}

    def _get(name: str, default: Path) -> Path:
        return Path(os.getenv(name, config.get(name, str(default))))

    def _get_int(name: str, default: int) -> int:
        try:
            return int(os.getenv(name, config.get(name, default)))
        except (TypeError, ValueError):
            logger.warning("Invalid integer for %s, using %d", name, default)
            return default

    def _get_float(name: str, default: float) -> float:
        try:
            return float(os.getenv(name, config.get(name, default)))
        except (TypeError, ValueError):
            logger.warning("Invalid number for %s, using %g", name, default)
            return default

    global OUTPUT_DIR, LOG_PATH, COARSEST_SIZE, SIGMA_JUMP, LFA_SAMPLES
    global MAX_CYCLES, ETA, COARSE_ITERS, THREADS

    OUTPUT_DIR = _get("OUTPUT_DIR", _DEFAULT_OUTPUT_DIR)
    LOG_PATH = _get("LOG_PATH", _DEFAULT_LOG_PATH)
    COARSEST_SIZE = _get_int("SELSEG_COARSEST_SIZE", _DEFAULT_COARSEST_SIZE)
    SIGMA_JUMP = _get_float("SELSEG_SIGMA_JUMP", _DEFAULT_SIGMA_JUMP)
    LFA_SAMPLES = _get_int("SELSEG_LFA_SAMPLES", _DEFAULT_LFA_SAMPLES)
    MAX_CYCLES = _get_int("SELSEG_MAX_CYCLES", _DEFAULT_MAX_CYCLES)
    ETA = _get_float("SELSEG_ETA", _DEFAULT_ETA)
    COARSE_ITERS = _get_int("SELSEG_COARSE_ITERS", _DEFAULT_COARSE_ITERS)
    # Reserved: the solver is sequential, the value is only recorded
    THREADS = _get_int("MG_SELSEG_THREADS", _DEFAULT_THREADS)


# Initialise configuration on import
load_config()
