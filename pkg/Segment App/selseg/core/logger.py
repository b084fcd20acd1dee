import logging
import os
from pathlib import Path

from selseg import config

LOG_FORMAT = "%(asctime)s %(levelname)s: %(message)s"


def _resolve_level(level: int | str | None) -> int:
    if level is None:
        return logging.DEBUG if os.getenv("SELSEG_DEBUG") else logging.INFO
    if isinstance(level, str):
        value = logging.getLevelName(level.upper())
        if not isinstance(value, int):
            raise ValueError(f"unknown log level: {level}")
        return value
    return int(level)


def init_logging(log_path: str | os.PathLike[str] | None = None, *, level: int | str | None = None,
                 console: bool = True) -> logging.Logger:
    """Route the ``selseg`` logger to a log file and, optionally, stderr.

    Parameters
    ----------
    log_path : str or Path, optional
        Log file; relative paths are taken from the repository root.
        Defaults to :data:`config.LOG_PATH`.
    level : int or str, optional
        Level name or number. DEBUG when ``SELSEG_DEBUG`` is set, else INFO.
    console : bool
        Also log to stderr.

    Returns
    -------
    logging.Logger
        The configured ``selseg`` logger.
    """
    log_file = Path(log_path or config.LOG_PATH)
    if not log_file.is_absolute():
        log_file = Path(__file__).resolve().parents[3] / log_file
    log_file.parent.mkdir(parents=True, exist_ok=True)

    level = _resolve_level(level)
    logger = logging.getLogger("selseg")
    logger.setLevel(level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)
    handlers: list[logging.Handler] = [logging.FileHandler(log_file, encoding="utf-8")]
    if console:
        handlers.append(logging.StreamHandler())
    for handler in handlers:
        handler.setFormatter(formatter)
        handler.setLevel(level)
        logger.addHandler(handler)

    # keep numba's compiler output out of debug logs
    logging.getLogger("numba").setLevel(logging.WARNING)
    return logger
