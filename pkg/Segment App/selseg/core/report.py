"""Solver outputs: mask and overlay images plus the run report.

The report is line oriented, one ``key: value`` pair per line with JSON
values, so it can be read back field by field::

    cycles: 4
    energy_per_cycle: [0.031, 0.029, 0.029, 0.029]
    mu_max_D: null
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import FormatError
from .grid import FieldLike, _as_array
from .image_io import save_pgm

logger = logging.getLogger("selseg")

REPORT_FIELDS = (
    "cycles",
    "energy_per_cycle",
    "rel_change_per_cycle",
    "wall_time_seconds",
    "mu_max",
    "mu_avg",
    "mu_max_D",
    "mu_avg_D",
    "worst_pixels",
)

_NUMBER_OR_NULL = {"type": ["number", "null"]}
_NUMBERS_OR_NULL = {"type": ["array", "null"], "items": {"type": "number"}}

REPORT_SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "cycles": {"type": ["integer", "null"], "minimum": 0},
        "energy_per_cycle": _NUMBERS_OR_NULL,
        "rel_change_per_cycle": _NUMBERS_OR_NULL,
        "wall_time_seconds": _NUMBER_OR_NULL,
        "mu_max": _NUMBER_OR_NULL,
        "mu_avg": _NUMBER_OR_NULL,
        "mu_max_D": _NUMBER_OR_NULL,
        "mu_avg_D": _NUMBER_OR_NULL,
        "worst_pixels": {
            "type": ["array", "null"],
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 7, "maxItems": 7},
        },
    },
    "required": list(REPORT_FIELDS),
    "additionalProperties": False,
}


def zero_level_set(phi: FieldLike) -> np.ndarray:
    """Pixels whose sign differs from at least one 4-neighbour."""
    inside = _as_array(phi) > 0
    edge = np.zeros_like(inside)
    diff_i = inside[1:, :] != inside[:-1, :]
    diff_j = inside[:, 1:] != inside[:, :-1]
    edge[1:, :] |= diff_i
    edge[:-1, :] |= diff_i
    edge[:, 1:] |= diff_j
    edge[:, :-1] |= diff_j
    return edge


def build_report(stats=None, lfa=None) -> dict[str, Any]:
    """Report document from solve statistics and/or an LFA report."""
    doc: dict[str, Any] = {key: None for key in REPORT_FIELDS}
    if stats is not None:
        doc["cycles"] = int(stats.cycles_run)
        doc["energy_per_cycle"] = [float(v) for v in stats.energy_per_cycle]
        doc["rel_change_per_cycle"] = [float(v) for v in stats.rel_change_per_cycle]
        doc["wall_time_seconds"] = float(stats.wall_time_total)
    if lfa is not None:
        doc.update(lfa.summary())
    jsonschema.validate(doc, REPORT_SCHEMA)
    return doc


def format_report(doc: dict[str, Any]) -> str:
    jsonschema.validate(doc, REPORT_SCHEMA)
    return "".join(f"{key}: {json.dumps(doc[key], allow_nan=False)}\n" for key in REPORT_FIELDS)


def parse_report(text: str) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise FormatError(f"line {lineno}: expected 'key: value'")
        try:
            doc[key.strip()] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {lineno}: invalid value for {key.strip()}: {exc.msg}") from None
    try:
        jsonschema.validate(doc, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise FormatError(f"invalid report: {exc.message}") from None
    return doc


def write_report(path: str | Path, doc: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(doc), encoding="utf-8")
    return path


def read_report(path: str | Path) -> dict[str, Any]:
    return parse_report(Path(path).read_text(encoding="utf-8"))


def write_outputs(phi: FieldLike, mask: FieldLike | None = None, *, stats=None, lfa=None,
                  image: FieldLike | None = None, mask_path: str | Path | None = None,
                  overlay_path: str | Path | None = None,
                  report_path: str | Path | None = None) -> dict[str, Path]:
    """Write whichever of mask, overlay and report have a path.

    The mask is 0/255; the overlay shows ``image`` (black when absent) with
    the zero level set drawn white.
    """
    written: dict[str, Path] = {}
    if mask_path is not None:
        values = _as_array(phi) > 0 if mask is None else _as_array(mask) > 0
        written["mask"] = save_pgm(mask_path, values.astype(float))
    if overlay_path is not None:
        base = np.zeros_like(_as_array(phi)) if image is None else np.array(_as_array(image))
        base[zero_level_set(phi)] = 1.0
        written["overlay"] = save_pgm(overlay_path, base)
    if report_path is not None:
        written["report"] = write_report(report_path, build_report(stats, lfa))
    for kind, path in written.items():
        logger.info("Wrote %s to %s", kind, path)
    return written
