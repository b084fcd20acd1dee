"""Local Fourier analysis of the relaxation schemes.

Coefficients are frozen pixel by pixel and every smoother is reduced to the
set of neighbour coefficients it lags. For a lagged set ``L`` the
amplification factor of the Fourier mode ``(a1, a2)`` is::

    | sum_{k in L} K_k e^{i theta_k} | / | S - sum_{k not in L} K_k e^{i theta_k} |

with phases ``+a1, -a1, +a2, -a2`` for ``A, B, C, D``. The smoothing rate
is its maximum over the high frequencies ``[-pi, pi)^2 minus [-pi/2, pi/2)^2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .. import config
from . import kernels
from .errors import ParameterError
from .grid import Field2D
from .model import StencilField
from .smoothers import (
    CASE_PATTERNS,
    LABELS,
    CaseMap,
    SmootherKind,
    case_lag_set,
    classify_case14,
    detect_jump_set,
)

logger = logging.getLogger("selseg")

# Anchors kept on every axis so the extremal modes are sampled exactly
_ANCHORS = (-np.pi, -0.5 * np.pi, 0.0, 0.5 * np.pi)

LAG_LEX = frozenset({"A", "C"})
LAG_LINE = frozenset({"C"})


@dataclass(frozen=True)
class FrequencyGrid:
    """High-frequency sample points ``(a1, a2)`` of a ``Q x Q`` grid."""

    samples_per_axis: int = 256
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        q = int(self.samples_per_axis)
        if q < 16:
            raise ParameterError(f"at least 16 samples per axis required, got {q}")
        axis = -np.pi + 2.0 * np.pi * np.arange(q) / q
        for anchor in _ANCHORS:
            axis[np.abs(axis - anchor) < 1e-9] = anchor
        axis = np.unique(np.concatenate([axis, _ANCHORS]))
        a1, a2 = np.meshgrid(axis, axis, indexing="ij")
        a1, a2 = a1.ravel(), a2.ravel()
        low = (a1 >= -0.5 * np.pi) & (a1 < 0.5 * np.pi) & (a2 >= -0.5 * np.pi) & (a2 < 0.5 * np.pi)
        object.__setattr__(self, "points", np.column_stack([a1[~low], a2[~low]]))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def alpha1(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def alpha2(self) -> np.ndarray:
        return self.points[:, 1]

    def trig(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (np.cos(self.alpha1), np.sin(self.alpha1),
                np.cos(self.alpha2), np.sin(self.alpha2))

    def contains(self, a1: float, a2: float, tol: float = 1e-12) -> bool:
        hit = (np.abs(self.alpha1 - a1) <= tol) & (np.abs(self.alpha2 - a2) <= tol)
        return bool(hit.any())


@lru_cache(maxsize=8)
def frequency_grid(samples_per_axis: int | None = None) -> FrequencyGrid:
    """Shared grid, ``config.LFA_SAMPLES`` points per axis by default."""
    return FrequencyGrid(samples_per_axis or config.LFA_SAMPLES)


def _lag_mask(lagged: Iterable[str]) -> np.ndarray:
    labels = set(lagged)
    unknown = labels.difference(LABELS)
    if unknown:
        raise ParameterError(f"unknown coefficient label(s): {sorted(unknown)}")
    return np.array([label in labels for label in LABELS])


def _evaluate(rows: np.ndarray, lagged: np.ndarray, freq: FrequencyGrid):
    """Rates, maximising sample index and singular counts of unique rows."""
    key = np.hstack([rows, lagged.astype(float)])
    unique, inverse = np.unique(key, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    rates, argmax, singular = kernels.amplification(
        np.ascontiguousarray(unique[:, :5]),
        np.ascontiguousarray(unique[:, 5:] > 0.5),
        *freq.trig(),
    )
    return rates[inverse], argmax[inverse], singular[inverse]


def _single(a, b, c, d, s, lagged: np.ndarray, freq: FrequencyGrid | None,
            return_point: bool):
    if not s > 0:
        raise ParameterError(f"S must be positive, got {s}")
    freq = freq or frequency_grid()
    row = np.array([[a, b, c, d, s]], dtype=float)
    rates, argmax, singular = _evaluate(row, lagged[None, :], freq)
    if singular[0]:
        logger.warning("Skipped %d singular frequency sample(s)", int(singular[0]))
    value = float(rates[0])
    if not return_point:
        return value
    point = None if argmax[0] < 0 else tuple(float(x) for x in freq.points[argmax[0]])
    return value, point


def amp_lex(a: float, b: float, c: float, d: float, s: float,
            freq: FrequencyGrid | None = None, *, return_point: bool = False):
    """Pointwise lexicographic rate (GSLEX and NEWT): ``A`` and ``C`` lagged."""
    return _single(a, b, c, d, s, _lag_mask(LAG_LEX), freq, return_point)


def amp_line(a: float, b: float, c: float, d: float, s: float,
             freq: FrequencyGrid | None = None, *, return_point: bool = False):
    """Line Gauss-Seidel rate: lines along i, only ``C`` lagged."""
    return _single(a, b, c, d, s, _lag_mask(LAG_LINE), freq, return_point)


def amp_adapted(a: float, b: float, c: float, d: float, s: float, lagged: Iterable[str],
                freq: FrequencyGrid | None = None, *, return_point: bool = False):
    """Rate of the scheme lagging the coefficients named in ``lagged``."""
    labels = frozenset(lagged)
    if not labels or len(labels) >= 4:
        raise ParameterError("lagged set must be a non-empty proper subset of {A, B, C, D}")
    return _single(a, b, c, d, s, _lag_mask(labels), freq, return_point)


@dataclass
class LfaReport:
    """Grid-wide smoothing rates of one smoother on frozen coefficients.

    Jump-set statistics are ``None`` when the corresponding region is empty.
    """

    mu_max: float
    mu_avg: float
    mu_max_D: float | None
    mu_avg_D: float | None
    mu_max_notD: float | None
    mu_avg_notD: float | None
    worst_pixels: list[tuple[int, int, float, float, float, float, float]]
    rate_map: Field2D
    singular_samples: int = 0
    smoother: str = ""

    @property
    def has_singular_samples(self) -> bool:
        return self.singular_samples > 0

    def above(self, threshold: float) -> np.ndarray:
        """Boolean map of pixels whose rate exceeds ``threshold``."""
        return self.rate_map.values > threshold

    def worst_table(self) -> pd.DataFrame:
        return pd.DataFrame(self.worst_pixels, columns=["i", "j", "mu", "A", "B", "C", "D"])

    def summary(self) -> dict[str, float | None | list]:
        return {
            "mu_max": self.mu_max,
            "mu_avg": self.mu_avg,
            "mu_max_D": self.mu_max_D,
            "mu_avg_D": self.mu_avg_D,
            "worst_pixels": [list(row) for row in self.worst_pixels],
        }


def _pixel_lags(kind: SmootherKind, casemap: CaseMap | None, shape: tuple[int, int],
                coeffs: StencilField) -> tuple[np.ndarray, CaseMap]:
    n, m = shape
    if casemap is None:
        casemap = detect_jump_set(coeffs, config.SIGMA_JUMP)
    if kind in (SmootherKind.GSLINE_I, SmootherKind.GSLINE_II, SmootherKind.HYBRID1):
        base = _lag_mask(LAG_LINE)
    else:
        base = _lag_mask(LAG_LEX)
    mask = np.broadcast_to(base, (n, m, 4)).copy()
    if kind.hybrid:
        jump = casemap.in_jump_set
        mask[jump] = False
        mask[jump, casemap.smallest[jump]] = True
    return mask, casemap


def rate_report(coeffs: StencilField, kind: SmootherKind | str,
                casemap: CaseMap | None = None, freq: FrequencyGrid | None = None, *,
                lagged: Iterable[str] | None = None, worst: int = 10) -> LfaReport:
    """Per-pixel smoothing rates and their grid-wide statistics.

    Hybrid smoothers lag only the smallest coefficient on jump pixels and
    behave as GSLEX (Hybrid 2) or GSLINE (Hybrid 1) elsewhere. ``lagged``
    overrides the scheme with one fixed lagged set on every pixel.
    """
    kind = SmootherKind.parse(kind)
    freq = freq or frequency_grid()
    n, m = coeffs.shape
    if lagged is not None:
        fixed = frozenset(lagged)
        if not fixed or len(fixed) >= 4:
            raise ParameterError("lagged set must be a non-empty proper subset of {A, B, C, D}")
        mask = np.broadcast_to(_lag_mask(fixed), (n, m, 4)).copy()
        if casemap is None:
            casemap = detect_jump_set(coeffs, config.SIGMA_JUMP)
    else:
        mask, casemap = _pixel_lags(kind, casemap, (n, m), coeffs)

    rows = np.column_stack([coeffs.A.ravel(), coeffs.B.ravel(), coeffs.C.ravel(),
                            coeffs.D.ravel(), coeffs.S.ravel()])
    rates, _, singular = _evaluate(rows, mask.reshape(-1, 4), freq)
    rate_map = rates.reshape(n, m)

    jump = casemap.in_jump_set

    def _split(selector: np.ndarray) -> tuple[float | None, float | None]:
        if not selector.any():
            return None, None
        values = rate_map[selector]
        return float(values.max()), float(values.mean())

    max_d, avg_d = _split(jump)
    max_nd, avg_nd = _split(~jump)

    order = np.argsort(-rates, kind="stable")[:worst]
    worst_pixels = []
    for flat in order:
        i, j = divmod(int(flat), m)
        a, b, c, d, _ = coeffs.at(i, j)
        worst_pixels.append((i, j, float(rates[flat]), a, b, c, d))

    singular_total = int(singular.sum())
    if singular_total:
        logger.warning("LFA skipped %d singular frequency sample(s)", singular_total)
    logger.debug("LFA %s: mu_max %.4f, mu_avg %.4f over %d frequencies",
                 kind.value, float(rate_map.max()), float(rate_map.mean()), len(freq))
    return LfaReport(
        mu_max=float(rate_map.max()),
        mu_avg=float(rate_map.mean()),
        mu_max_D=max_d,
        mu_avg_D=avg_d,
        mu_max_notD=max_nd,
        mu_avg_notD=avg_nd,
        worst_pixels=worst_pixels,
        rate_map=Field2D(rate_map),
        singular_samples=singular_total,
        smoother=kind.value,
    )


def _coefficient_rows(rows: Sequence[Sequence[float]]) -> np.ndarray:
    table = np.atleast_2d(np.asarray(rows, dtype=float))
    if table.shape[1] == 4:
        table = np.column_stack([table, table.sum(axis=1)])
    if table.shape[1] != 5:
        raise ParameterError("coefficient rows must hold (A, B, C, D) or (A, B, C, D, S)")
    return table


def adapted_rate_table(rows: Sequence[Sequence[float]],
                       freq: FrequencyGrid | None = None) -> pd.DataFrame:
    """Rates of the line smoother and of all 14 adapted schemes per pixel row.

    The ``case`` column is the pattern of the pixel itself (``None`` when
    all four coefficients are equal).
    """
    freq = freq or frequency_grid()
    table = _coefficient_rows(rows)
    records = []
    for a, b, c, d, s in table:
        try:
            own = classify_case14(a, b, c, d)
        except ParameterError:
            own = None
        record = {"A": a, "B": b, "C": c, "D": d, "S": s, "case": own,
                  "line": amp_line(a, b, c, d, s, freq)}
        for case in CASE_PATTERNS:
            record[f"case_{case}"] = amp_adapted(a, b, c, d, s, case_lag_set(case), freq)
        records.append(record)
    return pd.DataFrame.from_records(records)


def lag_smallest_table(rows: Sequence[Sequence[float]],
                       freq: FrequencyGrid | None = None) -> pd.DataFrame:
    """Line rate against lagging the one, two and three smallest coefficients."""
    freq = freq or frequency_grid()
    table = _coefficient_rows(rows)
    records = []
    for a, b, c, d, s in table:
        ranked = [LABELS[k] for k in np.argsort([a, b, c, d], kind="stable")]
        record = {"A": a, "B": b, "C": c, "D": d, "S": s, "smallest": ranked[0],
                  "line": amp_line(a, b, c, d, s, freq)}
        for count in (1, 2, 3):
            record[f"lag{count}"] = amp_adapted(a, b, c, d, s, ranked[:count], freq)
        records.append(record)
    return pd.DataFrame.from_records(records)
