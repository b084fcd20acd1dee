"""Relaxation schemes for the five-point level-set equations.

Standard smoothers
    GSLEX-I/II (pointwise Gauss-Seidel), GSLINE-I/II (line Gauss-Seidel along
    i) and NEWT-I/II (pointwise Newton). Variant I freezes the coefficients
    for the whole sweep, variant II refreshes them from the newest iterate.

Hybrid smoothers
    Pixels whose four coefficients differ by more than a factor ``sigma``
    form the jump set. Hybrid 1 follows a GSLINE-I sweep with a collective
    4x4 solve per jump pixel; Hybrid 2 runs four directional sweeps in
    which jump pixels lagging their smallest coefficient are solved in
    partial lines.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import NumericError, ParameterError, SingularSystemError
from .model import LevelProblem, StencilField, heaviside

logger = logging.getLogger("selseg")

LABELS = ("A", "B", "C", "D")


class SmootherKind(str, enum.Enum):
    GSLEX_I = "gslex1"
    GSLEX_II = "gslex2"
    GSLINE_I = "gsline1"
    GSLINE_II = "gsline2"
    NEWT_I = "newt1"
    NEWT_II = "newt2"
    HYBRID1 = "hybrid1"
    HYBRID2 = "hybrid2"

    @classmethod
    def parse(cls, value: "str | SmootherKind") -> "SmootherKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        aliases = {"gslexi": "gslex1", "gslexii": "gslex2", "gslinei": "gsline1",
                   "gslineii": "gsline2", "newti": "newt1", "newtii": "newt2"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ParameterError(f"unknown smoother: {value}") from None

    @property
    def local(self) -> bool:
        return self in (SmootherKind.GSLEX_II, SmootherKind.GSLINE_II, SmootherKind.NEWT_II)

    @property
    def hybrid(self) -> bool:
        return self in (SmootherKind.HYBRID1, SmootherKind.HYBRID2)


@dataclass
class CaseMap:
    """Jump-set membership and the smallest coefficient of each jump pixel.

    ``smallest`` holds 0..3 for A..D on jump pixels and -1 elsewhere.
    """

    in_jump_set: np.ndarray
    smallest: np.ndarray
    sigma_threshold: float

    @property
    def count(self) -> int:
        return int(self.in_jump_set.sum())

    def label(self, i: int, j: int) -> str | None:
        value = int(self.smallest[i, j])
        return None if value < 0 else LABELS[value]


@dataclass(frozen=True)
class Superpixel:
    """Run of jump pixels solved together by one partial line solve."""

    lag: str
    line_index: int
    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start + 1

    def pixels(self) -> list[tuple[int, int]]:
        if self.lag in ("A", "B"):
            return [(self.line_index, k) for k in range(self.start, self.end + 1)]
        return [(k, self.line_index) for k in range(self.start, self.end + 1)]


def _pixel_error(status: int, shape: tuple[int, int], what: str) -> tuple[int, int]:
    i, j = divmod(int(status), shape[1])
    logger.error("%s failed at pixel (%d, %d)", what, i, j)
    return i, j


# -- direct solvers -----------------------------------------------------------

def solve_tridiagonal(lower: Sequence[float], diag: Sequence[float],
                      upper: Sequence[float], rhs: Sequence[float]) -> np.ndarray:
    """Thomas algorithm.

    ``lower`` and ``upper`` may hold ``n-1`` off-diagonal entries or ``n``
    entries whose first (respectively last) element is ignored.
    """
    d = np.ascontiguousarray(diag, dtype=float)
    n = d.shape[0]
    lo = np.asarray(lower, dtype=float)
    up = np.asarray(upper, dtype=float)
    if lo.shape[0] == n - 1:
        lo = np.concatenate([[0.0], lo])
    if up.shape[0] == n - 1:
        up = np.concatenate([up, [0.0]])
    r = np.ascontiguousarray(rhs, dtype=float)
    if lo.shape[0] != n or up.shape[0] != n or r.shape[0] != n:
        raise ParameterError("tridiagonal bands and right-hand side have inconsistent sizes")
    out = np.empty(n)
    status = kernels.thomas(np.ascontiguousarray(lo), d, np.ascontiguousarray(up), r,
                            out, np.empty(n))
    if status >= 0:
        raise SingularSystemError(f"zero pivot in tridiagonal solve at row {status}")
    return out


def solve_arrow4(matrix4: np.ndarray, rhs4: Sequence[float]) -> np.ndarray:
    """Solve a 4x4 arrow system by the Schur complement on its first entry."""
    mat = np.ascontiguousarray(matrix4, dtype=float)
    if mat.shape != (4, 4):
        raise ParameterError(f"expected a 4x4 matrix, got {mat.shape}")
    out = np.empty(4)
    status = kernels.arrow4(mat, np.ascontiguousarray(rhs4, dtype=float), out)
    if status >= 0:
        raise SingularSystemError(f"zero pivot in arrow solve at row {status}")
    return out


# -- sweeps -------------------------------------------------------------------

def _work_copies(coeffs: StencilField):
    return (coeffs.A.copy(), coeffs.B.copy(), coeffs.C.copy(), coeffs.D.copy(), coeffs.S.copy())


def _local_context(problem: LevelProblem | None, phi: np.ndarray, local: bool):
    if local and not isinstance(problem, LevelProblem):
        raise ParameterError("local coefficient refresh needs the model problem")
    if not local:
        empty = np.empty((1, 1))
        return empty, empty, 0.0, empty, 0.0, 1.0, 1.0, 1.0, 1.0
    p = problem.params
    return (problem.weight, problem.fit, problem.area_term(phi), problem.fas_rhs,
            p.mu, p.eps_heaviside, problem.hx, problem.hy, p.eps_grad)


def _mode_is_local(mode: str) -> bool:
    if mode not in ("global", "local"):
        raise ParameterError(f"mode must be 'global' or 'local', got {mode!r}")
    return mode == "local"


def gslex_sweep(phi: np.ndarray, coeffs: StencilField, f: np.ndarray, mode: str = "global",
                *, problem: LevelProblem | None = None, order: int = 0) -> np.ndarray:
    """One lexicographic Gauss-Seidel pass; returns the updated copy of ``phi``.

    ``order`` selects one of the four traversal orders used by Hybrid 2
    (0 is the usual i-then-j ascending order).
    """
    local = _mode_is_local(mode)
    out = np.array(phi, dtype=float, order="C", copy=True)
    a, b, c, d, s = _work_copies(coeffs)
    rhs = np.array(f, dtype=float, order="C", copy=True)
    status = kernels.gslex(out, a, b, c, d, s, rhs, int(order), local,
                           *_local_context(problem, out, local))
    if status >= 0:
        i, j = _pixel_error(status, out.shape, "GSLEX")
        raise NumericError(f"vanishing diagonal at pixel ({i}, {j})")
    return out


def gsline_sweep(phi: np.ndarray, coeffs: StencilField, f: np.ndarray, mode: str = "global",
                 *, problem: LevelProblem | None = None) -> np.ndarray:
    """One line Gauss-Seidel pass, lines along i, rows in increasing j."""
    local = _mode_is_local(mode)
    out = np.array(phi, dtype=float, order="C", copy=True)
    a, b, c, d, s = _work_copies(coeffs)
    rhs = np.array(f, dtype=float, order="C", copy=True)
    status = kernels.gsline(out, a, b, c, d, s, rhs, local,
                            *_local_context(problem, out, local))
    if status >= 0:
        i, j = _pixel_error(status, out.shape, "GSLINE")
        raise SingularSystemError(f"zero pivot in line solve at pixel ({i}, {j})")
    return out


def newton_sweep(phi: np.ndarray, problem: LevelProblem, mode: str = "global",
                 coeffs: StencilField | None = None) -> np.ndarray:
    """One pointwise Newton pass on the level equations of ``problem``.

    Only the Rada-Chen area term is treated implicitly; fitting and distance
    terms are frozen, so with ``nu = 0`` (or for Spencer-Chen) the update is
    the GSLEX update.

    ``problem`` carries the model data of the update: ``problem.z``,
    ``problem.d``, ``problem.c1``, ``problem.c2``, ``problem.params`` and
    ``problem.kind``, with the fitting bracket precomputed in
    ``problem.fit``. ``coeffs`` defaults to
    ``problem.coefficients(phi)``.
    """
    local = _mode_is_local(mode)
    out = np.array(phi, dtype=float, order="C", copy=True)
    if coeffs is None:
        coeffs = problem.coefficients(out)
    a, b, c, d, s = _work_copies(coeffs)
    p = problem.params
    h_sum = float(heaviside(out, p.eps_heaviside).sum())
    status = np.zeros(2, dtype=np.int64)
    kernels.newton(out, a, b, c, d, s, problem.fit, problem.fas_rhs, local, problem.weight,
                   p.mu, p.eps_heaviside, problem.hx, problem.hy, p.eps_grad,
                   problem.two_nu, problem.area_target, h_sum, status)
    if status[0] >= 0:
        i, j = _pixel_error(status[0], out.shape, "Newton")
        raise NumericError(f"Newton update failed at pixel ({i}, {j})")
    if status[1]:
        logger.debug("Newton sweep damped %d pixel update(s)", int(status[1]))
    return out


# -- jump set -----------------------------------------------------------------

def detect_jump_set(coeffs: StencilField, sigma_threshold: float = 1.5) -> CaseMap:
    """Pixels whose largest coefficient exceeds ``sigma`` times the smallest."""
    if not sigma_threshold > 1:
        raise ParameterError(f"sigma must exceed 1, got {sigma_threshold}")
    stacked = coeffs.stacked()
    largest = stacked.max(axis=-1)
    lowest = stacked.min(axis=-1)
    in_jump = largest / np.maximum(lowest, np.finfo(float).tiny) > sigma_threshold
    smallest = np.where(in_jump, stacked.argmin(axis=-1), kernels.NO_LAG).astype(np.int64)
    logger.debug("Jump set: %d of %d pixels (sigma %.3g)", int(in_jump.sum()),
                 in_jump.size, sigma_threshold)
    return CaseMap(in_jump_set=in_jump, smallest=smallest, sigma_threshold=float(sigma_threshold))


# Rows of the L/S pattern table in the order A, B, C, D
CASE_PATTERNS: dict[int, str] = {
    1: "SLLS", 2: "SLSL", 3: "LSLS", 4: "LSSL", 5: "LLSS", 6: "SSLL", 7: "LSSS",
    8: "SSLS", 9: "SLSS", 10: "SSSL", 11: "LLSL", 12: "LSLL", 13: "LLLS", 14: "SLLL",
}
_PATTERN_CASES = {pattern: case for case, pattern in CASE_PATTERNS.items()}


def classify_case14(a: float, b: float, c: float, d: float,
                    sigma_threshold: float | None = None) -> int:
    """Case number of a jump pixel from its large/small coefficient pattern.

    Coefficients above the midpoint of the pixel's extreme values are large.
    """
    values = (float(a), float(b), float(c), float(d))
    hi, lo = max(values), min(values)
    if hi == lo:
        raise ParameterError("equal coefficients: pixel is not in the jump set")
    if sigma_threshold is not None and hi / max(lo, np.finfo(float).tiny) <= sigma_threshold:
        raise ParameterError("coefficient ratio below threshold: pixel is not in the jump set")
    middle = 0.5 * (hi + lo)
    pattern = "".join("L" if v > middle else "S" for v in values)
    return _PATTERN_CASES[pattern]


def case_lag_set(case: int) -> frozenset[str]:
    """Coefficients kept at their old value by the adapted scheme of ``case``."""
    try:
        pattern = CASE_PATTERNS[int(case)]
    except KeyError:
        raise ParameterError(f"case must be in 1..14, got {case}") from None
    return frozenset(label for label, kind in zip(LABELS, pattern) if kind == "S")


def build_superpixels(casemap: CaseMap, lag: str) -> list[Superpixel]:
    """Superpixels of the sub-sweep that lags ``lag``."""
    code = LABELS.index(lag)
    runs = kernels.superpixel_runs(np.ascontiguousarray(casemap.smallest, dtype=np.int64), code)
    return [Superpixel(lag=lag, line_index=int(r[0]), start=int(r[1]), end=int(r[2])) for r in runs]


# -- hybrid smoothers ---------------------------------------------------------

def hybrid1_sweep(phi: np.ndarray, coeffs: StencilField, f: np.ndarray,
                  casemap: CaseMap) -> np.ndarray:
    """GSLINE-I followed by one arrow solve per jump pixel, lexicographically."""
    out = np.array(phi, dtype=float, order="C", copy=True)
    a, b, c, d, s = _work_copies(coeffs)
    status = kernels.hybrid1(out, a, b, c, d, s, np.array(f, dtype=float, order="C"),
                             np.ascontiguousarray(casemap.in_jump_set),
                             np.ascontiguousarray(casemap.smallest, dtype=np.int64))
    if status >= 0:
        i, j = _pixel_error(status, out.shape, "Hybrid 1")
        raise SingularSystemError(f"singular local system at pixel ({i}, {j})")
    return out


def hybrid2_sweep(phi: np.ndarray, coeffs: StencilField, f: np.ndarray, casemap: CaseMap,
                  *, return_visits: bool = False):
    """Four directional sub-sweeps lagging A, B, C and D in turn.

    With ``return_visits`` the per-sub-sweep update counts, shaped
    ``(4, n, m)``, are returned as well.
    """
    out = np.array(phi, dtype=float, order="C", copy=True)
    a, b, c, d, s = _work_copies(coeffs)
    visits = np.zeros((4,) + out.shape if return_visits else (1, 1, 1), dtype=np.int64)
    status = kernels.hybrid2(out, a, b, c, d, s, np.array(f, dtype=float, order="C"),
                             np.ascontiguousarray(casemap.smallest, dtype=np.int64),
                             visits, return_visits)
    if status >= 0:
        i, j = _pixel_error(status, out.shape, "Hybrid 2")
        raise SingularSystemError(f"singular local system at pixel ({i}, {j})")
    if return_visits:
        return out, visits
    return out


def smooth(problem: LevelProblem, phi: np.ndarray, kind: SmootherKind,
           sigma_threshold: float = 1.5) -> np.ndarray:
    """One smoothing step of ``kind`` on the level equations of ``problem``.

    Coefficients and the area sum are assembled from ``phi`` on entry.
    """
    kind = SmootherKind.parse(kind)
    if not isinstance(problem, LevelProblem) and (kind.local or kind.name.startswith("NEWT")):
        raise ParameterError(f"{kind.value} needs the model problem, frozen levels support "
                             "global sweeps only")
    if kind in (SmootherKind.NEWT_I, SmootherKind.NEWT_II):
        return newton_sweep(phi, problem, "local" if kind.local else "global")
    coeffs = problem.coefficients(phi)
    f = problem.smoother_rhs(phi)
    mode = "local" if kind.local else "global"
    if kind in (SmootherKind.GSLEX_I, SmootherKind.GSLEX_II):
        return gslex_sweep(phi, coeffs, f, mode, problem=problem)
    if kind in (SmootherKind.GSLINE_I, SmootherKind.GSLINE_II):
        return gsline_sweep(phi, coeffs, f, mode, problem=problem)
    casemap = detect_jump_set(coeffs, sigma_threshold)
    if kind is SmootherKind.HYBRID1:
        return hybrid1_sweep(phi, coeffs, f, casemap)
    return hybrid2_sweep(phi, coeffs, f, casemap)
