"""Nonlinear multigrid (FAS) solver and the outer segmentation loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .. import config
from .errors import CoarseSolverError, DivergenceError, ParameterError
from .grid import (
    Field2D,
    FieldLike,
    _as_array,
    build_hierarchy,
    downscale,
    interpolate,
    restrict,
    upscale,
)
from .model import (
    LevelProblem,
    MarkerSet,
    ModelKind,
    ModelParams,
    StencilField,
    apply_operator,
    distance_map,
    edge_detector,
    initial_phi,
    polygon_area,
    region_means,
)
from .smoothers import SmootherKind, gsline_sweep, smooth

logger = logging.getLogger("selseg")

# Consecutive residual increases tolerated by the coarse solver
_COARSE_GROWTH_LIMIT = 10


@dataclass(frozen=True)
class CycleConfig:
    """Shape and stopping rule of the multigrid iteration.

    ``nu1 + nu2 >= 1`` is enforced by :meth:`validate`, which :func:`segment`
    calls; a bare cycle with no smoothing is allowed for testing.
    """

    gamma: int = 1
    nu1: int = 3
    nu2: int = 3
    coarse_iters: int = field(default_factory=lambda: config.COARSE_ITERS)
    smoother: SmootherKind = SmootherKind.HYBRID2
    eta: float = field(default_factory=lambda: config.ETA)
    max_cycles: int = field(default_factory=lambda: config.MAX_CYCLES)
    sigma_jump: float = field(default_factory=lambda: config.SIGMA_JUMP)

    def __post_init__(self) -> None:
        object.__setattr__(self, "smoother", SmootherKind.parse(self.smoother))
        if self.gamma < 1:
            raise ParameterError(f"gamma must be at least 1, got {self.gamma}")
        if self.nu1 < 0 or self.nu2 < 0:
            raise ParameterError("smoothing step counts must be non-negative")
        if self.coarse_iters < 0:
            raise ParameterError(f"coarse_iters must be non-negative, got {self.coarse_iters}")
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if self.max_cycles < 1:
            raise ParameterError(f"max_cycles must be at least 1, got {self.max_cycles}")
        if not self.sigma_jump > 1:
            raise ParameterError(f"sigma_jump must exceed 1, got {self.sigma_jump}")

    def validate(self) -> "CycleConfig":
        if self.nu1 + self.nu2 < 1:
            raise ParameterError("nu1 + nu2 >= 1 required")
        return self


@dataclass
class SolveStats:
    cycles_run: int = 0
    energy_per_cycle: list[float] = field(default_factory=list)
    rel_change_per_cycle: list[float] = field(default_factory=list)
    residual_norm_per_cycle: list[float] = field(default_factory=list)
    wall_time_total: float = 0.0
    phase_times: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    converged: bool = False

    def table(self) -> pd.DataFrame:
        """Per-cycle history, one row per cycle."""
        return pd.DataFrame(
            {
                "cycle": np.arange(1, self.cycles_run + 1),
                "energy": self.energy_per_cycle,
                "rel_change": self.rel_change_per_cycle,
                "residual": self.residual_norm_per_cycle,
            }
        )


@dataclass
class LinearLevel:
    """Frozen five-point problem ``A e + B w + C n + D s - (sum + shift) u = rhs``.

    Coarse levels rediscretise by restricting the coefficients and scaling
    them by 1/4; ``shift`` is a zeroth-order term left unscaled.
    """

    coeffs: StencilField
    rhs_values: np.ndarray
    shift: float = 0.0
    fas_rhs: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.fas_rhs is None:
            self.fas_rhs = np.zeros(self.coeffs.shape)

    @classmethod
    def build(cls, a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray,
              rhs_values: np.ndarray, shift: float = 0.0) -> "LinearLevel":
        stencil = StencilField(a, b, c, d, S=np.asarray(a) + b + c + d + shift)
        return cls(stencil, np.asarray(rhs_values, dtype=float), shift)

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape

    def coefficients(self, phi: np.ndarray) -> StencilField:
        return self.coeffs

    def smoother_rhs(self, phi: np.ndarray) -> np.ndarray:
        return self.rhs_values + self.fas_rhs

    def operator(self, phi: np.ndarray, coeffs: StencilField | None = None) -> np.ndarray:
        return apply_operator(phi, self.coeffs, self.rhs_values)

    def residual(self, phi: np.ndarray) -> np.ndarray:
        return self.fas_rhs - self.operator(phi)

    def with_rhs(self, fas_rhs: np.ndarray) -> "LinearLevel":
        return replace(self, fas_rhs=fas_rhs)

    def coarsened(self) -> "LinearLevel":
        c = self.coeffs
        return LinearLevel.build(restrict(c.A) / 4.0, restrict(c.B) / 4.0, restrict(c.C) / 4.0,
                                 restrict(c.D) / 4.0, restrict(self.rhs_values), self.shift)


def restrict_problem(z: FieldLike, d: FieldLike, g: FieldLike):
    """Image, distance map and edge detector on the next coarser level."""
    return restrict(z), restrict(d), restrict(g)


def level_data(z: FieldLike, d: FieldLike, g: FieldLike, depth: int) -> list[tuple]:
    """``(z, d, g)`` on every level, restricted once."""
    data = [(_as_array(z), _as_array(d), _as_array(g))]
    for _ in range(depth - 1):
        data.append(restrict_problem(*data[-1]))
    return data


def _norm(values: np.ndarray) -> float:
    return float(np.linalg.norm(values))


def coarse_solve(phi: np.ndarray, problem, iters: int | None = None, *,
                 frozen: tuple[StencilField, np.ndarray] | None = None) -> np.ndarray:
    """GSLINE-I sweeps on the coarsest level, coefficients refreshed each sweep.

    ``frozen`` fixes ``(coeffs, f)`` instead, turning the solve linear.

    Raises
    ------
    CoarseSolverError
        When the residual grows over consecutive sweeps or turns non-finite.
    """
    iters = config.COARSE_ITERS if iters is None else iters
    out = np.array(phi, dtype=float, copy=True)
    if iters <= 0:
        return out

    def _residual(values: np.ndarray) -> float:
        if frozen is not None:
            return _norm(apply_operator(values, frozen[0], frozen[1]))
        return _norm(problem.residual(values))

    previous = _residual(out)
    growth = 0
    for sweep in range(iters):
        if frozen is not None:
            coeffs, f = frozen
        else:
            coeffs, f = problem.coefficients(out), problem.smoother_rhs(out)
        out = gsline_sweep(out, coeffs, f)
        current = _residual(out)
        if not np.isfinite(current):
            raise CoarseSolverError(f"coarse solve produced non-finite values at sweep {sweep + 1}")
        growth = growth + 1 if current > previous else 0
        if growth >= _COARSE_GROWTH_LIMIT:
            raise CoarseSolverError(
                f"coarse residual grew over {_COARSE_GROWTH_LIMIT} consecutive sweeps "
                f"(now {current:.3e})"
            )
        previous = current
        if current == 0.0:
            break
    logger.debug("Coarse solve: %d sweeps, residual %.3e", sweep + 1, previous)
    return out


def fas_vcycle(phi: np.ndarray, levels: Sequence, cfg: CycleConfig, level: int = 0) -> np.ndarray:
    """One FAS cycle starting on ``levels[level]``.

    ``levels[level]`` carries the level's right-hand side; the coarser
    entries only provide the discretisation and get their right-hand side
    from the restricted residual.
    """
    problem = levels[level]
    if level == len(levels) - 1:
        return coarse_solve(phi, problem, cfg.coarse_iters)

    for _ in range(cfg.nu1):
        phi = smooth(problem, phi, cfg.smoother, cfg.sigma_jump)

    residual = problem.residual(phi)
    phi_coarse = restrict(phi)
    coarse = levels[level + 1]
    coarse_rhs = coarse.operator(phi_coarse) + restrict(residual)
    coarse = coarse.with_rhs(coarse_rhs)
    sub_levels = list(levels)
    sub_levels[level + 1] = coarse

    solution = phi_coarse
    for _ in range(cfg.gamma):
        solution = fas_vcycle(solution, sub_levels, cfg, level + 1)

    correction = interpolate(solution - phi_coarse)
    if not np.all(np.isfinite(correction)):
        raise DivergenceError(f"non-finite coarse-grid correction on level {level}")
    phi = phi + correction

    for _ in range(cfg.nu2):
        phi = smooth(problem, phi, cfg.smoother, cfg.sigma_jump)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug("Level %d (%dx%d): residual %.3e", level, *problem.shape,
                     _norm(problem.residual(phi)))
    return phi


def _level_problems(data: list[tuple], c1: float, c2: float, area: float,
                    params: ModelParams, kind: ModelKind) -> list[LevelProblem]:
    return [LevelProblem(z, d, g, c1, c2, area, params, kind) for z, d, g in data]


def segment(z: FieldLike, markers: MarkerSet, params: ModelParams | None = None,
            kind: ModelKind | str = ModelKind.RADA_CHEN, cfg: CycleConfig | None = None, *,
            coarsest: int | None = None, phi0: FieldLike | None = None):
    """Selective segmentation of ``z`` around ``markers``.

    Returns ``(phi, mask, stats)`` with ``mask = phi > 0``. The region means
    are refreshed once per cycle; iteration stops when the relative change
    of ``phi`` drops below ``cfg.eta`` or after ``cfg.max_cycles`` cycles.
    """
    params = params or ModelParams()
    kind = ModelKind.parse(kind)
    cfg = (cfg or CycleConfig()).validate()
    coarsest = coarsest or config.COARSEST_SIZE

    start = time.perf_counter()
    image = z if isinstance(z, Field2D) else Field2D(z)
    n, m = image.shape
    markers.check_bounds(n, m)
    hierarchy = build_hierarchy(n, m, coarsest)
    zv = image.values
    d = distance_map(markers, params.sigma, n, m).values
    g = edge_detector(zv, params.beta).values
    phi = initial_phi(markers, n, m).values if phi0 is None else np.array(_as_array(phi0), copy=True)
    area = polygon_area(markers, 1.0 / n, 1.0 / m)
    data = level_data(zv, d, g, hierarchy.depth)
    c1, c2 = region_means(zv, phi, params.eps_heaviside)

    stats = SolveStats()
    stats.phase_times["setup"] = time.perf_counter() - start
    logger.info("Segmenting %dx%d image, %d levels, %s model, %s smoother",
                n, m, hierarchy.depth, kind.value, cfg.smoother.value)

    if abs(c1 - c2) <= 1e-12 * max(1.0, abs(c1), abs(c2)):
        logger.warning("Image has no contrast between regions (c1 = c2 = %.6g)", c1)
        stats.flags.append("no_contrast")
        stats.converged = True
        stats.phase_times["cycles"] = 0.0
        stats.wall_time_total = time.perf_counter() - start
        return Field2D(phi), Field2D(phi > 0), stats

    cycle_start = time.perf_counter()
    for cycle in range(1, cfg.max_cycles + 1):
        levels = _level_problems(data, c1, c2, area, params, kind)
        updated = fas_vcycle(phi, levels, cfg)
        rel = _norm(updated - phi) / max(_norm(phi), np.finfo(float).tiny)
        phi = updated
        c1, c2 = region_means(zv, phi, params.eps_heaviside)

        finest = LevelProblem(zv, d, g, c1, c2, area, params, kind)
        stats.energy_per_cycle.append(finest.energy(phi))
        stats.rel_change_per_cycle.append(rel)
        stats.residual_norm_per_cycle.append(_norm(finest.residual(phi)))
        stats.cycles_run = cycle
        logger.info("cycle %d: energy %.6e, rel change %.3e, c1 %.4f, c2 %.4f",
                    cycle, stats.energy_per_cycle[-1], rel, c1, c2)
        if rel < cfg.eta:
            stats.converged = True
            break
    else:
        stats.flags.append("max_cycles")
        logger.warning("Stopped after %d cycles without reaching eta %.1e", cfg.max_cycles, cfg.eta)

    stats.phase_times["cycles"] = time.perf_counter() - cycle_start
    stats.wall_time_total = time.perf_counter() - start
    return Field2D(phi), Field2D(phi > 0), stats


def tune_smoothing(z: FieldLike, markers: MarkerSet, params: ModelParams | None = None,
                   kind: ModelKind | str = ModelKind.RADA_CHEN, cfg: CycleConfig | None = None,
                   nus: Iterable[int] = range(1, 7), **kwargs) -> pd.DataFrame:
    """Cycles to convergence for ``nu1 = nu2 = nu`` over ``nus``.

    ``nu = 0`` rows are not run and carry ``flagged``. The recommended
    ``nu`` (start of the plateau, the smallest ``nu`` reaching the minimum
    cycle count) is stored in ``attrs["recommended_nu"]``.
    """
    cfg = cfg or CycleConfig()
    records = []
    for nu in nus:
        nu = int(nu)
        if nu < 0:
            raise ParameterError(f"nu must be non-negative, got {nu}")
        if nu == 0:
            logger.warning("nu = 0 violates nu1 + nu2 >= 1, skipping")
            records.append({"nu": 0, "cycles": np.nan, "converged": False, "flagged": True})
            continue
        _, _, stats = segment(z, markers, params, kind, replace(cfg, nu1=nu, nu2=nu), **kwargs)
        records.append({"nu": nu, "cycles": stats.cycles_run, "converged": stats.converged,
                        "flagged": False})
    table = pd.DataFrame.from_records(records, columns=["nu", "cycles", "converged", "flagged"])
    ran = table[~table["flagged"]]
    table["recommended"] = False
    if not ran.empty:
        best = ran["cycles"].min()
        nu_best = int(ran.loc[ran["cycles"] == best, "nu"].min())
        table.loc[table["nu"] == nu_best, "recommended"] = True
        table.attrs["recommended_nu"] = nu_best
    else:
        table.attrs["recommended_nu"] = None
    return table


def sigma_sweep(z: FieldLike, markers: MarkerSet, params: ModelParams | None = None,
                kind: ModelKind | str = ModelKind.RADA_CHEN, cfg: CycleConfig | None = None,
                sigmas: Iterable[float] = (1.5, 2.0, 4.0), **kwargs) -> pd.DataFrame:
    """Energy after each cycle for every jump threshold, one row per sigma."""
    cfg = cfg or CycleConfig()
    rows = {}
    for sigma in sigmas:
        _, _, stats = segment(z, markers, params, kind, replace(cfg, sigma_jump=float(sigma)),
                              **kwargs)
        rows[float(sigma)] = pd.Series(stats.energy_per_cycle,
                                       index=range(1, stats.cycles_run + 1), dtype=float)
    table = pd.DataFrame(rows).T
    table.index.name = "sigma"
    table.columns.name = "cycle"
    return table


def _rescale(values: np.ndarray, size: int) -> tuple[np.ndarray, float]:
    n = values.shape[0]
    if size <= n:
        if n % size:
            raise ParameterError(f"cannot rescale {n} pixels to {size}")
        return downscale(values, n // size), size / n
    if size % n:
        raise ParameterError(f"cannot rescale {n} pixels to {size}")
    return upscale(values, size // n), size / n


def bench(z: FieldLike, markers: MarkerSet, params: ModelParams | None = None,
          kind: ModelKind | str = ModelKind.RADA_CHEN, cfg: CycleConfig | None = None,
          sizes: Sequence[int] = (128, 256, 512), **kwargs) -> pd.DataFrame:
    """CPU time of full solves on ``z`` rescaled to every size in ``sizes``.

    A one-cycle warm-up on the smallest size compiles the kernels before
    timing. ``cpu_ratio`` is the time relative to the previous size.
    """
    cfg = cfg or CycleConfig()
    values = _as_array(z)
    if not sizes:
        raise ParameterError("bench needs at least one size")
    sizes = sorted(int(s) for s in sizes)

    problems = []
    for size in sizes:
        scaled, factor = _rescale(values, size)
        problems.append((size, scaled, markers.scaled(factor)))

    size0, z0, m0 = problems[0]
    segment(z0, m0, params, kind, replace(cfg, max_cycles=1), **kwargs)

    records = []
    previous = None
    for size, scaled, scaled_markers in problems:
        t0 = time.process_time()
        _, _, stats = segment(scaled, scaled_markers, params, kind, cfg, **kwargs)
        cpu = time.process_time() - t0
        ratio = cpu / previous if previous else np.nan
        records.append({"size": size, "pixels": scaled.size, "cycles": stats.cycles_run,
                        "cpu_seconds": cpu, "cpu_ratio": ratio})
        logger.info("bench %d^2: %d cycles, %.3f s CPU", size, stats.cycles_run, cpu)
        previous = cpu
    return pd.DataFrame.from_records(
        records, columns=["size", "pixels", "cycles", "cpu_seconds", "cpu_ratio"])
