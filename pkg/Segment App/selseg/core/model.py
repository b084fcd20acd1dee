"""Assembly of the Rada-Chen and Spencer-Chen selective segmentation models.

Both models share the Chan-Vese fitting terms and a curvature term weighted
by an edge detector. Rada-Chen multiplies the curvature weight by a marker
distance map and adds an area constraint; Spencer-Chen keeps the distance
map as a standalone penalty.

The discrete equation at every pixel is::

    A phi[i+1,j] + B phi[i-1,j] + C phi[i,j+1] + D phi[i,j-1] - S phi[i,j] = f

with Neumann boundaries (mirrored ghost cells).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateRegionError, NumericError, ParameterError
from .grid import Field2D, FieldLike, _as_array, interpolate, restrict

logger = logging.getLogger("selseg")

# lambda = 1e-4 on 8-bit intensities, rescaled for intensities in [0, 1]
_DEFAULT_LAMBDA = 1e-4 * 255.0 ** 2


class ModelKind(str, enum.Enum):
    RADA_CHEN = "rada-chen"
    SPENCER_CHEN = "spencer-chen"

    @classmethod
    def parse(cls, value: "str | ModelKind") -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("_", "-"))
        except ValueError:
            raise ParameterError(f"unknown model: {value}") from None


@dataclass(frozen=True)
class ModelParams:
    """Weights of the segmentation functional."""

    mu: float = 0.5
    lambda1: float = _DEFAULT_LAMBDA
    lambda2: float = _DEFAULT_LAMBDA
    nu: float = 1.0
    theta: float = 1.0
    beta: float = 1e-3
    sigma: float = 0.05
    eps_heaviside: float = 1.0
    eps_grad: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("mu", "lambda1", "lambda2", "nu", "theta", "beta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ParameterError(f"{name} must be finite and non-negative, got {value}")
        for name in ("sigma", "eps_heaviside", "eps_grad"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class MarkerSet:
    """User selected points ``(x, y)`` in pixel coordinates."""

    points: tuple[tuple[float, float], ...]

    def __init__(self, points: Sequence[Sequence[float]]) -> None:
        pts = tuple((float(p[0]), float(p[1])) for p in points)
        if len(pts) < 3:
            raise ParameterError(f"k >= 3 required, got {len(pts)} marker(s)")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def xs(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def ys(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def check_bounds(self, n: int, m: int) -> None:
        for k, (x, y) in enumerate(self.points):
            if not (0 <= x <= n - 1 and 0 <= y <= m - 1):
                raise ParameterError(f"marker {k} at ({x:g}, {y:g}) lies outside the {n}x{m} image")

    def scaled(self, factor: float) -> "MarkerSet":
        return MarkerSet([(x * factor, y * factor) for x, y in self.points])


@dataclass
class StencilField:
    """Per-pixel coefficients of the five-point scheme."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    S: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        for name in ("A", "B", "C", "D"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=float))
        if self.S is None:
            self.S = self.A + self.B + self.C + self.D
        else:
            self.S = np.ascontiguousarray(self.S, dtype=float)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def at(self, i: int, j: int) -> tuple[float, float, float, float, float]:
        return (
            float(self.A[i, j]),
            float(self.B[i, j]),
            float(self.C[i, j]),
            float(self.D[i, j]),
            float(self.S[i, j]),
        )

    def stacked(self) -> np.ndarray:
        """Coefficients as an ``(n, m, 4)`` array in the order A, B, C, D."""
        return np.stack([self.A, self.B, self.C, self.D], axis=-1)


# -- regularised step function ------------------------------------------------

def heaviside(phi, eps: float = 1.0):
    """Smoothed Heaviside ``1/2 + arctan(phi/eps)/pi``."""
    return 0.5 + np.arctan(np.asarray(phi, dtype=float) / eps) / np.pi


def delta(phi, eps: float = 1.0):
    """Derivative of :func:`heaviside`."""
    phi = np.asarray(phi, dtype=float)
    return eps / (np.pi * (eps * eps + phi * phi))


def delta_prime(phi, eps: float = 1.0):
    """Derivative of :func:`delta`."""
    phi = np.asarray(phi, dtype=float)
    t = eps * eps + phi * phi
    return -2.0 * eps * phi / (np.pi * t * t)


# -- data terms ---------------------------------------------------------------

def distance_map(markers: MarkerSet, sigma: float, n: int, m: int) -> Field2D:
    """Product of Gaussian notches centred on the markers, zero at each marker."""
    if markers is None or len(markers) == 0:
        raise ParameterError("distance map needs at least one marker")
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    x = np.arange(n, dtype=float)[:, None] / n
    y = np.arange(m, dtype=float)[None, :] / m
    d = np.ones((n, m))
    two_s2 = 2.0 * sigma * sigma
    for mx, my in markers.points:
        d *= 1.0 - np.exp(-((mx / n - x) ** 2) / two_s2) * np.exp(-((my / m - y) ** 2) / two_s2)
    return Field2D(d)


def edge_detector(z: FieldLike, beta: float) -> Field2D:
    """``g = 1/(1 + beta |grad z|^2)`` with central differences."""
    values = _as_array(z)
    n, m = values.shape
    grad_sq = np.zeros_like(values)
    if n > 1:
        grad_sq += np.gradient(values, 1.0 / n, axis=0) ** 2
    if m > 1:
        grad_sq += np.gradient(values, 1.0 / m, axis=1) ** 2
    return Field2D(1.0 / (1.0 + beta * grad_sq))


def region_means(z: FieldLike, phi: FieldLike, eps: float = 1.0) -> tuple[float, float]:
    """Average intensities inside (``phi > 0``) and outside the contour."""
    zv, pv = _as_array(z), _as_array(phi)
    if zv.shape != pv.shape:
        raise ParameterError(f"shape mismatch {zv.shape} vs {pv.shape}")
    h = heaviside(pv, eps)
    inside = h.sum()
    outside = (1.0 - h).sum()
    if inside < 1e-12 or outside < 1e-12:
        raise DegenerateRegionError(
            f"degenerate region weights (inside {inside:.3g}, outside {outside:.3g})"
        )
    c1 = float((zv * h).sum() / inside)
    c2 = float((zv * (1.0 - h)).sum() / outside)
    lo, hi = float(zv.min()), float(zv.max())
    return min(max(c1, lo), hi), min(max(c2, lo), hi)


def polygon_area(markers: MarkerSet, hx: float = 1.0, hy: float = 1.0) -> float:
    """Shoelace area of the marker polygon, coordinates scaled by ``hx``, ``hy``."""
    xs = markers.xs * hx
    ys = markers.ys * hy
    area = 0.5 * abs(float(np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1))))
    if area < 1e-12:
        raise ParameterError("marker polygon is degenerate (collinear points)")
    return area


def polygon_mask(markers: MarkerSet, n: int, m: int) -> np.ndarray:
    """Boolean ``(n, m)`` mask of pixel centres inside the marker polygon."""
    px = np.arange(n, dtype=float)[:, None]
    py = np.arange(m, dtype=float)[None, :]
    inside = np.zeros((n, m), dtype=bool)
    xs, ys = markers.xs, markers.ys
    k = len(xs)
    for a in range(k):
        b = (a + 1) % k
        x0, y0, x1, y1 = xs[a], ys[a], xs[b], ys[b]
        if y0 == y1:
            continue
        crosses = (y0 > py) != (y1 > py)
        x_cross = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < x_cross)
    return inside


def initial_phi(markers: MarkerSet, n: int, m: int) -> Field2D:
    """``+1`` inside the marker polygon, ``-1`` outside, smoothed once."""
    phi = np.where(polygon_mask(markers, n, m), 1.0, -1.0)
    if n % 2 == 0 and m % 2 == 0 and min(n, m) >= 4:
        phi = interpolate(restrict(phi))
    else:
        logger.debug("Skipping initial smoothing on %dx%d grid", n, m)
    return Field2D(phi)


# -- discrete operator --------------------------------------------------------

def _mirror(values: np.ndarray) -> np.ndarray:
    return np.pad(values, 1, mode="edge")


def gradient_norm(phi: np.ndarray, hx: float, hy: float, eps_grad: float) -> np.ndarray:
    """Regularised ``|grad phi|`` by central differences with mirrored ghosts."""
    p = _mirror(phi)
    gx = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2.0 * hx)
    gy = (p[1:-1, 2:] - p[1:-1, :-2]) / (2.0 * hy)
    return np.sqrt(gx * gx + gy * gy + eps_grad * eps_grad)


def curvature_weight(d: np.ndarray, g: np.ndarray, kind: ModelKind) -> np.ndarray:
    """Numerator of ``G``: ``d*g`` for Rada-Chen, ``g`` for Spencer-Chen."""
    if ModelKind.parse(kind) is ModelKind.RADA_CHEN:
        return d * g
    return np.array(g, dtype=float, copy=True)


def _assemble(phi: np.ndarray, weight: np.ndarray, mu: float, eps: float,
              eps_grad: float) -> StencilField:
    n, m = phi.shape
    hx, hy = 1.0 / n, 1.0 / m
    big_g = _mirror(weight / gradient_norm(phi, hx, hy, eps_grad))
    centre = big_g[1:-1, 1:-1]
    scale = mu * delta(phi, eps)
    a = scale * 0.5 * (centre + big_g[2:, 1:-1]) / (hx * hx)
    b = scale * 0.5 * (centre + big_g[:-2, 1:-1]) / (hx * hx)
    c = scale * 0.5 * (centre + big_g[1:-1, 2:]) / (hy * hy)
    d = scale * 0.5 * (centre + big_g[1:-1, :-2]) / (hy * hy)
    return StencilField(a, b, c, d)


def assemble_coefficients(phi: FieldLike, d: FieldLike, g: FieldLike,
                          params: ModelParams, kind: ModelKind) -> StencilField:
    """Five-point coefficients ``A, B, C, D, S`` frozen at ``phi``."""
    pv = _as_array(phi)
    if not np.all(np.isfinite(pv)):
        raise NumericError("level set contains non-finite values")
    weight = curvature_weight(_as_array(d), _as_array(g), ModelKind.parse(kind))
    return _assemble(pv, weight, params.mu, params.eps_heaviside, params.eps_grad)


def fitting_term(z: np.ndarray, c1: float, c2: float, params: ModelParams) -> np.ndarray:
    return params.lambda1 * (z - c1) ** 2 - params.lambda2 * (z - c2) ** 2


def area_term(phi: np.ndarray, area_target: float, params: ModelParams) -> float:
    """``2 nu (hx hy sum H(phi) - A1)``, the Rada-Chen area bracket."""
    n, m = phi.shape
    inside = float(heaviside(phi, params.eps_heaviside).sum()) / (n * m)
    return 2.0 * params.nu * (inside - area_target)


def rhs(phi: FieldLike, z: FieldLike, d: FieldLike, c1: float, c2: float,
        params: ModelParams, kind: ModelKind, area_target: float = 0.0) -> np.ndarray:
    """Model right-hand side ``f`` at ``phi``.

    ``area_target`` is the marker polygon area and only enters Rada-Chen.
    """
    pv, zv, dv = _as_array(phi), _as_array(z), _as_array(d)
    bracket = fitting_term(zv, c1, c2, params)
    if ModelKind.parse(kind) is ModelKind.RADA_CHEN:
        bracket = bracket + area_term(pv, area_target, params)
    else:
        bracket = bracket + params.theta * dv
    return delta(pv, params.eps_heaviside) * bracket


def apply_operator(phi: FieldLike, coeffs: StencilField, rhs_field: FieldLike) -> np.ndarray:
    """``A phi_E + B phi_W + C phi_N + D phi_S - S phi - f`` with mirrored ghosts."""
    pv = _as_array(phi)
    p = _mirror(pv)
    out = (
        coeffs.A * p[2:, 1:-1]
        + coeffs.B * p[:-2, 1:-1]
        + coeffs.C * p[1:-1, 2:]
        + coeffs.D * p[1:-1, :-2]
        - coeffs.S * pv
    )
    return out - _as_array(rhs_field)


def energy(phi: FieldLike, z: FieldLike, d: FieldLike, g: FieldLike, c1: float, c2: float,
           params: ModelParams, kind: ModelKind, area_target: float = 0.0) -> float:
    """Discrete value of the model functional."""
    pv, zv, dv, gv = _as_array(phi), _as_array(z), _as_array(d), _as_array(g)
    n, m = pv.shape
    cell = 1.0 / (n * m)
    kind = ModelKind.parse(kind)
    eps = params.eps_heaviside
    h = heaviside(pv, eps)
    grad_h = delta(pv, eps) * gradient_norm(pv, 1.0 / n, 1.0 / m, params.eps_grad)
    weight = curvature_weight(dv, gv, kind)
    total = params.mu * float((weight * grad_h).sum()) * cell
    total += params.lambda1 * float(((zv - c1) ** 2 * h).sum()) * cell
    total += params.lambda2 * float(((zv - c2) ** 2 * (1.0 - h)).sum()) * cell
    if kind is ModelKind.RADA_CHEN:
        inside = float(h.sum()) * cell
        outside = float((1.0 - h).sum()) * cell
        total += params.nu * ((inside - area_target) ** 2 + (outside - (1.0 - area_target)) ** 2)
    else:
        total += params.theta * float((dv * h).sum()) * cell
    return total


@dataclass
class LevelProblem:
    """Data of the nonlinear equations on one grid level.

    ``fas_rhs`` is the full-approximation right-hand side (zero on the
    finest grid); the level equation reads ``operator(phi) = fas_rhs``.
    """

    z: np.ndarray
    d: np.ndarray
    g: np.ndarray
    c1: float
    c2: float
    area_target: float
    params: ModelParams
    kind: ModelKind
    fas_rhs: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.kind = ModelKind.parse(self.kind)
        if self.fas_rhs is None:
            self.fas_rhs = np.zeros_like(self.z, dtype=float)
        self.weight = curvature_weight(self.d, self.g, self.kind)
        fit = fitting_term(self.z, self.c1, self.c2, self.params)
        if self.kind is ModelKind.SPENCER_CHEN:
            fit = fit + self.params.theta * self.d
        self.fit = np.ascontiguousarray(fit)

    @property
    def shape(self) -> tuple[int, int]:
        return self.z.shape

    @property
    def hx(self) -> float:
        return 1.0 / self.z.shape[0]

    @property
    def hy(self) -> float:
        return 1.0 / self.z.shape[1]

    @property
    def two_nu(self) -> float:
        return 2.0 * self.params.nu if self.kind is ModelKind.RADA_CHEN else 0.0

    def area_term(self, phi: np.ndarray) -> float:
        if self.kind is ModelKind.RADA_CHEN:
            return area_term(phi, self.area_target, self.params)
        return 0.0

    def bracket(self, phi: np.ndarray) -> np.ndarray:
        return self.fit + self.area_term(phi)

    def coefficients(self, phi: np.ndarray) -> StencilField:
        if not np.all(np.isfinite(phi)):
            raise NumericError("level set contains non-finite values")
        p = self.params
        return _assemble(phi, self.weight, p.mu, p.eps_heaviside, p.eps_grad)

    def model_rhs(self, phi: np.ndarray) -> np.ndarray:
        return delta(phi, self.params.eps_heaviside) * self.bracket(phi)

    def smoother_rhs(self, phi: np.ndarray) -> np.ndarray:
        """``f`` seen by the relaxation: model part plus the FAS right-hand side."""
        return delta(phi, self.params.eps_heaviside) * self.bracket(phi) + self.fas_rhs

    def operator(self, phi: np.ndarray, coeffs: StencilField | None = None) -> np.ndarray:
        if coeffs is None:
            coeffs = self.coefficients(phi)
        return apply_operator(phi, coeffs, self.model_rhs(phi))

    def residual(self, phi: np.ndarray) -> np.ndarray:
        return self.fas_rhs - self.operator(phi)

    def with_rhs(self, fas_rhs: np.ndarray) -> "LevelProblem":
        return replace(self, fas_rhs=fas_rhs)

    def energy(self, phi: np.ndarray) -> float:
        return energy(phi, self.z, self.d, self.g, self.c1, self.c2,
                      self.params, self.kind, self.area_target)
