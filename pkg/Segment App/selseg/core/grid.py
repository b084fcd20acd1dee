"""Cell-centred grid fields, the grid hierarchy and the intergrid transfers.

Arrays are indexed ``[i, j]`` with ``i`` running along x (image columns) and
``j`` along y (image rows). The domain is the unit square, so a field with
``n x m`` pixels has spacings ``hx = 1/n`` and ``hy = 1/m``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DimensionError, NumericError

logger = logging.getLogger("selseg")


@dataclass(frozen=True)
class Field2D:
    """Scalar field on an ``n x m`` cell-centred grid."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionError(f"expected a non-empty 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NumericError("field contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_image(cls, image: np.ndarray) -> "Field2D":
        """Build a field from a row-major ``(height, width)`` image array."""
        return cls(np.asarray(image, dtype=float).T)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def hx(self) -> float:
        return 1.0 / self.n

    @property
    def hy(self) -> float:
        return 1.0 / self.m

    @property
    def image(self) -> np.ndarray:
        """Row-major ``(height, width)`` view of the values."""
        return self.values.T


FieldLike = Union[Field2D, np.ndarray]


def _as_array(field_: FieldLike) -> np.ndarray:
    if isinstance(field_, Field2D):
        return field_.values
    return np.asarray(field_, dtype=float)


def _like(template: FieldLike, values: np.ndarray) -> FieldLike:
    return Field2D(values) if isinstance(template, Field2D) else values


@dataclass(frozen=True)
class GridHierarchy:
    """Level dimensions from the finest (level 0) to the coarsest."""

    levels: list[tuple[int, int]] = field(default_factory=list)
    coarsest_size: int = 32

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> tuple[int, int]:
        return self.levels[0]

    @property
    def coarsest(self) -> tuple[int, int]:
        return self.levels[-1]


def restrict(fine: FieldLike) -> FieldLike:
    """Full-weighting restriction to the ``(n/2) x (m/2)`` grid.

    Coarse pixel ``(I, J)`` is centred on fine pixel ``(2I+1, 2J+1)``. The
    last coarse row and column use two-point averages across the boundary,
    and the corner averages both rules.
    """
    v = _as_array(fine)
    n, m = v.shape
    if n % 2 or m % 2:
        raise DimensionError(f"restriction needs even dimensions, got {n}x{m}")
    nc, mc = n // 2, m // 2
    out = np.empty((nc, mc))

    a = 0.25 * v[0:n - 2:2] + 0.5 * v[1:n - 1:2] + 0.25 * v[2:n:2]
    out[:-1, :-1] = 0.25 * a[:, 0:m - 2:2] + 0.5 * a[:, 1:m - 1:2] + 0.25 * a[:, 2:m:2]
    out[:-1, -1] = 0.5 * (v[1:n - 1:2, m - 2] + v[1:n - 1:2, m - 1])
    out[-1, :-1] = 0.5 * (v[n - 2, 1:m - 1:2] + v[n - 1, 1:m - 1:2])
    out[-1, -1] = 0.25 * (v[n - 1, m - 2] + v[n - 2, m - 1] + 2.0 * v[n - 1, m - 1])
    return _like(fine, out)


def _interpolate_axis0(c: np.ndarray) -> np.ndarray:
    nc = c.shape[0]
    out = np.empty((2 * nc,) + c.shape[1:])
    out[1::2] = c
    out[2::2] = 0.5 * (c[:-1] + c[1:])
    # fine pixel 0 has no coarse neighbour below; replicate
    out[0] = c[0]
    return out


def interpolate(coarse: FieldLike) -> FieldLike:
    """Bilinear interpolation to the ``2n x 2m`` grid.

    Injected pixels ``(2I+1, 2J+1)`` copy the coarse value, pixels between
    two coarse centres take the two-point average and pixels between four
    take the four-point average. The first fine row and column, whose
    stencil would leave the grid, replicate the nearest coarse value.
    """
    c = _as_array(coarse)
    if c.ndim != 2 or c.shape[0] < 2 or c.shape[1] < 2:
        raise DimensionError(f"interpolation needs at least 2x2 coarse pixels, got shape {c.shape}")
    out = _interpolate_axis0(c)
    out = _interpolate_axis0(out.T).T
    return _like(coarse, np.ascontiguousarray(out))


def _level_count(n: int, m: int, coarsest: int) -> int:
    count = 1
    size = min(n, m)
    while size // 2 >= coarsest and size % 2 == 0:
        size //= 2
        count += 1
    return count


def largest_crop(n: int, m: int, coarsest: int = 32) -> tuple[int, int]:
    """Return the largest ``(n', m')`` crop that coarsens down to ``coarsest``."""
    if min(n, m) < coarsest:
        raise DimensionError(f"image {n}x{m} is smaller than the coarsest grid {coarsest}")
    levels = 1
    size = min(n, m)
    while size >= 2 * coarsest:
        size //= 2
        levels += 1
    step = 2 ** (levels - 1)
    return n - n % step, m - m % step


def build_hierarchy(n: int, m: int, coarsest: int = 32) -> GridHierarchy:
    """Return the standard-coarsening level chain of an ``n x m`` grid.

    Raises
    ------
    DimensionError
        If the grid is smaller than ``coarsest`` or cannot be halved as often
        as its size allows; the message names the largest valid crop.
    """
    if coarsest < 2:
        raise DimensionError(f"coarsest size must be at least 2, got {coarsest}")
    if min(n, m) < coarsest:
        raise DimensionError(f"image {n}x{m} is smaller than the coarsest grid {coarsest}")
    crop = largest_crop(n, m, coarsest)
    if crop != (n, m):
        raise DimensionError(f"image {n}x{m} does not coarsen to {coarsest}", suggestion=crop)
    levels = [(n, m)]
    for _ in range(_level_count(n, m, coarsest) - 1):
        n, m = n // 2, m // 2
        levels.append((n, m))
    logger.debug("Grid hierarchy: %s", levels)
    return GridHierarchy(levels=levels, coarsest_size=coarsest)


def crop_to(field_: FieldLike, n: int, m: int) -> FieldLike:
    """Keep the top-left ``n x m`` block."""
    values = _as_array(field_)
    return _like(field_, np.ascontiguousarray(values[:n, :m]))


def downscale(field_: FieldLike, factor: int) -> FieldLike:
    """Block-average by an integer factor."""
    values = _as_array(field_)
    n, m = values.shape
    if factor < 1 or n % factor or m % factor:
        raise DimensionError(f"cannot downscale {n}x{m} by {factor}")
    out = values.reshape(n // factor, factor, m // factor, factor).mean(axis=(1, 3))
    return _like(field_, out)


def upscale(field_: FieldLike, factor: int) -> FieldLike:
    """Replicate every pixel into a ``factor x factor`` block."""
    values = _as_array(field_)
    out = np.repeat(np.repeat(values, factor, axis=0), factor, axis=1)
    return _like(field_, out)
