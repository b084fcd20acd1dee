"""Synthetic test images with known ground truth."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .grid import Field2D, FieldLike, _as_array
from .model import MarkerSet, StencilField


def _coords(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.arange(n, dtype=float)[:, None], np.arange(m, dtype=float)[None, :]


def disk_mask(n: int, m: int, centre: tuple[float, float], radius: float) -> np.ndarray:
    x, y = _coords(n, m)
    return (x - centre[0]) ** 2 + (y - centre[1]) ** 2 <= radius * radius


def box_mask(n: int, m: int, corner: tuple[int, int], size: tuple[int, int]) -> np.ndarray:
    mask = np.zeros((n, m), dtype=bool)
    mask[corner[0]:corner[0] + size[0], corner[1]:corner[1] + size[1]] = True
    return mask


def _render(masks: list[np.ndarray], shape: tuple[int, int], noise: float,
            seed: int | None) -> Field2D:
    image = np.zeros(shape)
    for mask in masks:
        image[mask] = 1.0
    if noise > 0:
        rng = np.random.default_rng(seed)
        image = np.clip(image + rng.normal(0.0, noise, size=shape), 0.0, 1.0)
    return Field2D(image)


def disk(n: int = 128, radius: float | None = None, *, noise: float = 0.0,
         seed: int | None = 0) -> tuple[Field2D, np.ndarray]:
    """White disk centred on a black ``n x n`` image and its mask."""
    radius = 0.25 * n if radius is None else radius
    centre = (0.5 * n, 0.5 * n)
    truth = disk_mask(n, n, centre, radius)
    return _render([truth], (n, n), noise, seed), truth


def two_blobs(n: int = 128, *, noise: float = 0.0,
              seed: int | None = 0) -> tuple[Field2D, np.ndarray, np.ndarray]:
    """Two equal disks; returns the image, the left (target) and the right mask."""
    radius = 0.15 * n
    left = disk_mask(n, n, (0.3 * n, 0.5 * n), radius)
    right = disk_mask(n, n, (0.72 * n, 0.5 * n), radius)
    return _render([left, right], (n, n), noise, seed), left, right


def two_objects(n: int = 256, *, noise: float = 0.1,
                seed: int | None = 0) -> tuple[Field2D, np.ndarray, np.ndarray]:
    """Noisy disk (target) next to a square; returns image, disk and square masks."""
    target = disk_mask(n, n, (0.3 * n, 0.45 * n), 0.17 * n)
    side = int(0.28 * n)
    other = box_mask(n, n, (int(0.58 * n), int(0.3 * n)), (side, side))
    return _render([target, other], (n, n), noise, seed), target, other


def ring_markers(centre: tuple[float, float], radius: float, count: int = 16) -> MarkerSet:
    """``count`` integer markers on a circle, in order around it."""
    if count < 3:
        raise ParameterError(f"k >= 3 required, got {count} marker(s)")
    angles = 2.0 * np.pi * np.arange(count) / count
    xs = np.rint(centre[0] + radius * np.cos(angles))
    ys = np.rint(centre[1] + radius * np.sin(angles))
    return MarkerSet(list(zip(xs.tolist(), ys.tolist())))


def mask_markers(mask: np.ndarray, count: int = 16, shrink: float = 0.97) -> MarkerSet:
    """Ring markers just inside a roughly round mask."""
    xs, ys = np.nonzero(mask)
    if xs.size == 0:
        raise ParameterError("empty mask")
    centre = (float(xs.mean()), float(ys.mean()))
    radius = np.sqrt(xs.size / np.pi) * shrink
    return ring_markers(centre, radius, count)


def jump_coefficients(n: int = 128, contrast: float = 100.0,
                      region: tuple[slice, slice] | None = None) -> StencilField:
    """Five-point coefficients of ``div(G grad u)`` with a two-valued ``G``.

    ``G`` is ``contrast`` on ``region`` (the centred half-size square by
    default) and 1 elsewhere; face values are arithmetic means.
    """
    if contrast <= 0:
        raise ParameterError(f"contrast must be positive, got {contrast}")
    if region is None:
        region = (slice(n // 4, 3 * n // 4), slice(n // 4, 3 * n // 4))
    big_g = np.ones((n, n))
    big_g[region] = contrast
    padded = np.pad(big_g, 1, mode="edge")
    centre = padded[1:-1, 1:-1]
    return StencilField(
        0.5 * (centre + padded[2:, 1:-1]),
        0.5 * (centre + padded[:-2, 1:-1]),
        0.5 * (centre + padded[1:-1, 2:]),
        0.5 * (centre + padded[1:-1, :-2]),
    )


def dice(a: FieldLike, b: FieldLike) -> float:
    """Overlap ``2|a & b| / (|a| + |b|)`` of two masks (1.0 when both are empty)."""
    x = _as_array(a) > 0.5
    y = _as_array(b) > 0.5
    if x.shape != y.shape:
        raise ParameterError(f"shape mismatch {x.shape} vs {y.shape}")
    total = int(x.sum() + y.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((x & y).sum()) / total
