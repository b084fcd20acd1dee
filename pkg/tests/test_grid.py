import numpy as np
import pytest

from selseg.core.errors import DimensionError, NumericError
from selseg.core.grid import (
    Field2D,
    build_hierarchy,
    crop_to,
    downscale,
    interpolate,
    largest_crop,
    restrict,
    upscale,
)


def _restrict_oracle(v):
    n, m = v.shape
    nc, mc = n // 2, m // 2
    w = np.array([0.25, 0.5, 0.25])
    out = np.zeros((nc, mc))
    for ci in range(nc):
        for cj in range(mc):
            fi, fj = 2 * ci + 1, 2 * cj + 1
            last_i, last_j = ci == nc - 1, cj == mc - 1
            if last_i and last_j:
                out[ci, cj] = 0.25 * (v[n - 1, m - 2] + v[n - 2, m - 1] + 2 * v[n - 1, m - 1])
            elif last_j:
                out[ci, cj] = 0.5 * (v[fi, m - 2] + v[fi, m - 1])
            elif last_i:
                out[ci, cj] = 0.5 * (v[n - 2, fj] + v[n - 1, fj])
            else:
                for a in range(3):
                    for b in range(3):
                        out[ci, cj] += w[a] * w[b] * v[fi - 1 + a, fj - 1 + b]
    return out


def _axis_weights(p):
    if p % 2:
        return [((p - 1) // 2, 1.0)]
    if p == 0:
        return [(0, 1.0)]
    return [(p // 2 - 1, 0.5), (p // 2, 0.5)]


def _interpolate_oracle(c):
    nc, mc = c.shape
    out = np.zeros((2 * nc, 2 * mc))
    for p in range(2 * nc):
        for q in range(2 * mc):
            for a, wa in _axis_weights(p):
                for b, wb in _axis_weights(q):
                    out[p, q] += wa * wb * c[a, b]
    return out


def test_field_validation():
    with pytest.raises(DimensionError):
        Field2D(np.zeros(4))
    with pytest.raises(DimensionError):
        Field2D(np.zeros((0, 3)))
    with pytest.raises(NumericError):
        Field2D(np.array([[0.0, np.nan]]))


def test_field_spacing_and_layout():
    image = np.arange(6, dtype=float).reshape(2, 3)
    f = Field2D.from_image(image)
    assert f.shape == (3, 2)
    assert f.hx * f.n == pytest.approx(1.0, abs=1e-12)
    assert f.hy * f.m == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(f.image, image)


def test_restrict_constant_and_impulse():
    np.testing.assert_allclose(restrict(np.full((8, 6), 3.5)), 3.5, rtol=0, atol=1e-14)
    v = np.zeros((4, 4))
    v[1, 1] = 16.0
    out = restrict(v)
    assert out.shape == (2, 2)
    assert out[0, 0] == pytest.approx(4.0)


def test_restrict_matches_oracle():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        shape = tuple(2 * rng.integers(1, 7, size=2))
        v = rng.normal(size=shape)
        np.testing.assert_allclose(restrict(v), _restrict_oracle(v), rtol=0, atol=1e-12)


def test_restrict_rejects_odd():
    with pytest.raises(DimensionError):
        restrict(np.zeros((5, 4)))


def test_interpolate_matches_oracle():
    rng = np.random.default_rng(2)
    np.testing.assert_allclose(interpolate(np.array([[0.0, 0.0], [0.0, 4.0]])),
                               _interpolate_oracle(np.array([[0.0, 0.0], [0.0, 4.0]])),
                               rtol=0, atol=1e-12)
    for _ in range(1000):
        shape = tuple(rng.integers(2, 7, size=2))
        c = rng.normal(size=shape)
        out = interpolate(c)
        assert out.shape == (2 * shape[0], 2 * shape[1])
        np.testing.assert_allclose(out, _interpolate_oracle(c), rtol=0, atol=1e-12)


def test_interpolate_needs_two_coarse_pixels():
    for shape in [(1, 4), (4, 1), (1, 1)]:
        with pytest.raises(DimensionError):
            interpolate(np.zeros(shape))
    with pytest.raises(DimensionError):
        build_hierarchy(32, 32, 1)


def test_interpolate_ramp_keeps_injected_values():
    c = np.repeat(np.arange(4, dtype=float)[:, None], 4, axis=1)
    out = interpolate(c)
    np.testing.assert_array_equal(out[1::2, 1::2], c)


def test_transfers_preserve_constants_and_linearity():
    np.testing.assert_allclose(restrict(interpolate(np.full((4, 4), 2.0))), 2.0, atol=1e-14)
    rng = np.random.default_rng(3)
    u, v = rng.normal(size=(8, 8)), rng.normal(size=(8, 8))
    np.testing.assert_allclose(restrict(2 * u - 3 * v), 2 * restrict(u) - 3 * restrict(v), atol=1e-12)
    np.testing.assert_allclose(interpolate(2 * u - 3 * v), 2 * interpolate(u) - 3 * interpolate(v),
                               atol=1e-12)


def test_field_type_is_preserved():
    out = restrict(Field2D(np.ones((4, 4))))
    assert isinstance(out, Field2D)
    assert out.shape == (2, 2)


def test_build_hierarchy():
    h = build_hierarchy(1024, 1024, 32)
    assert h.depth == 6
    assert [n for n, _ in h.levels] == [1024, 512, 256, 128, 64, 32]
    assert build_hierarchy(32, 32, 32).depth == 1
    assert build_hierarchy(96, 64, 32).levels == [(96, 64), (48, 32)]


def test_build_hierarchy_suggests_crop():
    with pytest.raises(DimensionError) as exc:
        build_hierarchy(100, 75, 32)
    assert exc.value.suggestion == (100, 74)
    assert "largest valid crop" in str(exc.value)
    with pytest.raises(DimensionError):
        build_hierarchy(16, 16, 32)


def test_largest_crop_and_crop_to():
    assert largest_crop(300, 260, 32) == (296, 256)
    field = crop_to(Field2D(np.ones((300, 260))), 296, 256)
    assert field.shape == (296, 256)
    assert build_hierarchy(*field.shape, 32).depth == 4


def test_downscale_and_upscale():
    v = np.arange(16, dtype=float).reshape(4, 4)
    small = downscale(v, 2)
    np.testing.assert_allclose(small, [[2.5, 4.5], [10.5, 12.5]])
    np.testing.assert_array_equal(downscale(upscale(small, 2), 2), small)
    with pytest.raises(DimensionError):
        downscale(v, 3)
