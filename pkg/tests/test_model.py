import math

import numpy as np
import pytest

from selseg.core.errors import DegenerateRegionError, ParameterError
from selseg.core.model import (
    LevelProblem,
    MarkerSet,
    ModelKind,
    ModelParams,
    StencilField,
    apply_operator,
    assemble_coefficients,
    delta,
    delta_prime,
    distance_map,
    edge_detector,
    energy,
    heaviside,
    initial_phi,
    polygon_area,
    polygon_mask,
    region_means,
    rhs,
)

SQUARE = MarkerSet([(8, 8), (24, 8), (24, 24), (8, 24)])


def _dense_operator(coeffs):
    n, m = coeffs.shape
    size = n * m
    mat = np.zeros((size, size))
    for i in range(n):
        for j in range(m):
            row = i * m + j
            a, b, c, d, s = coeffs.at(i, j)
            mat[row, row] -= s
            for (p, q), k in (((i + 1, j), a), ((i - 1, j), b), ((i, j + 1), c), ((i, j - 1), d)):
                if 0 <= p < n and 0 <= q < m:
                    mat[row, p * m + q] += k
                else:
                    mat[row, row] += k
    return mat


def test_model_kind_parse():
    assert ModelKind.parse("Rada_Chen") is ModelKind.RADA_CHEN
    assert ModelKind.parse("spencer-chen") is ModelKind.SPENCER_CHEN
    with pytest.raises(ParameterError):
        ModelKind.parse("snake")


def test_params_validation():
    assert ModelParams().lambda1 == pytest.approx(1e-4 * 255 ** 2)
    with pytest.raises(ParameterError):
        ModelParams(mu=-1.0)
    with pytest.raises(ParameterError):
        ModelParams(eps_heaviside=0.0)


def test_marker_set_needs_three_points():
    with pytest.raises(ParameterError, match="k >= 3 required"):
        MarkerSet([(0, 0), (1, 1)])
    with pytest.raises(ParameterError):
        SQUARE.check_bounds(16, 16)
    SQUARE.check_bounds(32, 32)


def test_heaviside_derivatives():
    phi = np.linspace(-3, 3, 13)
    h = 1e-6
    np.testing.assert_allclose(delta(phi, 0.7),
                               (heaviside(phi + h, 0.7) - heaviside(phi - h, 0.7)) / (2 * h),
                               rtol=1e-6)
    np.testing.assert_allclose(delta_prime(phi, 0.7),
                               (delta(phi + h, 0.7) - delta(phi - h, 0.7)) / (2 * h),
                               rtol=1e-5, atol=1e-9)


def test_distance_map_vanishes_at_markers():
    d = distance_map(SQUARE, 0.05, 32, 32).values
    for x, y in SQUARE.points:
        assert d[int(x), int(y)] == pytest.approx(0.0, abs=1e-15)
    assert np.all((d >= 0) & (d <= 1))
    assert d[0, 31] > 0.9


def test_edge_detector():
    g = edge_detector(np.full((16, 16), 0.3), 1e-3).values
    np.testing.assert_array_equal(g, 1.0)
    z = np.zeros((16, 16))
    z[8:, :] = 1.0
    g = edge_detector(z, 1e-3).values
    assert g[7, 5] < g[2, 5]
    assert np.all((g > 0) & (g <= 1))


def test_region_means():
    z = np.zeros((8, 8))
    z[2:6, 2:6] = 1.0
    phi = np.where(z > 0, 100.0, -100.0)
    c1, c2 = region_means(z, phi)
    assert c1 == pytest.approx(1.0, abs=1e-2)
    assert c2 == pytest.approx(0.0, abs=1e-2)
    with pytest.raises(ParameterError):
        region_means(z, phi[:4])


def test_region_means_degenerate():
    with pytest.raises(DegenerateRegionError):
        region_means(np.ones((2, 2)), np.full((2, 2), 1e20), eps=1e-10)


def test_polygon_area_and_mask():
    assert polygon_area(SQUARE) == pytest.approx(256.0)
    assert polygon_area(SQUARE, 1 / 32, 1 / 32) == pytest.approx(0.25)
    with pytest.raises(ParameterError):
        polygon_area(MarkerSet([(0, 0), (1, 1), (2, 2)]))
    mask = polygon_mask(SQUARE, 32, 32)
    assert mask[16, 16]
    assert not mask[2, 2]
    assert 200 <= mask.sum() <= 300


def test_initial_phi():
    phi = initial_phi(SQUARE, 32, 32).values
    assert phi[16, 16] == pytest.approx(1.0)
    assert phi[1, 1] == pytest.approx(-1.0)
    assert np.all(np.abs(phi) <= 1.0 + 1e-12)
    odd = initial_phi(SQUARE, 33, 33).values
    assert set(np.unique(odd)) <= {-1.0, 1.0}


def test_apply_operator_matches_dense_matrix():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        n, m = rng.integers(1, 6, size=2)
        coeffs = StencilField(*rng.uniform(0.1, 2.0, size=(4, n, m)))
        phi = rng.normal(size=(n, m))
        f = rng.normal(size=(n, m))
        expected = (_dense_operator(coeffs) @ phi.ravel() - f.ravel()).reshape(n, m)
        np.testing.assert_allclose(apply_operator(phi, coeffs, f), expected, rtol=0, atol=1e-10)


@pytest.mark.parametrize("kind", list(ModelKind))
def test_assemble_coefficients(kind):
    rng = np.random.default_rng(5)
    z = rng.uniform(size=(16, 16))
    phi = initial_phi(SQUARE.scaled(0.5), 16, 16).values
    params = ModelParams()
    d = distance_map(SQUARE.scaled(0.5), params.sigma, 16, 16)
    g = edge_detector(z, params.beta)
    coeffs = assemble_coefficients(phi, d, g, params, kind)
    assert coeffs.shape == (16, 16)
    for name in "ABCD":
        assert np.all(getattr(coeffs, name) >= 0)
    np.testing.assert_allclose(coeffs.S, coeffs.A + coeffs.B + coeffs.C + coeffs.D)


def _pixel_coefficients(phi, weight, i, j, params):
    n, m = phi.shape
    hx, hy = 1.0 / n, 1.0 / m

    def big_g(p, q):
        p, q = min(max(p, 0), n - 1), min(max(q, 0), m - 1)
        gx = (phi[min(p + 1, n - 1), q] - phi[max(p - 1, 0), q]) / (2 * hx)
        gy = (phi[p, min(q + 1, m - 1)] - phi[p, max(q - 1, 0)]) / (2 * hy)
        return weight[p, q] / math.sqrt(gx * gx + gy * gy + params.eps_grad ** 2)

    eps = params.eps_heaviside
    scale = params.mu * eps / (math.pi * (eps * eps + phi[i, j] ** 2))
    centre = big_g(i, j)
    return (scale * (centre + big_g(i + 1, j)) / (2 * hx * hx),
            scale * (centre + big_g(i - 1, j)) / (2 * hx * hx),
            scale * (centre + big_g(i, j + 1)) / (2 * hy * hy),
            scale * (centre + big_g(i, j - 1)) / (2 * hy * hy))


@pytest.mark.parametrize("kind", list(ModelKind))
def test_assemble_coefficients_pixel_by_pixel(kind):
    rng = np.random.default_rng(40)
    params = ModelParams(mu=0.7)
    for _ in range(20):
        phi = rng.normal(size=(4, 4))
        d = rng.uniform(0.1, 1.0, size=(4, 4))
        g = rng.uniform(0.1, 1.0, size=(4, 4))
        coeffs = assemble_coefficients(phi, d, g, params, kind)
        weight = d * g if kind is ModelKind.RADA_CHEN else g
        for i in range(4):
            for j in range(4):
                expected = _pixel_coefficients(phi, weight, i, j, params)
                np.testing.assert_allclose(coeffs.at(i, j)[:4], expected, rtol=1e-12)
                assert coeffs.S[i, j] == pytest.approx(sum(coeffs.at(i, j)[:4]), rel=1e-15)


def test_assemble_coefficients_without_regularisation():
    rng = np.random.default_rng(41)
    phi = rng.normal(size=(8, 8))
    ones = np.ones((8, 8))
    coeffs = assemble_coefficients(phi, ones, ones, ModelParams(mu=0.0), ModelKind.RADA_CHEN)
    for name in "ABCDS":
        np.testing.assert_array_equal(getattr(coeffs, name), 0.0)


def test_assemble_coefficients_on_ramp_are_symmetric():
    n = 12
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    phi = 0.3 * i + 0.7 * j - 4.0
    ones = np.ones((n, n))
    coeffs = assemble_coefficients(phi, ones, ones, ModelParams(), ModelKind.SPENCER_CHEN)
    inner = (slice(2, -2), slice(2, -2))
    np.testing.assert_allclose(coeffs.A[inner], coeffs.B[inner], rtol=1e-12)
    np.testing.assert_allclose(coeffs.C[inner], coeffs.D[inner], rtol=1e-12)


@pytest.mark.parametrize("kind", list(ModelKind))
def test_rhs_vanishes_without_data_weights(kind):
    rng = np.random.default_rng(42)
    params = ModelParams(lambda1=0.0, lambda2=0.0, nu=0.0, theta=0.0)
    f = rhs(rng.normal(size=(8, 8)), rng.uniform(size=(8, 8)), rng.uniform(size=(8, 8)),
            0.7, 0.2, params, kind, area_target=0.3)
    np.testing.assert_array_equal(f, 0.0)


def test_rada_chen_area_bracket_saturates():
    phi = np.full((8, 8), 1e8)
    params = ModelParams(lambda1=0.0, lambda2=0.0, nu=2.0)
    f = rhs(phi, np.zeros((8, 8)), np.ones((8, 8)), 0.0, 0.0, params, ModelKind.RADA_CHEN,
            area_target=0.25)
    np.testing.assert_allclose(f / delta(phi), 1.5 * params.nu, rtol=1e-6)


def test_spencer_chen_rhs_pixel_by_pixel():
    z = np.array([[0.1, 0.9], [0.4, 0.6]])
    d = np.array([[0.0, 0.5], [0.25, 1.0]])
    phi = np.array([[2.0, -1.0], [0.0, 0.5]])
    params = ModelParams(lambda1=3.0, lambda2=2.0, theta=1.5, eps_heaviside=0.8)
    c1, c2 = 0.7, 0.2
    f = rhs(phi, z, d, c1, c2, params, ModelKind.SPENCER_CHEN)
    for i in range(2):
        for j in range(2):
            dl = 0.8 / (math.pi * (0.8 ** 2 + phi[i, j] ** 2))
            bracket = 3.0 * (z[i, j] - c1) ** 2 - 2.0 * (z[i, j] - c2) ** 2 + 1.5 * d[i, j]
            assert f[i, j] == pytest.approx(dl * bracket, rel=1e-12, abs=1e-15)


def test_rada_chen_energy_of_flat_level_set():
    n = 16
    z = np.full((n, n), 0.4)
    ones = np.ones((n, n))
    params = ModelParams(nu=2.0)
    value = energy(np.zeros((n, n)), z, ones, ones, 0.4, 0.4, params, ModelKind.RADA_CHEN,
                   area_target=0.3)
    # only the eps_grad floor of the length term survives
    assert value == pytest.approx(params.nu * ((0.5 - 0.3) ** 2 + (0.5 - 0.7) ** 2), abs=1e-6)
    off = ModelParams(mu=0.0, lambda1=0.0, lambda2=0.0, nu=0.0, theta=0.0)
    for kind in ModelKind:
        assert energy(np.zeros((n, n)), z, ones, ones, 0.4, 0.4, off, kind, 0.3) == 0.0


def test_level_problem_operator_and_rhs():
    rng = np.random.default_rng(6)
    n = 16
    z = rng.uniform(size=(n, n))
    markers = SQUARE.scaled(0.5)
    params = ModelParams()
    d = distance_map(markers, params.sigma, n, n).values
    g = edge_detector(z, params.beta).values
    phi = initial_phi(markers, n, n).values
    area = polygon_area(markers, 1 / n, 1 / n)
    for kind in ModelKind:
        problem = LevelProblem(z, d, g, 0.6, 0.3, area, params, kind)
        coeffs = assemble_coefficients(phi, d, g, params, kind)
        f = rhs(phi, z, d, 0.6, 0.3, params, kind, area)
        np.testing.assert_allclose(problem.model_rhs(phi), f, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(problem.operator(phi), apply_operator(phi, coeffs, f),
                                   rtol=1e-12, atol=1e-9)
        np.testing.assert_allclose(problem.residual(phi), -problem.operator(phi))
        assert problem.energy(phi) == pytest.approx(
            energy(phi, z, d, g, 0.6, 0.3, params, kind, area))


def test_level_problem_area_terms():
    n = 16
    z = np.full((n, n), 0.5)
    problem = LevelProblem(z, np.ones((n, n)), np.ones((n, n)), 0.6, 0.3, 0.2,
                           ModelParams(), ModelKind.RADA_CHEN)
    assert problem.shape == (n, n)
    assert problem.area_term(np.zeros((n, n))) == pytest.approx(2.0 * (0.5 - 0.2))
    assert problem.two_nu == 2.0
    sc = LevelProblem(z, np.ones((n, n)), np.ones((n, n)), 0.6, 0.3, 0.2,
                      ModelParams(), ModelKind.SPENCER_CHEN)
    assert sc.two_nu == 0.0
    assert sc.area_term(np.zeros((n, n))) == 0.0
