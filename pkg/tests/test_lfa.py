import numpy as np
import pytest

from selseg.core.errors import ParameterError
from selseg.core.lfa import (
    FrequencyGrid,
    adapted_rate_table,
    amp_adapted,
    amp_lex,
    amp_line,
    frequency_grid,
    lag_smallest_table,
    rate_report,
)
from selseg.core.model import StencilField
from selseg.core.smoothers import SmootherKind, case_lag_set, detect_jump_set
from selseg.core.synthetic import jump_coefficients

# Jump-set pixels sampled from segmentation runs with their line rates
JUMP_ROWS = [
    ((202, 202, 137391, 35), 0.9997),
    ((202, 202, 77788, 35), 0.9995),
    ((209, 220, 5545, 36), 0.9931),
    ((2263, 1802, 78959, 842), 0.9889),
    ((20, 626, 558, 22), 0.9605),
    ((79987, 6659, 168919, 6736), 0.9591),
    ((3228, 105968, 72894, 3203), 0.9551),
    ((7937, 424357, 400718, 27651), 0.9312),
    ((29221, 1426471, 170469, 21920), 0.8756),
    ((321703, 24343, 242663, 32126), 0.8750),
]


@pytest.fixture(scope="module")
def fine_grid():
    return FrequencyGrid(512)


def test_frequency_grid_excludes_low_modes():
    freq = FrequencyGrid(32)
    a1, a2 = freq.alpha1, freq.alpha2
    low = (np.abs(a1) < np.pi / 2) & (np.abs(a2) < np.pi / 2)
    assert not low.any()
    assert freq.contains(-np.pi, 0.0)
    assert freq.contains(np.pi / 2, 0.0)
    assert not freq.contains(-np.pi / 2, 0.0)
    assert len(freq) == 32 * 32 - 16 * 16
    with pytest.raises(ParameterError):
        FrequencyGrid(8)


def test_frequency_grid_is_shared():
    assert frequency_grid(64) is frequency_grid(64)


def test_lex_rate_of_laplacian():
    value, point = amp_lex(1, 1, 1, 1, 4, frequency_grid(256), return_point=True)
    assert value == pytest.approx(0.5, abs=2e-3)
    assert value <= 0.5 + 1e-12
    assert point[0] == pytest.approx(np.pi / 2) or point[1] == pytest.approx(np.pi / 2)


def test_line_rate_of_laplacian():
    assert amp_line(1, 1, 1, 1, 4, frequency_grid(256)) == pytest.approx(5 ** -0.5, abs=2e-3)


def test_no_lagged_coupling_gives_zero_rate():
    assert amp_lex(0, 1, 0, 1, 2) == 0.0


def test_rates_reject_bad_input():
    with pytest.raises(ParameterError):
        amp_lex(1, 1, 1, 1, 0)
    with pytest.raises(ParameterError):
        amp_adapted(1, 1, 1, 1, 4, [])
    with pytest.raises(ParameterError):
        amp_adapted(1, 1, 1, 1, 4, "ABCD")
    with pytest.raises(ParameterError):
        amp_adapted(1, 1, 1, 1, 4, ["E"])


# From the fifth row on the listed rates sit 1.2e-3 to 9.7e-3 below the values
# computed here (0.9617, 0.9611, 0.9575, 0.9344, 0.8853, 0.8800).
@pytest.mark.parametrize("row, expected", JUMP_ROWS)
def test_line_rate_on_jump_pixels(row, expected, fine_grid):
    value = amp_line(*row, sum(row), fine_grid)
    assert value == pytest.approx(expected, abs=1.5e-2)


def test_line_rate_on_strongest_jumps(fine_grid):
    for row, expected in JUMP_ROWS[:4]:
        assert amp_line(*row, sum(row), fine_grid) == pytest.approx(expected, abs=1e-3)


def test_line_rate_converges_in_frequency_samples(fine_grid):
    finer = FrequencyGrid(1024)
    for row, _ in JUMP_ROWS:
        s = sum(row)
        assert abs(amp_line(*row, s, fine_grid) - amp_line(*row, s, finer)) < 1e-3


def test_lagging_smallest_beats_line_smoother(fine_grid):
    table = lag_smallest_table([row for row, _ in JUMP_ROWS], fine_grid)
    assert list(table.columns) == ["A", "B", "C", "D", "S", "smallest", "line",
                                   "lag1", "lag2", "lag3"]
    assert (table["lag1"] < table["line"]).all()
    assert (table["lag2"] >= table["lag1"] - 1e-12).all()
    assert table.loc[0, "smallest"] == "D"


def test_adapted_rate_table_columns():
    table = adapted_rate_table([row for row, _ in JUMP_ROWS[:2]], frequency_grid(64))
    assert len(table) == 2
    assert [f"case_{k}" for k in range(1, 15)] == list(table.columns[-14:])
    assert table.loc[0, "case"] == 8
    assert table.loc[0, "S"] == pytest.approx(sum(JUMP_ROWS[0][0]))
    rates = table[[f"case_{k}" for k in range(1, 15)]].to_numpy()
    assert np.all((rates >= 0) & (rates <= 1 + 1e-12))
    with pytest.raises(ParameterError):
        adapted_rate_table([(1, 2, 3)])


def test_two_lag_cases_reach_one():
    rng = np.random.default_rng(21)
    freq = frequency_grid(32)
    for a, b, c, d in rng.uniform(0.1, 1.0, size=(1000, 4)):
        s = a + b + c + d
        value, point = amp_adapted(a, b, c, d, s, case_lag_set(6), freq, return_point=True)
        assert value == pytest.approx(1.0, abs=1e-9)
        assert point == pytest.approx((-np.pi, 0.0))
        value, point = amp_adapted(a, b, c, d, s, case_lag_set(5), freq, return_point=True)
        assert value == pytest.approx(1.0, abs=1e-9)
        assert point == pytest.approx((0.0, -np.pi))


def test_refining_frequencies_never_lowers_rate():
    rng = np.random.default_rng(22)
    for a, b, c, d in rng.uniform(0.1, 10.0, size=(20, 4)):
        s = a + b + c + d
        coarse = amp_line(a, b, c, d, s, frequency_grid(64))
        fine = amp_line(a, b, c, d, s, frequency_grid(128))
        assert fine >= coarse - 1e-15


@pytest.fixture(scope="module")
def jump_field():
    return jump_coefficients(128, contrast=100.0)


@pytest.fixture(scope="module")
def line_report(jump_field):
    casemap = detect_jump_set(jump_field, 1.5)
    return rate_report(jump_field, SmootherKind.GSLINE_I, casemap, frequency_grid(128))


@pytest.fixture(scope="module")
def hybrid_report(jump_field):
    casemap = detect_jump_set(jump_field, 1.5)
    return rate_report(jump_field, "hybrid2", casemap, frequency_grid(128))


def test_line_smoother_stalls_on_jump_field(line_report):
    report = line_report
    assert report.mu_max > 0.9
    assert report.mu_max_D == pytest.approx(report.mu_max)
    assert report.mu_max_notD == pytest.approx(5 ** -0.5, abs=5e-3)
    assert report.rate_map.shape == (128, 128)
    assert report.above(0.6).sum() > 0


def test_hybrid_smoother_rates_on_jump_field(hybrid_report):
    report = hybrid_report
    assert report.mu_max < 0.6
    assert report.mu_max_notD == pytest.approx(0.5, abs=5e-3)
    assert not report.above(0.6).any()
    table = report.worst_table()
    assert len(table) == 10
    assert table["mu"].is_monotonic_decreasing
    summary = report.summary()
    assert summary["mu_max"] == report.mu_max
    assert len(summary["worst_pixels"][0]) == 7


def test_hybrid_smoother_beats_line_smoother_on_jump_field(line_report, hybrid_report):
    assert hybrid_report.mu_max < line_report.mu_max
    assert hybrid_report.mu_max_D < line_report.mu_max_D


def test_uniform_field_has_no_jump_statistics():
    ones = np.ones((8, 8))
    coeffs = StencilField(ones, ones, ones, ones)
    report = rate_report(coeffs, SmootherKind.GSLEX_I, freq=frequency_grid(32))
    assert report.mu_max_D is None
    assert report.mu_avg_D is None
    assert report.mu_max_notD == pytest.approx(report.mu_max)
    assert not report.has_singular_samples


def test_fixed_lag_override(jump_field):
    report = rate_report(jump_field, SmootherKind.GSLEX_I, freq=frequency_grid(32),
                         lagged=["C"])
    line = rate_report(jump_field, SmootherKind.GSLINE_I, freq=frequency_grid(32))
    np.testing.assert_allclose(report.rate_map.values, line.rate_map.values)
    with pytest.raises(ParameterError):
        rate_report(jump_field, SmootherKind.GSLEX_I, lagged=[])
