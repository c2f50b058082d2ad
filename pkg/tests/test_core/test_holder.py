"""Tests for Hölder semi-norms and rate fits."""

import numpy as np
import pytest

from blowuplab.core.elliptic import Grid1D
from blowuplab.core.exceptions import HolderError, RateFitError
from blowuplab.core.holder import (
    SeminormSeries,
    expected_rate,
    fit_blowup_rate,
    fit_window_indices,
    holder_seminorm,
    rate_tolerance,
    window_nodes,
)


@pytest.mark.parametrize(
    "alpha, rate",
    [(0.5, 0.0), (0.6, 0.0), (0.7, -0.25), (0.8, -0.5), (1.0, -1.0)],
)
def test_expected_rate(alpha, rate):
    assert expected_rate(alpha) == pytest.approx(rate)


def test_rate_tolerance():
    assert rate_tolerance(0.6) == 0.1
    assert rate_tolerance(0.8) == 0.15


class TestSeminorm:
    def test_power_cusp(self):
        # [|x|^a]_{C^a} = 1, attained by pairs through the origin
        grid = Grid1D.symmetric(1.0, 401)
        alpha = 0.7
        field = np.abs(grid.x) ** alpha
        value = holder_seminorm(field, grid, alpha, (-0.5, 0.5))
        assert value == pytest.approx(1.0, abs=1e-9)

    def test_lipschitz_of_linear(self):
        grid = Grid1D.symmetric(2.0, 201)
        value = holder_seminorm(3.0 * grid.x, grid, 1.0, (-1.0, 1.0))
        assert value == pytest.approx(3.0)

    def test_subsampling_keeps_anchor(self):
        grid = Grid1D.symmetric(1.0, 5001)
        field = np.abs(grid.x - grid.x[2503]) ** 0.6
        full = holder_seminorm(field, grid, 0.6, (-1.0, 1.0), max_nodes=6000)
        sub = holder_seminorm(
            field, grid, 0.6, (-1.0, 1.0), anchor=float(grid.x[2503]), max_nodes=500
        )
        assert sub == pytest.approx(full, rel=1e-9)

    def test_subsampling_stays_within_node_cap(self):
        # stride 12 leaves exactly 417 nodes and the anchor is not one of them
        grid = Grid1D.symmetric(1.0, 5001)
        idx = window_nodes(grid, (-1.0, 1.0), anchor=float(grid.x[2503]), max_nodes=417)
        assert idx.size <= 417
        assert 2503 in idx
        assert np.all(np.diff(idx) > 0)

    def test_small_window_is_not_subsampled(self):
        grid = Grid1D.symmetric(1.0, 101)
        idx = window_nodes(grid, (-0.51, 0.51), anchor=0.0, max_nodes=500)
        np.testing.assert_array_equal(idx, np.arange(25, 76))

    def test_monotone_in_exponent(self):
        # node distances in a window shorter than 1 shrink under larger powers
        grid = Grid1D.symmetric(1.0, 801)
        field = np.sin(3.0 * grid.x) + np.abs(grid.x) ** 0.7
        values = [holder_seminorm(field, grid, a, (-0.4, 0.4)) for a in (0.6, 0.7, 0.8, 1.0)]
        assert all(lo <= hi for lo, hi in zip(values, values[1:]))

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
    def test_bad_exponent(self, alpha):
        grid = Grid1D.symmetric(1.0, 101)
        with pytest.raises(HolderError):
            holder_seminorm(np.zeros(grid.n), grid, alpha, (-0.5, 0.5))

    def test_window_too_small(self):
        grid = Grid1D.symmetric(1.0, 101)
        with pytest.raises(HolderError):
            holder_seminorm(np.zeros(grid.n), grid, 0.8, (0.0, 0.05))

    def test_series_validation(self):
        with pytest.raises(HolderError):
            SeminormSeries(0.8, (0.0, 1.0), np.array([0.0, 0.0]), np.array([1.0, 2.0]))
        with pytest.raises(HolderError):
            SeminormSeries(0.8, (0.0, 1.0), np.array([0.0, 1.0]), np.array([1.0, -2.0]))

    def test_series_from_fields(self):
        grid = Grid1D.symmetric(1.0, 101)
        fields = [k * grid.x for k in (1.0, 2.0, 4.0)]
        series = SeminormSeries.from_fields(1.0, (-0.5, 0.5), grid, [0.0, 0.1, 0.2], fields)
        np.testing.assert_allclose(series.values, [1.0, 2.0, 4.0])
        assert series.rows(0.5)[0] == pytest.approx((0.0, 0.5, 1.0))


class TestRateFit:
    def _series(self, alpha, slope, t_star=0.0, n=12):
        lead = np.geomspace(0.2, 0.01, n)
        t = t_star - lead
        return SeminormSeries(alpha, (-0.5, 0.5), t, 3.0 * lead**slope)

    @pytest.mark.parametrize("alpha", [0.6, 0.7, 0.8, 1.0])
    def test_recovers_expected_slope(self, alpha):
        fit = fit_blowup_rate(self._series(alpha, expected_rate(alpha)), 0.0)
        assert fit.slope == pytest.approx(expected_rate(alpha), abs=1e-10)
        assert fit.intercept == pytest.approx(np.log(3.0))
        assert fit.passed
        assert fit.n_samples == 12

    def test_flags_wrong_slope(self):
        fit = fit_blowup_rate(self._series(1.0, -0.5), 0.0)
        assert not fit.passed

    def test_too_few_samples(self):
        with pytest.raises(RateFitError):
            fit_blowup_rate(self._series(1.0, -1.0, n=4), 0.0)

    def test_short_lead_span(self):
        lead = np.linspace(0.1, 0.05, 8)
        series = SeminormSeries(1.0, (-0.5, 0.5), -lead, 1.0 / lead)
        with pytest.raises(RateFitError):
            fit_blowup_rate(series, 0.0)

    def test_window_indices(self):
        growth = [1.0, 3.9, 4.0, 8.0, 20.0, 25.0]
        np.testing.assert_array_equal(fit_window_indices(growth), [2, 3, 4])
