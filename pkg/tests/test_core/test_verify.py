"""Tests for the profile inequality checks and the bootstrap monitors."""

import math

import numpy as np
import pytest

from blowuplab.core.elliptic import Grid1D
from blowuplab.core.pde import PhysState, run
from blowuplab.core.profile import profile_eval, rescale_profile
from blowuplab.core.selfsim import RescaledSnapshot, default_y_nodes
from blowuplab.core.verify import (
    check_profile_inequalities,
    check_profile_table,
    log_grid,
    monitor_bootstrap,
    monitor_run,
    tail_integral,
)
from blowuplab.schemas import ModulationSample, SimConfig


def exact_rescaled(profile, s, growth=1.0, shift=0.0):
    """Rescaled snapshot that coincides with the profile (plus a slope shift)."""
    y = default_y_nodes()
    y = y[np.abs(y) <= 1e4]
    W, W_y, W_yy = profile_eval(profile, y)
    lead = math.exp(-s)
    return RescaledSnapshot(
        model="rb",
        t=-lead,
        s=s,
        tau=0.0,
        kappa=0.0,
        xi=0.0,
        tau_dot=0.0,
        kappa_dot=0.0,
        xi_dot=0.0,
        y=y,
        W=W,
        W_y=W_y + shift,
        W_yy=W_yy,
        W_yyy=np.full_like(y, 256.0),
        Q_y=np.zeros_like(y),
        growth=growth,
    )


class TestTailIntegral:
    def test_closed_form(self):
        a = np.array([0.0, 1e-4, 0.5, 1.0, 10.0, 1e3, 1e6, 1e8])
        u = a**0.2
        exact = 5.0 * (u**3 / 3.0 - u + np.arctan(u))
        np.testing.assert_allclose(tail_integral(a), exact, rtol=1e-9, atol=1e-14)

    def test_empty_and_zero(self):
        np.testing.assert_array_equal(tail_integral(np.array([0.0, 0.0])), [0.0, 0.0])

    def test_log_grid(self):
        y = log_grid(1e-3, 1e3, 50)
        assert y.size == 100
        assert y[0] == pytest.approx(-1e3) and y[-1] == pytest.approx(1e3)
        assert np.all(np.diff(y) > 0.0)


class TestProfileChecks:
    def test_inequalities_hold(self, unit_profile):
        report = check_profile_inequalities(unit_profile)
        assert report.passed, [r.check_id for r in report.failures()]
        for check_id in (
            "slope_gap",
            "damping_lower",
            "damping_wide",
            "curvature_delta",
            "tail_integral",
            "separation",
            "Wpp_sign",
        ):
            assert report.get(check_id) is not None, check_id

    def test_curvature_delta_is_admissible(self, unit_profile):
        report = check_profile_inequalities(unit_profile)
        delta = report.parameters["delta"]
        assert delta is not None and 0.0 <= delta < 1.0

    def test_separation_constant(self, unit_profile):
        report = check_profile_inequalities(unit_profile)
        # sup |y|^{2/5}|W̄'| is the far-field constant 50^{-1/5}
        assert report.parameters["sup_y25_wp"] == pytest.approx(50.0 ** (-0.2), rel=0.02)

    def test_unit_table_checks(self, unit_profile):
        report = check_profile_table(unit_profile)
        assert report.passed, [r.check_id for r in report.failures()]
        assert report.parameters["beta"] == 1.0

    def test_rescaled_table_checks(self, unit_profile):
        report = check_profile_table(rescale_profile(unit_profile, 3.0))
        assert report.get("wppp0").passed
        assert report.get("far_field").passed


class TestBootstrapMonitors:
    def _modulation(self, n=5):
        return [
            ModulationSample(t=-0.1 + 0.01 * i, tau=0.0, kappa=0.0, xi=0.0, tau_dot=0.0,
                             kappa_dot=0.0, xi_dot=0.0)
            for i in range(n)
        ]

    def test_exact_profile_holds(self, unit_profile):
        rsnaps = [exact_rescaled(unit_profile, s) for s in (2.5, 3.0, 3.5)]
        report = monitor_bootstrap(rsnaps, self._modulation(), unit_profile, 1.0, 0.3)
        assert report.passed
        for check_id in ("Wy_bound", "Wy_dec", "Wy_sup", "Wyyy_origin", "tau_rate_factor"):
            assert report.get(check_id).passed, check_id
        assert len(report.get("Wyyy_origin").trend) == 3
        assert report.get("tau_rate") is None

    def test_violation_is_dated(self, unit_profile):
        rsnaps = [
            exact_rescaled(unit_profile, 2.5),
            exact_rescaled(unit_profile, 3.0, shift=0.01),
            exact_rescaled(unit_profile, 3.5, shift=0.01),
        ]
        report = monitor_bootstrap(rsnaps, self._modulation(), unit_profile, 1.0, 0.3)
        record = report.get("Wy_bound")
        assert not record.passed
        assert record.first_violation == pytest.approx(3.0)
        assert len(record.trend) == 3

    def test_noisy_snapshots_skip_origin_check(self, unit_profile):
        rsnaps = [exact_rescaled(unit_profile, 2.5, growth=50.0)]
        report = monitor_bootstrap(rsnaps, [], unit_profile, 1.0, 0.3)
        record = report.get("Wyyy_origin")
        assert record.passed and "no samples" in record.notes


class TestRunMonitors:
    def test_flat_run(self):
        grid = Grid1D.symmetric(2.5, 64)
        state = PhysState(
            "rsv", grid, t=-0.5, h_star=4.0, eps=0.5, w=np.full(64, 4.0), z=np.full(64, -4.0)
        )
        cfg = SimConfig(eps=0.5, half_length=2.5, n=64, t_max=-0.45, track_modulation=False)
        report = monitor_run(run(cfg, initial_state=state))
        assert [r.check_id for r in report.records] == [
            "energy_drift",
            "h_range",
            "G_bound",
            "q_bound",
            "z_C1",
        ]
        assert all(r.passed for r in report.records)
