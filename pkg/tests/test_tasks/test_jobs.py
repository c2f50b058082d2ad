"""Tests for the analysis helpers behind the job runners."""

import numpy as np
import pytest

from blowuplab.core.elliptic import Grid1D
from blowuplab.core.pde import Snapshot, Trajectory
from blowuplab.schemas import ModulationSample, ScalarSample, SimConfig
from blowuplab.tasks.jobs import hoelder_windows, rate_fits


def tanh_trajectory(growths, predicted_lead=1e-4):
    """rB trajectory with v = -g tanh(x), so max(-∂x v) = g, and a modulation far ahead."""
    cfg = SimConfig(model="rb", eps=0.5, half_length=2.5, n=1001)
    grid = Grid1D.symmetric(cfg.half_length, cfg.n)
    traj = Trajectory(config=cfg, grid=grid, initial_slope=1.0, energy0=1.0)
    for i, g in enumerate(growths):
        t = -1.0 / g
        scalars = ScalarSample(t=t, energy=1.0, min_dx=-g, argmin_x=0.0)
        mod = ModulationSample(t=t, tau=t + predicted_lead, kappa=0.0, xi=0.0, tau_dot=0.0,
                               kappa_dot=0.0, xi_dot=0.0)
        fields = {"x": grid.x, "v": -g * np.tanh(grid.x), "p": np.zeros(cfg.n)}
        traj.snapshots.append(
            Snapshot(index=i, step=i, t=t, fields=fields, scalars=scalars, modulation=mod)
        )
        traj.series.append(scalars)
    return traj


class TestRateFits:
    def test_window_follows_measured_growth(self):
        growths = 2.0 * 1.2 ** np.arange(18)
        traj = tanh_trajectory(growths)
        results = rate_fits(traj, t_star=0.0, x_star=0.0, alphas=(1.0,), workers=1)
        (near,) = [fit for _, fit, tag in results if tag == ""]
        # growth 4.15 through 17.8 lies between the regime threshold and the stop factor
        assert near.n_samples == 9
        assert near.slope == pytest.approx(-1.0, abs=0.01)
        assert near.passed

    def test_modulation_alone_does_not_open_the_window(self):
        # measured growth stays below the blow-up regime while ε/(τ - t) is huge
        traj = tanh_trajectory(np.linspace(1.0, 3.5, 12))
        assert rate_fits(traj, t_star=0.0, x_star=0.0, alphas=(1.0,), workers=1) == []


class TestHoelderWindows:
    def test_far_window_takes_the_wider_side(self):
        grid = Grid1D.symmetric(2.5, 1001)
        near, far = hoelder_windows(-0.5, grid)
        assert near == pytest.approx((-1.0, 0.0))
        assert far[0] == pytest.approx(0.5)
        assert far[1] == pytest.approx(grid.x[-11])

    def test_far_window_dropped_when_too_narrow(self):
        grid = Grid1D.symmetric(2.5, 101)
        near, far = hoelder_windows(0.0, grid, gap=2.3)
        assert far is None
        assert near == pytest.approx((-0.5, 0.5))

    def test_windows_keep_clear_of_the_ends(self):
        grid = Grid1D.symmetric(2.5, 1001)
        near, _ = hoelder_windows(2.4, grid)
        assert near[1] == pytest.approx(grid.x[-11])
