"""Tests for modulation tracking, blow-up estimates and rescaling."""

import math

import numpy as np
import pytest

from blowuplab.core.elliptic import Grid1D
from blowuplab.core.exceptions import (
    BlowupEstimateError,
    ModulationError,
    RescaleError,
    ResidualError,
)
from blowuplab.core.pde import PhysState, Snapshot, Trajectory, make_initial_data
from blowuplab.core.profile import profile_eval
from blowuplab.core.selfsim import (
    ModulationState,
    RescaledSnapshot,
    default_y_nodes,
    estimate_blowup,
    fit_blowup_time,
    grid_for,
    modulation_blowup_time,
    profile_distance,
    rescale_snapshot,
    residual_check,
    step_modulation,
    unrescale,
)
from blowuplab.schemas import ModulationSample, ScalarSample, SimConfig


def scalars(t, min_dx, argmin_x=0.0):
    return ScalarSample(t=t, energy=1.0, min_dx=min_dx, argmin_x=argmin_x)


def rescaled(model="rb", s=1.0, y=None, W=None, W_y=None, **kwargs):
    y = np.linspace(-1.0, 1.0, 21) if y is None else y
    lead = math.exp(-s)
    fields = dict(
        model=model,
        t=0.0,
        s=s,
        tau=lead,
        kappa=0.0,
        xi=0.0,
        tau_dot=0.0,
        kappa_dot=0.0,
        xi_dot=0.0,
        y=y,
        W=np.zeros_like(y) if W is None else W,
        W_y=np.zeros_like(y) if W_y is None else W_y,
        Q_y=np.zeros_like(y),
    )
    fields.update(kwargs)
    return RescaledSnapshot(**fields)


class TestModulationState:
    def test_initial_values(self, unit_profile, small_config):
        state = make_initial_data(small_config, unit_profile)
        mod = ModulationState.initial(state)
        assert mod.tau == pytest.approx(0.0, abs=1e-14)
        assert mod.xi == 0.0
        assert mod.kappa == pytest.approx(4.0, abs=1e-3)
        assert mod.s == pytest.approx(-math.log(0.5))
        assert not mod.frozen

    def test_flat_rb_state_freezes(self):
        grid = Grid1D.symmetric(2.5, 64)
        state = PhysState("rb", grid, t=-0.5, h_star=1.0, eps=0.5, v=np.zeros(64))
        mod = ModulationState.initial(state)
        assert mod.frozen
        assert mod.kappa_dot == 0.0 and mod.xi_dot == 0.0
        assert mod.tau_dot == 0.0

    def test_coordinates_round_trip(self):
        mod = ModulationState(t=-0.2, tau=0.05, kappa=1.0, xi=0.3)
        x = np.array([-0.5, 0.3, 1.1])
        np.testing.assert_allclose(mod.to_x(mod.to_y(x)), x)
        assert mod.to_y(np.array([0.3]))[0] == 0.0

    def test_s_needs_tau_after_t(self):
        mod = ModulationState(t=0.1, tau=0.1, kappa=0.0, xi=0.0)
        with pytest.raises(ModulationError):
            _ = mod.s

    def test_sample_round_trip(self):
        mod = ModulationState(t=-0.2, tau=0.05, kappa=1.0, xi=0.3, tau_dot=0.01, frozen=True)
        assert ModulationState.from_sample(mod.to_sample()) == mod

    def test_step_with_constant_fields(self):
        # z_x = z_xx = q = q_x = q_xx = 0 leaves τ̇ = 0, κ̇ = (8/3)G and ξ̇ = z/3 + κ
        grid = Grid1D.symmetric(2.5, 64)
        state = PhysState(
            "rsv", grid, t=0.0, h_star=4.0, eps=0.5, w=np.full(64, 4.0), z=np.full(64, -4.0)
        )
        values = {"z": -4.0, "zx": 0.0, "zxx": 0.0, "q": 0.0, "qx": 0.0, "qxx": 0.0,
                  "G": 0.3, "w3": 12.0}
        order = ("z", "zx", "zxx", "q", "qx", "qxx", "G", "w3")
        fields = np.vstack([np.full(64, values[k]) for k in order])
        mod = ModulationState(t=0.0, tau=0.5, kappa=4.0, xi=0.0)
        dt = 0.01

        new = step_modulation(mod, state, dt, fields=fields)
        assert new.t == pytest.approx(dt)
        assert new.tau == pytest.approx(0.5, abs=1e-14)
        assert new.kappa == pytest.approx(4.0 + 0.8 * dt, rel=1e-12)
        assert new.xi == pytest.approx((-4.0 / 3.0 + 4.0) * dt + 0.4 * dt**2, rel=1e-10)
        assert new.tau_dot == pytest.approx(0.0, abs=1e-14)
        assert new.kappa_dot == pytest.approx(0.8, rel=1e-12)
        assert not new.frozen


class TestBlowupEstimates:
    def test_fit_linear_m(self):
        t = np.linspace(-0.3, -0.05, 9)
        t_star, residual = fit_blowup_time(t, 0.3 * (0.1 - t))
        assert t_star == pytest.approx(0.1)
        assert residual == pytest.approx(0.0, abs=1e-12)

    def test_fit_needs_two_samples(self):
        with pytest.raises(BlowupEstimateError):
            fit_blowup_time([0.0], [1.0])

    def test_fit_needs_decreasing_m(self):
        with pytest.raises(BlowupEstimateError):
            fit_blowup_time([0.0, 1.0, 2.0], [1.0, 1.5, 2.0])

    def _trajectory(self, times):
        grid = Grid1D.symmetric(2.5, 64)
        traj = Trajectory(config=SimConfig(), grid=grid, initial_slope=1.0, energy0=1.0)
        for i, t in enumerate(times):
            sample = scalars(t, -1.0 / -t, argmin_x=0.25)
            traj.series.append(sample)
            traj.snapshots.append(Snapshot(index=i, step=i, t=t, fields={}, scalars=sample))
        return traj

    def test_slope_estimate(self):
        traj = self._trajectory([-1.0, -0.25, -0.2, -0.15, -0.1, -0.08, -0.06, -0.04, -0.03])
        estimate = estimate_blowup(traj)
        assert estimate.valid
        assert estimate.t_star == pytest.approx(0.0, abs=1e-12)
        assert estimate.x_star == pytest.approx(0.25)

    def test_slope_estimate_needs_blowup_regime(self):
        traj = self._trajectory([-1.0, -0.9, -0.8, -0.5])
        with pytest.raises(BlowupEstimateError):
            estimate_blowup(traj)

    def test_modulation_estimate(self):
        t = np.linspace(-0.3, -0.01, 12)
        samples = [
            ModulationSample(t=ti, tau=0.02, kappa=0.0, xi=0.4, tau_dot=0.0, kappa_dot=0.0,
                             xi_dot=0.0)
            for ti in t
        ]
        estimate = modulation_blowup_time(samples)
        assert estimate.valid
        assert estimate.t_star == pytest.approx(0.02)
        assert estimate.x_star == pytest.approx(0.4)

    def test_modulation_estimate_skips_frozen(self):
        samples = [
            ModulationSample(t=0.0, tau=1.0, kappa=0.0, xi=0.0, tau_dot=0.0, kappa_dot=0.0,
                             xi_dot=0.0, frozen=True)
        ]
        assert not modulation_blowup_time(samples).valid


class TestRescaling:
    def _snapshot(self):
        x = np.linspace(-2.5, 2.5, 2001)
        fields = {"x": x, "v": np.sin(x), "p": np.cos(x)}
        mod = ModulationSample(t=-0.5, tau=0.0, kappa=0.2, xi=0.1, tau_dot=0.0, kappa_dot=0.0,
                               xi_dot=0.0)
        return Snapshot(index=0, step=0, t=-0.5, fields=fields, scalars=scalars(-0.5, -1.0),
                        modulation=mod)

    def test_round_trip(self):
        snap = self._snapshot()
        rsnap = rescale_snapshot(snap)
        assert rsnap.model == "rb"
        assert rsnap.s == pytest.approx(math.log(2.0))
        x, w = unrescale(rsnap)
        assert np.all(np.abs(x - 0.1) <= 0.8 + 1e-12)
        np.testing.assert_allclose(w, np.sin(x), atol=1e-9)
        np.testing.assert_allclose(rsnap.W_y, 0.5 * np.cos(x), atol=1e-8)

    def test_needs_modulation(self):
        snap = self._snapshot()
        snap.modulation = None
        with pytest.raises(RescaleError):
            rescale_snapshot(snap)

    def test_needs_tau_after_t(self):
        snap = self._snapshot()
        late = snap.modulation.model_copy(update={"tau": -0.6})
        with pytest.raises(RescaleError):
            rescale_snapshot(snap, late)

    def test_default_nodes_hold_origin(self):
        nodes = default_y_nodes()
        assert np.count_nonzero(nodes == 0.0) == 1
        np.testing.assert_allclose(nodes, -nodes[::-1])
        assert np.all(np.diff(nodes) > 0.0)

    def test_grid_for_stretched_column(self):
        grid = Grid1D.symmetric(2.5, 64, stretch=3.0)
        snap = Snapshot(index=3, step=0, t=0.0, fields={"x": grid.x}, scalars=scalars(0.0, -1.0))
        np.testing.assert_allclose(grid_for(snap, 3.0).x, grid.x)
        with pytest.raises(RescaleError):
            grid_for(snap)

    def test_rescale_on_stretched_grid(self):
        grid = Grid1D.symmetric(2.5, 4001, stretch=2.0)
        x = grid.x
        fields = {"x": x, "v": np.sin(x), "p": np.cos(x)}
        mod = ModulationSample(t=-0.5, tau=0.0, kappa=0.2, xi=0.1, tau_dot=0.0, kappa_dot=0.0,
                               xi_dot=0.0)
        snap = Snapshot(index=0, step=0, t=-0.5, fields=fields, scalars=scalars(-0.5, -1.0),
                        modulation=mod)
        rsnap = rescale_snapshot(snap, grid=grid)
        x_back, w = unrescale(rsnap)
        np.testing.assert_allclose(w, np.sin(x_back), atol=1e-8)
        np.testing.assert_allclose(rsnap.W_y, 0.5 * np.cos(x_back), atol=1e-5)


class TestProfileDistance:
    def test_exact_profile_has_zero_distance(self, unit_profile):
        y = default_y_nodes()
        y = y[np.abs(y) <= 1e3]
        W, W_y, W_yy = profile_eval(unit_profile, y)
        rsnap = rescaled(y=y, W=W, W_y=W_y, W_yy=W_yy, W_yyy=np.full_like(y, 256.0))
        dist = profile_distance(rsnap, unit_profile)
        assert dist.weighted_decay == 0.0
        assert dist.constraint_max == pytest.approx(0.0, abs=1e-12)
        assert dist.wyyy0 == 256.0


class TestResidual:
    def test_pure_growth_term(self):
        a = rescaled(s=1.0)
        b = rescaled(s=1.05, W=np.full(21, 0.1))
        record = residual_check(a, b)
        # W_s - 3W/2 with W averaged over the pair
        assert record.sup == pytest.approx(0.1 / 0.05 - 1.5 * 0.05)
        assert record.n_points == 21
        assert record.sup_wy1 is None

    def test_zero_state(self):
        record = residual_check(rescaled(s=1.0), rescaled(s=1.02))
        assert record.sup == 0.0 and record.l2 == 0.0

    @pytest.mark.parametrize("s_b", [1.0, 0.9, 1.5])
    def test_spacing_out_of_range(self, s_b):
        with pytest.raises(ResidualError):
            residual_check(rescaled(s=1.0), rescaled(s=s_b))
