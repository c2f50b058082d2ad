"""Tests for initial data, energy and time stepping."""

import numpy as np
import pytest

from blowuplab.core.elliptic import Grid1D
from blowuplab.core.exceptions import GridError, NonPhysicalStateError, ProfileError
from blowuplab.core.pde import (
    PhysState,
    cutoff,
    diagnostics,
    energy,
    make_initial_data,
    resolvable_growth,
    rhs_rb,
    riemann_convert,
    riemann_invert,
    run,
    stable_dt,
    step,
    validate_initial_data,
)
from blowuplab.core.profile import rescale_profile
from blowuplab.schemas import ModulationSample, SimConfig


def flat_rsv(n=64, half_length=2.5, h_star=4.0, stretch=0.0):
    grid = Grid1D.symmetric(half_length, n, stretch)
    root = np.sqrt(h_star)
    return PhysState(
        "rsv",
        grid,
        t=-0.5,
        h_star=h_star,
        eps=0.5,
        w=np.full(n, 2.0 * root),
        z=np.full(n, -2.0 * root),
    )


class HalvingLead:
    """Step observer whose τ - t halves every step."""

    def __init__(self, state):
        self.sample = ModulationSample(
            t=state.t, tau=state.t + 1.0, kappa=0.0, xi=0.0, tau_dot=0.0, kappa_dot=0.0,
            xi_dot=0.0,
        )

    def advance(self, state, dt, new_state):
        lead = 0.5 * (self.sample.tau - self.sample.t)
        self.sample = self.sample.model_copy(update={"t": new_state.t, "tau": new_state.t + lead})
        return self.sample


class TestAlgebra:
    def test_riemann_round_trip(self):
        h = np.array([1.0, 2.0, 4.5])
        u = np.array([-0.3, 0.0, 1.2])
        w, z = riemann_convert(h, u)
        h2, u2 = riemann_invert(w, z)
        np.testing.assert_allclose(h2, h)
        np.testing.assert_allclose(u2, u)

    def test_riemann_rejects_dry_states(self):
        with pytest.raises(NonPhysicalStateError):
            riemann_convert(np.array([1.0, 0.0]), np.zeros(2))

    def test_cutoff_plateau_and_support(self):
        x = np.array([-3.0, -2.0, -1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5])
        chi = cutoff(x)
        np.testing.assert_allclose(chi[[2, 3, 4, 5]], 1.0)
        np.testing.assert_allclose(chi[[0, 1, 7, 8]], 0.0)
        assert chi[6] == pytest.approx(0.5)

    def test_cutoff_is_even_and_monotone(self):
        x = np.linspace(0.0, 3.0, 301)
        chi = cutoff(x)
        np.testing.assert_allclose(cutoff(-x), chi)
        assert np.all(np.diff(chi) <= 0.0)


class TestInitialData:
    def test_rsv_defaults_report_energy_excess(self, unit_profile):
        cfg = SimConfig()
        state = make_initial_data(cfg, unit_profile)
        assert state.t == pytest.approx(-0.3)
        report = validate_initial_data(state, unit_profile, theta=cfg.theta_weight)
        assert all(r.required for r in report.records)
        for check_id in ("init_h", "init_w0_dx", "init_w0_dxx", "init_w0_dxxx"):
            record = report.get(check_id)
            assert record.passed, check_id
            assert record.worst_margin >= 0.0, check_id
        # E0 of the profile-shaped data is about three times h_*³/6
        e0 = report.get("E0_bound")
        assert e0.worst_margin < 0.0
        assert not e0.passed
        assert energy(state) > 2.0 * cfg.h_star**3 / 6.0
        assert not report.passed

    def test_rb_defaults_report_every_bound(self, unit_profile):
        cfg = SimConfig(model="rb")
        state = make_initial_data(cfg, unit_profile)
        assert state.v is not None and state.w is None
        report = validate_initial_data(state, unit_profile)
        assert all(r.required for r in report.records)
        for check_id in ("init_v0_dx", "init_v0_dxx", "init_v0_dxxx"):
            assert report.get(check_id).passed, check_id
        assert report.passed == all(r.passed for r in report.records)

    def test_stretched_grid_resolves_origin(self, unit_profile):
        cfg = SimConfig(model="rb", eps=0.5, half_length=2.5, n=2048, grid_stretch=6.0)
        state = make_initial_data(cfg, unit_profile)
        assert state.grid.dx < 1e-3
        sample = diagnostics(state)
        assert abs(sample.argmin_x) < 2 * state.grid.dx
        assert sample.min_dx == pytest.approx(-2.0 / cfg.eps, rel=0.02)

    def test_slope_at_origin(self, unit_profile, small_config):
        state = make_initial_data(small_config, unit_profile)
        sample = diagnostics(state)
        # most negative slope sits at the origin with value about -2/eps
        assert abs(sample.argmin_x) < 2 * state.grid.dx
        assert sample.min_dx == pytest.approx(-2.0 / small_config.eps, rel=0.02)

    def test_unresolved_grid(self, unit_profile):
        with pytest.raises(GridError):
            make_initial_data(SimConfig(n=1024), unit_profile)

    def test_needs_unit_profile(self, unit_profile, small_config):
        with pytest.raises(ProfileError):
            make_initial_data(small_config, rescale_profile(unit_profile, 2.0))

    def test_large_depth_bump_is_reported(self, unit_profile):
        cfg = SimConfig(z_bump_amplitude=0.5)
        state = make_initial_data(cfg, unit_profile)
        report = validate_initial_data(state, unit_profile)
        assert not report.get("init_zbound_dx").passed or not report.get("init_zx_weight").passed


class TestFlatState:
    def test_energy_vanishes(self):
        assert energy(flat_rsv()) == pytest.approx(0.0, abs=1e-14)

    def test_nonlocal_fields_vanish(self):
        nl = flat_rsv().nonlocal_fields
        np.testing.assert_allclose(nl["G"], 0.0, atol=1e-14)
        np.testing.assert_allclose(nl["q"], 0.0, atol=1e-14)

    def test_step_keeps_state(self):
        state = flat_rsv()
        new = step(state, 0.01)
        assert new.t == pytest.approx(-0.49)
        np.testing.assert_allclose(new.w, state.w)
        np.testing.assert_allclose(new.z, state.z)

    def test_stable_dt(self):
        state = flat_rsv()
        # transport speed |w + z/3| = 8/3 for h_* = 4
        assert stable_dt(state, 0.4) == pytest.approx(0.4 * state.grid.dx / (8.0 / 3.0))

    def test_stable_dt_uses_local_spacing(self):
        state = flat_rsv(stretch=3.0)
        spacing = state.grid.spacing
        assert spacing.max() > 5.0 * spacing.min()
        assert stable_dt(state, 0.4) == pytest.approx(0.4 * spacing.min() / (8.0 / 3.0))

    def test_rb_zero_state(self):
        grid = Grid1D.symmetric(2.5, 64)
        state = PhysState("rb", grid, t=0.0, h_star=1.0, eps=0.5, v=np.zeros(64))
        assert energy(state) == 0.0
        np.testing.assert_allclose(step(state, 0.05).v, 0.0)

    def test_run_without_blowup(self):
        cfg = SimConfig(eps=0.5, half_length=2.5, n=64, t_max=-0.45, track_modulation=False)
        traj = run(cfg, initial_state=flat_rsv())
        assert traj.stop_reason == "t_max"
        assert not traj.blowup_flagged
        assert traj.series[-1].t == pytest.approx(-0.45)
        assert traj.growth(traj.series[-1]) == 0.0

    def test_predicted_growth_alone_does_not_flag(self):
        cfg = SimConfig(eps=0.5, half_length=2.5, n=64)
        traj = run(cfg, initial_state=flat_rsv(), observer_factory=HalvingLead)
        assert traj.stop_reason == "resolution_limit"
        assert not traj.blowup_flagged
        assert traj.steps == 5
        assert traj.predicted_growth == pytest.approx(32.0)
        assert traj.peak_growth == 0.0

    def test_predicted_growth_stops_past_resolvable_growth(self):
        # the stretched core resolves growth ~7.4, above the stop factor 4
        cfg = SimConfig(
            eps=0.5, half_length=2.5, n=4001, grid_stretch=6.0, stop_growth_factor=4.0
        )
        state = flat_rsv(n=4001, stretch=6.0)
        traj = run(cfg, initial_state=state, observer_factory=HalvingLead)
        assert traj.stop_reason == "resolution_limit"
        assert traj.steps == 3
        assert traj.predicted_growth == pytest.approx(8.0)

    def test_state_needs_fields(self):
        grid = Grid1D.symmetric(2.5, 64)
        with pytest.raises(ValueError):
            PhysState("rsv", grid, t=0.0, h_star=1.0, eps=0.5, w=np.zeros(64))


class TestResolution:
    def test_default_grid_saturates_early(self):
        assert resolvable_growth(SimConfig()) < 2.0

    def test_stretched_rb_grid_reaches_stop_factor(self):
        cfg = SimConfig(model="rb", eps=0.5, half_length=2.5, n=8192, grid_stretch=8.5)
        assert resolvable_growth(cfg) > cfg.stop_growth_factor


class TestSchemeAccuracy:
    def test_rsv_energy_over_100_steps(self):
        grid = Grid1D.symmetric(10.0, 4001)
        state = PhysState(
            "rsv",
            grid,
            t=0.0,
            h_star=4.0,
            eps=0.5,
            w=4.0 + 1e-3 * np.exp(-grid.x**2),
            z=np.full(grid.n, -4.0),
        )
        e0 = energy(state)
        for _ in range(100):
            state = step(state, stable_dt(state, 0.4))
        assert abs(energy(state) - e0) / e0 <= 1e-8

    def test_rb_tendency_of_sine(self):
        # p = 1/4 + cos(2x)/20 away from the ends, so v_t = -(2/5) sin 2x
        grid = Grid1D.symmetric(10.0 * np.pi, 4001)
        x = grid.x
        state = PhysState("rb", grid, t=0.0, h_star=1.0, eps=0.5, v=np.sin(x))
        interior = np.abs(x) <= 10.0 * np.pi - 15.0
        np.testing.assert_allclose(
            rhs_rb(state)[interior], -0.4 * np.sin(2.0 * x[interior]), atol=1e-4
        )

    def test_step_keeps_odd_symmetry(self, unit_profile):
        cfg = SimConfig(model="rb", eps=0.5, half_length=2.5, n=1024)
        state = make_initial_data(cfg, unit_profile)
        for _ in range(3):
            state = step(state, stable_dt(state, cfg.cfl))
        v = state.v
        assert np.max(np.abs(v + v[::-1])) <= 1e-10 * np.max(np.abs(v))

    def test_time_stepping_is_fourth_order(self):
        grid = Grid1D.symmetric(10.0, 1001)
        start = PhysState("rb", grid, t=0.0, h_star=1.0, eps=0.5, v=0.5 * np.exp(-grid.x**2))

        def solve(dt):
            state = start
            for _ in range(int(round(0.4 / dt))):
                state = step(state, dt)
            return state.v

        coarse, mid, fine = solve(0.04), solve(0.02), solve(0.01)
        ratio = np.max(np.abs(coarse - mid)) / np.max(np.abs(mid - fine))
        assert 12.0 < ratio < 20.0


class TestShortRun:
    def test_steps_and_snapshots(self, unit_profile, small_config):
        cfg = small_config.model_copy(update={"max_steps": 20, "snapshot_cadence": 5})
        traj = run(cfg, unit_profile)
        assert traj.stop_reason == "max_steps"
        assert len(traj.series) == 21
        assert [s.step for s in traj.snapshots] == [0, 5, 10, 15, 20]
        drift = abs(traj.series[-1].energy - traj.energy0) / traj.energy0
        assert drift < cfg.energy_drift_limit

    def test_gradient_steepens(self, unit_profile, small_config):
        cfg = small_config.model_copy(update={"max_steps": 20})
        traj = run(cfg, unit_profile)
        assert traj.growth(traj.series[-1]) > 1.0

    def test_measured_growth_flags_blowup(self, unit_profile, small_config):
        cfg = small_config.model_copy(
            update={"stop_growth_factor": 1.01, "track_modulation": False, "max_steps": 2000}
        )
        traj = run(cfg, unit_profile)
        assert traj.stop_reason == "gradient_growth"
        assert traj.blowup_flagged
        assert traj.peak_growth >= 1.01
