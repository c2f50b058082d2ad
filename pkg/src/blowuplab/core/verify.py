"""
Numerical checks of the profile inequalities and runtime monitors of the
bootstrap bounds along rescaled trajectories.

Every check is report-only: margins are RHS - LHS (nonnegative when the
inequality holds) and land in a VerifyReport, never in an exception.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.integrate import quad
from scipy.optimize import brentq

from blowuplab.core.exceptions import QuadratureError
from blowuplab.core.pde import SMOOTH_GROWTH, Trajectory
from blowuplab.core.profile import (
    SWITCH_TOLERANCE,
    ProfileTable,
    is_monotone,
    profile_eval,
    profile_residual,
    third_derivative,
)
from blowuplab.core.selfsim import RescaledSnapshot
from blowuplab.schemas import (
    EQ_TOL,
    THETA_MAX,
    CheckKind,
    CheckRecord,
    ModulationSample,
    VerifyReport,
)

# Lower end of the tail on which the far-field integral inequality is checked.
TAIL_START = 2e6

# Relative slack of the separation bound, which the exact profile meets with equality.
SEPARATION_SLACK = 1e-8

QUAD_TOL = 1e-10

ENERGY_DRIFT_TARGET = 1e-5

# Sup bound of G and q when E0 ≤ h_*³/6.
NONLOCAL_BOUND = 8.0 / 3.0


def log_grid(y_min: float = 1e-6, y_max: float = 1e8, n: int = 2000) -> np.ndarray:
    """Symmetric log-spaced grid ±[y_min, y_max]."""
    pos = np.geomspace(y_min, y_max, n)
    return np.concatenate((-pos[::-1], pos))


def _x_minus_arctan(a: np.ndarray) -> np.ndarray:
    """a - arctan(a) for a ≥ 0, by series where cancellation would bite."""
    small = a < 1e-3
    out = np.empty_like(a)
    s = a[small]
    out[small] = s**3 / 3.0 - s**5 / 5.0 + s**7 / 7.0
    out[~small] = a[~small] - np.arctan(a[~small])
    return out


def tail_integral(a: np.ndarray) -> np.ndarray:
    """
    ∫_0^a ds / (1 + s^{2/5}) for sorted a ≥ 0.

    Adaptive quadrature runs on the pieces of a geometric partition refined by
    ``a`` and the pieces are summed cumulatively.

    Raises:
        QuadratureError: If a piece misses the tolerance
    """
    a = np.asarray(a, dtype=float)
    top = float(a.max()) if a.size else 0.0
    if top <= 0.0:
        return np.zeros_like(a)
    breaks = np.unique(np.concatenate(([0.0], np.geomspace(1e-3, top, 120), a)))
    breaks = breaks[breaks <= top]

    pieces = np.empty(breaks.size - 1)
    for i, (lo, hi) in enumerate(zip(breaks[:-1], breaks[1:])):
        value, err = quad(
            lambda s: 1.0 / (1.0 + s**0.4), lo, hi, epsabs=0.0, epsrel=1e-12, limit=200
        )
        if err > QUAD_TOL * max(1.0, abs(value)):
            raise QuadratureError(f"Quadrature on [{lo:.4g}, {hi:.4g}] has error {err:.2e}")
        pieces[i] = value

    cumulative = np.concatenate(([0.0], np.cumsum(pieces)))
    return cumulative[np.searchsorted(breaks, a)]


def _curvature_delta(lhs: np.ndarray, rhs_base: np.ndarray) -> Optional[float]:
    """Smallest δ in (0, 1) with lhs ≤ δ·rhs_base everywhere, or None."""

    def excess(delta: float) -> float:
        return float(np.max(lhs - delta * rhs_base))

    if excess(1.0) > EQ_TOL:
        return None
    if excess(0.0) <= 0.0:
        return 0.0
    return brentq(excess, 0.0, 1.0, xtol=1e-12)


def check_profile_inequalities(
    profile: ProfileTable,
    y_min: float = 1e-6,
    y_max: float = 1e8,
    n_points: int = 2000,
    tail_start: float = TAIL_START,
) -> VerifyReport:
    """
    Evaluate the profile inequalities on a log-spaced grid plus y = 0.

    Args:
        profile: Unit profile table
        y_min: Smallest |y| of the grid
        y_max: Largest |y| of the grid
        n_points: Points per sign
        tail_start: |y| from which the tail integral inequality is checked

    Returns:
        VerifyReport with one required record per inequality
    """
    y = log_grid(y_min, y_max, n_points)
    W, Wp, Wpp = profile_eval(profile, y)
    a = np.abs(y)
    y2 = y**2
    ratio = 2.5 + W / y
    domain = f"±[{y_min:g}, {y_max:g}] and y = 0"

    report = VerifyReport(
        title=f"Profile inequalities (beta={profile.beta:g})",
        parameters={"y_min": y_min, "y_max": y_max, "n_points": n_points, "beta": profile.beta},
    )

    def add(check_id: str, margins, locs, **kwargs) -> CheckRecord:
        kwargs.setdefault("domain", domain)
        kwargs.setdefault("required", True)
        return report.add(CheckRecord.from_margin(check_id, margins, locs, **kwargs))

    # y = 0 is an equality point of the first three; W̄/y → W̄'(0) = -2 there.
    zero = np.array([0.0])
    add(
        "slope_gap",
        np.concatenate((zero, 2.0 + Wp - 6.0 * y2 / (5.0 * (1.0 + y2)))),
        np.r_[0.0, y],
    )
    add(
        "damping_lower",
        np.concatenate(
            (zero, 1.0 + Wp + 2.0 / (1.0 + y2) * ratio - y2 / (5.0 * (1.0 + y2)))
        ),
        np.r_[0.0, y],
    )
    add(
        "damping_wide",
        np.concatenate(
            (zero, 3.5 + 2.0 * Wp + ratio / (1.0 + y2) - 19.0 * y2 / (10.0 * (1.0 + y2)))
        ),
        np.r_[0.0, y],
    )

    lhs6 = np.abs(Wpp) * (y2 + 1.0) / y2 * _x_minus_arctan(a)
    base6 = 1.0 + Wp + 2.0 / (y2 + 1.0) * ratio - y2 / (500.0 * (1.0 + y2))
    delta = _curvature_delta(lhs6, base6)
    if delta is None:
        add("curvature_delta", base6 - lhs6, y, notes="no admissible delta in (0, 1)")
    else:
        add(
            "curvature_delta",
            delta * base6 - lhs6,
            y,
            tol=1e-9,
            notes=f"delta={delta:.6f}",
        )
    report.parameters["delta"] = delta

    tail = a >= tail_start
    if tail.any():
        pos = np.unique(a[tail])
        integral = tail_integral(pos)
        w_t, wp_t, wpp_t = profile_eval(profile, pos)
        w40 = pos**0.4
        lhs = (w40 + 1.0) * np.abs(wpp_t) * integral
        rhs = (
            10.0 / (13.0 * (1.0 + w40))
            + wp_t
            - 2.0 * w40 / (5.0 * (1.0 + w40)) * (w_t / pos + 6.0 / (13.0 * pos) * integral)
        )
        add("tail_integral", rhs - lhs, pos, domain=f"|y| ≥ {tail_start:g}")

    add("slope_lower", np.r_[0.0, Wp + 2.0], np.r_[0.0, y], notes="W̄' ≥ -2")
    add("slope_upper", np.r_[2.0, -Wp], np.r_[0.0, y], notes="W̄' ≤ 0")
    add("linear_bound", np.r_[0.0, 2.0 * a - np.abs(W)], np.r_[0.0, y], notes="|W̄| ≤ 2|y|")

    sep_lhs = a**0.4 * np.abs(Wp)
    p = np.clip(Wp, -2.0, 0.0)
    sep_rhs = (np.sqrt(2.0 + p) * (2.0 * p**2 - 2.0 * p + 3.0) / 30.0) ** 0.4
    c_sep = float(sep_lhs.max())
    add(
        "separation",
        sep_rhs * (1.0 + SEPARATION_SLACK) - sep_lhs,
        y,
        notes=f"sup |y|^(2/5)|W̄'| = {c_sep:.6f}",
    )
    report.parameters["sup_y25_wp"] = c_sep

    c2 = float(np.max(a * (a**0.4 + 1.0) * np.abs(Wpp)))
    add(
        "curvature_decay",
        [0.0 if math.isfinite(c2) else float("nan")],
        [0.0],
        notes=f"sup |y|(|y|^(2/5)+1)|W̄''| = {c2:.6f}",
    )
    report.parameters["sup_y_wpp"] = c2

    add("Wpp_sign", Wpp * np.sign(y), y, notes="W̄''·sign(y) ≥ 0")
    add(
        "monotone",
        [0.0 if is_monotone(profile) else -1.0],
        [0.0],
        notes="W̄' increases toward 0 at the table nodes",
    )

    n_failed = len(report.failures())
    if n_failed:
        logger.warning(f"Profile inequalities: {n_failed} of {len(report.records)} failed")
    else:
        logger.success(f"Profile inequalities: all {len(report.records)} checks passed")
    return report


def check_profile_table(
    table: ProfileTable, residual_limit: float = 1e3, far_point: float = 1e6
) -> VerifyReport:
    """
    Accuracy checks of a profile table: origin values, equation residual,
    far-field constant and branch mismatch.

    Args:
        table: Profile table for any beta
        residual_limit: |y| up to which the equation residual is checked
        far_point: Where y^{2/5}|W̄'| is compared with (50β)^{-1/5}

    Returns:
        VerifyReport with required records
    """
    report = VerifyReport(title=f"Profile table (beta={table.beta:g})", parameters=table.summary())

    _, wp0, _ = profile_eval(table, 0.0)
    report.add(
        CheckRecord.from_margin(
            "wp0", 1e-10 - abs(wp0 + 2.0), [0.0], domain="|W̄'(0) + 2| ≤ 1e-10", required=True
        )
    )
    w3 = float(third_derivative(table, 0.0))
    report.add(
        CheckRecord.from_margin(
            "wppp0",
            1e-6 * table.beta - abs(w3 - 256.0 * table.beta),
            [0.0],
            domain="|W̄'''(0) - 256β| ≤ 1e-6 β",
            required=True,
            notes=f"W̄'''(0) = {w3:.10g}",
        )
    )
    residual = profile_residual(table, residual_limit)
    report.add(
        CheckRecord.from_margin(
            "weq_residual",
            1e-8 - residual,
            [residual_limit],
            domain=f"equation residual on |y| ≤ {residual_limit:g}",
            required=True,
            notes=f"residual {residual:.3e}",
        )
    )
    c = table.asym_coeffs[1]
    _, wp_far, _ = profile_eval(table, far_point)
    scaled = far_point**0.4 * abs(wp_far)
    report.add(
        CheckRecord.from_margin(
            "far_field",
            0.02 * c - abs(scaled - c),
            [far_point],
            domain="y^(2/5)|W̄'| within 2% of (50β)^(-1/5)",
            required=True,
            notes=f"{scaled:.6f} vs {c:.6f}",
        )
    )
    report.add(
        CheckRecord.from_margin(
            "branch_switch",
            SWITCH_TOLERANCE - table.switch_mismatch,
            [table.y_switch],
            domain="table and far-field branches agree at y_switch",
        )
    )
    return report


# ============================================================================
# Bootstrap monitors
# ============================================================================


@dataclass
class _Monitor:
    """Accumulates worst margins of one bound across samples."""

    check_id: str
    kind: CheckKind
    domain: str
    required: bool = False
    notes: str = ""
    trend: List[float] = field(default_factory=list)
    worst: float = math.inf
    worst_loc: Optional[float] = None
    first_violation: Optional[float] = None

    def add(self, margins, locations, when: float) -> None:
        m = np.atleast_1d(np.asarray(margins, dtype=float))
        if m.size == 0:
            return
        m = np.where(np.isfinite(m), m, -1e300)
        i = int(np.argmin(m))
        value = float(m[i])
        self.trend.append(value)
        if value < self.worst:
            self.worst = value
            self.worst_loc = float(np.atleast_1d(locations)[i])
        if value < -EQ_TOL and self.first_violation is None:
            self.first_violation = when

    def record(self) -> CheckRecord:
        if not self.trend:
            return CheckRecord(
                check_id=self.check_id,
                domain=self.domain,
                worst_margin=0.0,
                passed=True,
                kind=self.kind,
                required=self.required,
                notes=(self.notes + "; " if self.notes else "") + "no samples",
            )
        return CheckRecord(
            check_id=self.check_id,
            domain=self.domain,
            worst_margin=self.worst,
            worst_location=self.worst_loc,
            passed=self.worst >= -EQ_TOL,
            kind=self.kind,
            required=self.required,
            notes=self.notes,
            first_violation=self.first_violation,
            trend=self.trend,
        )


def monitor_bootstrap(
    rsnaps: Sequence[RescaledSnapshot],
    modulation: Sequence[ModulationSample],
    profile: ProfileTable,
    h_star: float,
    eps: float,
    M: float = 1e8,
    theta_weight: float = 0.46,
    noise_growth: float = SMOOTH_GROWTH,
) -> VerifyReport:
    """
    Evaluate the bootstrap assumptions and their improved forms along a run.

    Margins are recorded per sample (s for field bounds, t for modulation
    bounds); violations are reported with their first occurrence and never
    stop the evaluation. Fourth-derivative bounds and the third derivative at
    the origin are skipped on snapshots whose gradient growth exceeds
    ``noise_growth``.

    Args:
        rsnaps: Rescaled snapshots in time order
        modulation: Modulation samples in time order
        profile: Unit profile table
        h_star: Background depth (rsv)
        eps: Initial-data scale
        M: Large bootstrap constant
        theta_weight: Weight Θ of the initial slope condition
        noise_growth: Growth beyond which high y-derivatives count as noise

    Returns:
        VerifyReport
    """
    model = rsnaps[0].model if rsnaps else "rsv"
    rsv = model == "rsv"
    root = math.sqrt(h_star)
    theta = (THETA_MAX - theta_weight) / 3.0
    report = VerifyReport(
        title=f"Bootstrap monitors ({model}, eps={eps:g}, M={M:g})",
        parameters={"M": M, "eps": eps, "h_star": h_star, "theta": theta, "model": model},
    )

    def mon(check_id: str, kind: CheckKind, domain: str, **kwargs) -> _Monitor:
        return _Monitor(check_id, kind, domain, **kwargs)

    monitors = {}
    if rsv:
        monitors.update(
            tau_rate=mon("tau_rate", "assumption", "|τ̇| ≤ 8ε/√h_*", required=True),
            tau_rate_close=mon("tau_rate_close", "improved", "|τ̇| ≤ (7/√h_*)e^(-s)"),
            tau_init=mon("tau_init", "monitor", "|τ̇(-ε)| ≤ 3ε/(2√h_*)"),
            Zy_sup=mon("Zy_sup", "assumption", "‖Z_y‖ ≤ (5/√h_*)e^(-5s/2)", required=True),
            Zy_sup_close=mon("Zy_sup_close", "improved", "‖Z_y‖ ≤ (4/√h_*)e^(-5s/2)"),
            Zy_sup_init=mon("Zy_sup_init", "monitor", "‖Z_y(s0)‖ ≤ ε^(5/2)/√h_*"),
            Zy_dec=mon("Zy_dec", "assumption", "|Z_y| ≤ (10/√h_*)e^(-3s/2)/(1+|y|^(2/5))"),
            Zyweight_close=mon(
                "Zyweight_close", "improved", "|Z_y| ≤ (8/√h_*)e^(-3s/2)/(1+|y|^(2/5))"
            ),
        )
    monitors.update(
        tau_rate_factor=mon("tau_rate_factor", "monitor", "1/(1-τ̇) ≤ 1 + ε^(1/2)"),
        Wy_bound=mon("Wy_bound", "assumption", "|W_y - W̄'| ≤ y²/(1000(1+y²))"),
        Wy_bound_close=mon("Wy_bound_close", "improved", "|W_y - W̄'| ≤ y²/(1500(1+y²))"),
        Wy_init=mon("Wy_init", "monitor", "|W_y - W̄'| ≤ y²/(3000(1+y²)) at s0"),
        Wy_dec=mon("Wy_dec", "assumption", "|W_y - W̄'| ≤ 6/(13(1+|y|^(2/5)))"),
        Wy_dec_close=mon("Wy_dec_close", "improved", "|W_y - W̄'| ≤ (6/13-θ)/(1+|y|^(2/5))"),
        Wy_sup=mon("Wy_sup", "monitor", "|W_y| ≤ 2"),
        Wyy_bound=mon("Wyy_bound", "assumption", "|W_yy| ≤ M^(1/8)|y|/(1+y²)^(1/2)"),
        Wy2_close=mon("Wy2_close", "improved", "|W_yy| ≤ M^(1/8)|y|/(2(1+y²)^(1/2))"),
        Wyyy_origin=mon(
            "Wyyy_origin",
            "assumption",
            "|∂y³W(0,s) - 256| ≤ 1",
            required=True,
            notes=f"evaluated while growth ≤ {noise_growth:g}",
        ),
        Wy3_bound=mon("Wy3_bound", "assumption", "‖∂y³W‖ ≤ M^(3/4)"),
        Wy3_close=mon("Wy3_close", "improved", "‖∂y³W‖ ≤ M^(3/4)/2"),
        Wy4_bound=mon(
            "Wy4_bound",
            "assumption",
            "‖∂y⁴W‖ ≤ M",
            notes=f"noise-dominated beyond growth {noise_growth:g}; skipped there",
        ),
        Wy4_close=mon("Wy4_close", "improved", "‖∂y⁴W‖ ≤ M/2"),
        Qy_weight=mon(
            "Qy_weight",
            "monitor",
            "sup |y|^(4/5)|Q_y| e^(s/2) finite",
        ),
    )

    # Modulation bounds, indexed by t.
    if rsv:
        for i, sample in enumerate(modulation):
            lead = sample.tau - sample.t
            if lead <= 0.0:
                continue
            abs_dot = abs(sample.tau_dot)
            monitors["tau_rate"].add(8.0 * eps / root - abs_dot, [sample.t], sample.t)
            monitors["tau_rate_close"].add(7.0 / root * lead - abs_dot, [sample.t], sample.t)
            if i == 0:
                monitors["tau_init"].add(1.5 * eps / root - abs_dot, [sample.t], sample.t)
    for sample in modulation:
        if sample.tau <= sample.t or sample.tau_dot >= 1.0:
            continue
        monitors["tau_rate_factor"].add(
            1.0 + math.sqrt(eps) - 1.0 / (1.0 - sample.tau_dot), [sample.t], sample.t
        )

    mq = M**0.125
    for k, rs in enumerate(rsnaps):
        s = rs.s
        y = rs.y
        a = np.abs(y)
        y2 = y**2
        _, wbar_p, _ = profile_eval(profile, y)
        diff = np.abs(rs.W_y - wbar_p)
        decay = 1.0 + a**0.4

        monitors["Wy_bound"].add(y2 / (1000.0 * (1.0 + y2)) - diff, y, s)
        monitors["Wy_bound_close"].add(y2 / (1500.0 * (1.0 + y2)) - diff, y, s)
        if k == 0:
            monitors["Wy_init"].add(y2 / (3000.0 * (1.0 + y2)) - diff, y, s)
        monitors["Wy_dec"].add(6.0 / (13.0 * decay) - diff, y, s)
        monitors["Wy_dec_close"].add((THETA_MAX - theta) / decay - diff, y, s)
        monitors["Wy_sup"].add(2.0 - np.abs(rs.W_y), y, s)

        if rs.W_yy is not None:
            weight = a / np.sqrt(1.0 + y2)
            monitors["Wyy_bound"].add(mq * weight - np.abs(rs.W_yy), y, s)
            monitors["Wy2_close"].add(0.5 * mq * weight - np.abs(rs.W_yy), y, s)
        if rs.W_yyy is not None:
            i3 = int(np.argmax(np.abs(rs.W_yyy)))
            sup3 = float(np.abs(rs.W_yyy[i3]))
            monitors["Wy3_bound"].add(M**0.75 - sup3, [y[i3]], s)
            monitors["Wy3_close"].add(0.5 * M**0.75 - sup3, [y[i3]], s)
            if rs.growth <= noise_growth:
                monitors["Wyyy_origin"].add(1.0 - abs(rs.at_zero(rs.W_yyy) - 256.0), [0.0], s)
        if rs.W_yyyy is not None and rs.growth <= noise_growth:
            i4 = int(np.argmax(np.abs(rs.W_yyyy)))
            sup4 = float(np.abs(rs.W_yyyy[i4]))
            monitors["Wy4_bound"].add(M - sup4, [y[i4]], s)
            monitors["Wy4_close"].add(0.5 * M - sup4, [y[i4]], s)
        if rs.Q_y is not None:
            weighted = a**0.8 * np.abs(rs.Q_y) * math.exp(0.5 * s)
            j = int(np.argmax(weighted))
            monitors["Qy_weight"].add(
                [0.0 if np.all(np.isfinite(weighted)) else float("nan")], [y[j]], s
            )

        if rsv and rs.Z_y is not None:
            zy = np.abs(rs.Z_y)
            sup_zy = float(zy.max())
            at = [float(y[int(np.argmax(zy))])]
            monitors["Zy_sup"].add(5.0 / root * math.exp(-2.5 * s) - sup_zy, at, s)
            monitors["Zy_sup_close"].add(4.0 / root * math.exp(-2.5 * s) - sup_zy, at, s)
            if k == 0:
                monitors["Zy_sup_init"].add(eps**2.5 / root - sup_zy, at, s)
            monitors["Zy_dec"].add(10.0 / root * math.exp(-1.5 * s) / decay - zy, y, s)
            monitors["Zyweight_close"].add(8.0 / root * math.exp(-1.5 * s) / decay - zy, y, s)

    for monitor in monitors.values():
        report.add(monitor.record())

    failed = [r.check_id for r in report.failures()]
    if failed:
        logger.warning(f"Bootstrap monitors violated: {', '.join(failed)}")
    else:
        logger.info(f"Bootstrap monitors: all {len(report.records)} held")
    return report


def monitor_run(traj: Trajectory) -> VerifyReport:
    """
    Run-level monitors from the scalar series.

    Covers the depth range [h_*/2, (1+√3)h_*/2], the bound 8/3 on ‖G‖ and ‖q‖,
    ‖z‖_{C¹} ≤ 2×initial + 1, and energy drift while the gradient has grown
    at most tenfold.
    """
    cfg = traj.config
    series = traj.series
    report = VerifyReport(
        title=f"Run monitors ({cfg.model}, eps={cfg.eps:g})",
        parameters={"stop_reason": traj.stop_reason, "blowup_flagged": traj.blowup_flagged},
    )
    if not series:
        return report
    t = np.array([s.t for s in series])

    smooth = np.array([traj.growth(s) <= SMOOTH_GROWTH for s in series])
    energies = np.array([s.energy for s in series])
    scale = traj.energy0 if traj.energy0 > 0.0 else 1.0
    drift = np.abs(energies - traj.energy0) / scale
    report.add(
        CheckRecord.from_margin(
            "energy_drift",
            ENERGY_DRIFT_TARGET - drift[smooth],
            t[smooth],
            kind="monitor",
            domain=f"relative drift ≤ {ENERGY_DRIFT_TARGET:g} while growth ≤ {SMOOTH_GROWTH:g}",
            notes=f"max drift {float(drift[smooth].max()) if smooth.any() else 0.0:.3e}",
        )
    )

    if cfg.model == "rsv":
        h_min = 0.5 * cfg.h_star
        h_max = 0.5 * (1.0 + math.sqrt(3.0)) * cfg.h_star
        low = np.array([s.h_min for s in series])
        high = np.array([s.h_max for s in series])
        report.add(
            CheckRecord.from_margin(
                "h_range",
                np.minimum(low - h_min, h_max - high),
                t,
                kind="monitor",
                domain="h_*/2 ≤ h ≤ (1+√3)h_*/2",
            )
        )
        energy_bound = 2.0 * traj.energy0 / h_min**3
        for check_id, key in (("G_bound", "g_sup"), ("q_bound", "q_sup")):
            values = np.array([getattr(s, key) for s in series])
            report.add(
                CheckRecord.from_margin(
                    check_id,
                    NONLOCAL_BOUND - values,
                    t,
                    kind="monitor",
                    domain=f"‖{check_id[0]}‖∞ ≤ 8/3",
                    notes=f"2E0/h_min³ = {energy_bound:.4g}; max {float(values.max()):.4g}",
                )
            )
        z0 = series[0].z_c1
        report.add(
            CheckRecord.from_margin(
                "z_C1",
                2.0 * z0 + 1.0 - np.array([s.z_c1 for s in series]),
                t,
                kind="monitor",
                domain="‖z‖∞ + ‖z_x‖∞ ≤ 2×initial + 1",
            )
        )
    return report
