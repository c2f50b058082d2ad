"""
Hunter–Saxton self-similar profiles.

The profile W̄_β is the odd, decreasing solution of

    (1 + W̄'/2) W̄' + (W̄ + 5y/2) W̄'' = 0,   W̄(0) = 0, W̄'(0) = -2, W̄''(0) = 0,

with W̄'''(0) = 256β and sub-linear growth |W̄| ~ y^{3/5}. Along the solution
the slope p = W̄' obeys the reduced first-order law

    p' = 2 √β (2 + p)^{1/2} (-p)^{7/2},

which is what the table is integrated from. Tables store y ≥ 0 only; odd
symmetry is applied on evaluation, and beyond ``y_switch`` the leading far-field
asymptotics replace the table.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple, Union

import numpy as np
from loguru import logger
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from blowuplab.core.exceptions import ProfileConvergenceError, ProfileError

ArrayLike = Union[float, np.ndarray]

# Taylor coefficients of W̄_1 at the origin (odd powers y, y^3, y^5, y^7).
_TAYLOR_W = (-2.0, 128.0 / 3.0, -57344.0 / 15.0, 150470656.0 / 315.0)

# Relative agreement required between table and far-field branch.
SWITCH_TOLERANCE = 0.01


@dataclass(frozen=True, eq=False)
class ProfileTable:
    """
    Tabulated profile W̄_β on a graded grid y ≥ 0.

    Attributes:
        beta: Profile parameter, W̄'''(0) = 256 beta
        y_nodes: Increasing nodes, first node is 0
        w_vals: W̄ at the nodes
        wp_vals: W̄' at the nodes
        wpp_vals: W̄'' at the nodes
        y_switch: Where evaluation hands over to the far-field branch
        rel_tol: Integrator tolerance used to build the table
        switch_mismatch: Largest relative branch mismatch at ``y_switch``
    """

    beta: float
    y_nodes: np.ndarray
    w_vals: np.ndarray
    wp_vals: np.ndarray
    wpp_vals: np.ndarray
    y_switch: float
    rel_tol: float
    switch_mismatch: float = 0.0

    @property
    def asym_coeffs(self) -> Tuple[float, float, float]:
        """Far-field constants of W̄, W̄', W̄'' (magnitudes)."""
        c = (50.0 * self.beta) ** (-0.2)
        return 5.0 * c / 3.0, c, 0.4 * c

    @property
    def y_max(self) -> float:
        return float(self.y_nodes[-1])

    @cached_property
    def _w_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.y_nodes, self.w_vals, self.wp_vals)

    @cached_property
    def _wp_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.y_nodes, self.wp_vals, self.wpp_vals)

    def summary(self) -> dict:
        """Scalar facts about the table for reports and manifests."""
        return {
            "beta": self.beta,
            "rel_tol": self.rel_tol,
            "y_switch": self.y_switch,
            "y_max": self.y_max,
            "nodes": int(self.y_nodes.size),
            "switch_mismatch": self.switch_mismatch,
            "third_derivative_at_0": float(third_derivative(self, 0.0)),
            "weq_residual": profile_residual(self),
        }


def reduced_rhs(p: ArrayLike, beta: float = 1.0) -> ArrayLike:
    """
    Right-hand side of the reduced profile ODE: W̄'' on y ≥ 0 as a function of p = W̄'.

    Args:
        p: Slope values W̄' in [-2, 0]
        beta: Profile parameter

    Returns:
        2 √β (2+p)^{1/2} (-p)^{7/2}, evaluated with p clipped to [-2, 0]
    """
    p = np.clip(p, -2.0, 0.0)
    return 2.0 * math.sqrt(beta) * np.sqrt(2.0 + p) * (-p) ** 3.5


def taylor_start(y: float, beta: float = 1.0) -> Tuple[float, float]:
    """
    Seventh-order Taylor values (W̄, W̄') near the origin.

    The coefficient of y^{2k+1} scales like beta^k.
    """
    w = 0.0
    wp = 0.0
    for k, coeff in enumerate(_TAYLOR_W):
        scaled = coeff * beta**k
        w += scaled * y ** (2 * k + 1)
        wp += (2 * k + 1) * scaled * y ** (2 * k)
    return w, wp


def far_field(a: ArrayLike, beta: float = 1.0) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """Leading-order far-field (W̄, W̄', W̄'') for a = |y| > 0, positive side."""
    c = (50.0 * beta) ** (-0.2)
    a = np.asarray(a, dtype=float)
    return -5.0 * c / 3.0 * a**0.6, -c * a ** (-0.4), 0.4 * c * a ** (-1.4)


def closed_form_point(p: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """
    Exact (y, W̄_1) on the unit profile parametrized by its slope p in (-2, 0).

    Separation of variables in the reduced ODE gives

        y = (2+p)^{1/2} (2p² - 2p + 3) / (30 (-p)^{5/2}),
        W̄ = -5y/2 + (2+p)^{1/2} / (4 (-p)^{5/2}).
    """
    p = np.asarray(p, dtype=float)
    root = np.sqrt(2.0 + p)
    q52 = (-p) ** 2.5
    y = root * (2.0 * p**2 - 2.0 * p + 3.0) / (30.0 * q52)
    w = -2.5 * y + root / (4.0 * q52)
    return y, w


def _reduced_system(_y: float, state: np.ndarray, beta: float) -> list:
    p = min(max(state[1], -2.0), 0.0)
    return [state[1], 2.0 * math.sqrt(beta) * math.sqrt(2.0 + p) * (-p) ** 3.5]


def _find_switch(
    nodes: np.ndarray, w: np.ndarray, wp: np.ndarray, wpp: np.ndarray, beta: float
) -> Tuple[float, float]:
    """Smallest node from which table and far-field branch agree within tolerance."""
    fw, fwp, fwpp = far_field(nodes, beta)
    mismatch = np.maximum.reduce(
        [
            np.abs(w - fw) / np.abs(fw),
            np.abs(wp - fwp) / np.abs(fwp),
            np.abs(wpp - fwpp) / np.abs(fwpp),
        ]
    )
    ok = mismatch <= SWITCH_TOLERANCE
    tail_ok = np.logical_and.accumulate(ok[::-1])[::-1]
    if not tail_ok.any():
        logger.warning(
            f"Far-field branch never within {SWITCH_TOLERANCE:.0%} of the table; "
            f"using table up to y_max={nodes[-1]:.3g} (mismatch {mismatch[-1]:.3%})"
        )
        return float(nodes[-1]), float(mismatch[-1])
    idx = int(np.argmax(tail_ok))
    return float(nodes[idx]), float(mismatch[idx])


def solve_profile(
    beta: float = 1.0,
    y_max: float = 1e8,
    rel_tol: float = 1e-12,
    ratio: float = 1.05,
) -> ProfileTable:
    """
    Integrate the reduced profile ODE from a Taylor start to ``y_max``.

    Args:
        beta: Profile parameter (> 0)
        y_max: Last tabulated similarity coordinate (≥ 10)
        rel_tol: Integrator relative tolerance in (1e-14, 1e-4)
        ratio: Geometric node ratio

    Returns:
        ProfileTable

    Raises:
        ProfileError: If arguments are out of range
        ProfileConvergenceError: If the integrator fails or W̄' leaves [-2, 0]
    """
    if not beta > 0:
        raise ProfileError(f"beta must be positive, got {beta}")
    if not y_max >= 10:
        raise ProfileError(f"y_max must be at least 10, got {y_max}")
    if not 1e-14 < rel_tol < 1e-4:
        raise ProfileError(f"rel_tol must lie in (1e-14, 1e-4), got {rel_tol}")
    if not 1.0 < ratio <= 1.5:
        raise ProfileError(f"node ratio must lie in (1, 1.5], got {ratio}")

    # The profile lives on the length scale beta^{-1/2}.
    y0 = rel_tol ** (1.0 / 3.0) * min(1.0, beta ** (-0.5))
    w0, p0 = taylor_start(y0, beta)
    n_nodes = int(math.ceil(math.log(y_max / y0) / math.log(ratio))) + 1
    nodes = np.geomspace(y0, y_max, n_nodes)

    logger.debug(f"Integrating profile beta={beta} from y0={y0:.3e} over {n_nodes} nodes")
    sol = solve_ivp(
        _reduced_system,
        (y0, y_max),
        [w0, p0],
        method="RK45",
        t_eval=nodes,
        rtol=rel_tol,
        atol=rel_tol * 1e-3,
        args=(beta,),
    )

    if not sol.success or sol.y.shape[1] != nodes.size:
        last_y = float(sol.t[-1]) if sol.t.size else y0
        last_p = float(sol.y[1, -1]) if sol.y.size else p0
        raise ProfileConvergenceError(
            last_y=last_y,
            last_residual=abs(float(reduced_rhs(last_p, beta))),
            message=f"Profile integrator stopped at y={last_y:.6g}: {sol.message}",
        )

    w = sol.y[0]
    wp = sol.y[1]
    excursion = max(float(np.max(wp)), float(-2.0 - np.min(wp)))
    if excursion > rel_tol:
        bad = int(np.argmax(np.maximum(wp, -2.0 - wp)))
        raise ProfileConvergenceError(
            last_y=float(nodes[bad]),
            last_residual=excursion,
            message=f"W' left [-2, 0] by {excursion:.3e} near y={nodes[bad]:.6g}",
        )
    wp = np.clip(wp, -2.0, 0.0)
    wpp = reduced_rhs(wp, beta)

    y_switch, mismatch = _find_switch(nodes, w, wp, wpp, beta)

    table = ProfileTable(
        beta=beta,
        y_nodes=np.concatenate(([0.0], nodes)),
        w_vals=np.concatenate(([0.0], w)),
        wp_vals=np.concatenate(([-2.0], wp)),
        wpp_vals=np.concatenate(([0.0], wpp)),
        y_switch=y_switch,
        rel_tol=rel_tol,
        switch_mismatch=mismatch,
    )
    logger.info(
        f"Profile beta={beta}: {table.y_nodes.size} nodes, y_switch={y_switch:.4g} "
        f"(branch mismatch {mismatch:.3%})"
    )
    return table


def profile_eval(table: ProfileTable, y: ArrayLike) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """
    Evaluate (W̄, W̄', W̄'') at arbitrary y.

    Args:
        table: Profile table
        y: Scalar or array of similarity coordinates

    Returns:
        Tuple of W̄, W̄', W̄'' with the shape of ``y``
    """
    y_arr = np.asarray(y, dtype=float)
    a = np.abs(y_arr).ravel()
    sign = np.sign(y_arr).ravel()

    w = np.empty_like(a)
    wp = np.empty_like(a)
    inner = a <= table.y_switch
    outer = ~inner

    if inner.any():
        w[inner] = table._w_spline(a[inner])
        wp[inner] = np.clip(table._wp_spline(a[inner]), -2.0, 0.0)
    if outer.any():
        fw, fwp, _ = far_field(a[outer], table.beta)
        w[outer] = fw
        wp[outer] = fwp
    wpp = reduced_rhs(wp, table.beta)

    w = sign * w
    wpp = sign * wpp
    if y_arr.ndim == 0:
        return float(w[0]), float(wp[0]), float(wpp[0])
    shape = y_arr.shape
    return w.reshape(shape), wp.reshape(shape), wpp.reshape(shape)


def third_derivative(table: ProfileTable, y: ArrayLike) -> ArrayLike:
    """
    W̄''' from differentiating the reduced ODE: 2β p⁶ (-14 - 8p), p = W̄'(y).

    Even in y; equals 256β at the origin.
    """
    _, p, _ = profile_eval(table, y)
    p = np.asarray(p, dtype=float)
    out = 2.0 * table.beta * p**6 * (-14.0 - 8.0 * p)
    return float(out) if out.ndim == 0 else out


def rescale_profile(table_unit: ProfileTable, beta: float) -> ProfileTable:
    """
    Map the unit profile to W̄_β(y) = λ W̄_1(y/λ), λ = β^{-1/2}.

    Raises:
        ProfileError: If beta ≤ 0 or the input is not the unit profile
    """
    if not beta > 0:
        raise ProfileError(f"beta must be positive, got {beta}")
    if abs(table_unit.beta - 1.0) > 1e-12:
        raise ProfileError(f"rescaling needs the beta=1 table, got beta={table_unit.beta}")

    lam = beta ** (-0.5)
    return ProfileTable(
        beta=beta,
        y_nodes=lam * table_unit.y_nodes,
        w_vals=lam * table_unit.w_vals,
        wp_vals=table_unit.wp_vals.copy(),
        wpp_vals=table_unit.wpp_vals / lam,
        y_switch=lam * table_unit.y_switch,
        rel_tol=table_unit.rel_tol,
        switch_mismatch=table_unit.switch_mismatch,
    )


def profile_residual_nodes(table: ProfileTable) -> np.ndarray:
    """Pointwise |(1 + W̄'/2)W̄' + (W̄ + 5y/2)W̄''| at the table nodes."""
    p = table.wp_vals
    return np.abs((1.0 + 0.5 * p) * p + (table.w_vals + 2.5 * table.y_nodes) * table.wpp_vals)


def profile_residual(table: ProfileTable, y_limit: float = None) -> float:
    """
    Largest residual of the second-order profile equation over the nodes.

    Args:
        table: Profile table
        y_limit: Only nodes with y ≤ y_limit are included when given

    Returns:
        Maximum residual
    """
    res = profile_residual_nodes(table)
    if y_limit is not None:
        res = res[table.y_nodes <= y_limit]
    return float(res.max()) if res.size else 0.0


def is_monotone(table: ProfileTable) -> bool:
    """W̄' strictly increases toward 0 away from the origin."""
    return bool(np.all(np.diff(table.wp_vals) > 0.0))
