"""
Modulation tracking, blow-up estimation and self-similar rescaling.

The modulation variables (τ, κ, ξ) are integrated alongside the PDE so that
the rescaled solution

    w(x, t) - κ(t) = e^{-3s/2} W(y, s),  y = (x - ξ)/(τ - t)^{5/2},  s = -log(τ - t),

keeps W(0, s) = 0, W_y(0, s) = -2 and W_yy(0, s) = 0. Rescaled snapshots live
on a fixed graded y-grid so consecutive snapshots can be differenced in s.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from blowuplab.core.elliptic import Grid1D
from blowuplab.core.exceptions import (
    BlowupEstimateError,
    ModulationError,
    RescaleError,
    ResidualError,
)
from blowuplab.core.pde import BLOWUP_REGIME_GROWTH, PhysState, Snapshot, Trajectory
from blowuplab.core.profile import ProfileTable, profile_eval
from blowuplab.schemas import BlowupEstimate, ModulationSample, ProfileDistance, ResidualRecord
from blowuplab.utils.finite_diff import resample, sample_at, sample_rows_at

# κ̇ and ξ̇ are frozen when |∂_x³w(ξ)| falls below this multiple of ε^{-6}.
FREEZE_THRESHOLD = 1e-6

# Largest s-spacing accepted by the residual finite difference.
MAX_DS = 0.1

# Snapshots required in the blow-up regime for a slope-based estimate.
MIN_FIT_SNAPSHOTS = 8

# Nodes kept clear of the domain ends when resampling.
EDGE_NODES = 4

_RSV_SAMPLED = ("z", "zx", "zxx", "q", "qx", "qxx", "G", "w3")
_RB_SAMPLED = ("p", "px", "v3")


@dataclass(frozen=True)
class ModulationState:
    """
    Modulation variables and their rates at time t.

    Attributes:
        t: Physical time
        tau: Predicted blow-up time τ
        kappa: Amplitude shift κ
        xi: Blow-up location ξ
        tau_dot, kappa_dot, xi_dot: Rates at time t
        frozen: κ̇ and ξ̇ were frozen during the last step
    """

    t: float
    tau: float
    kappa: float
    xi: float
    tau_dot: float = 0.0
    kappa_dot: float = 0.0
    xi_dot: float = 0.0
    frozen: bool = False

    @property
    def lead(self) -> float:
        """τ - t, equal to e^{-s}."""
        return self.tau - self.t

    @property
    def s(self) -> float:
        if self.lead <= 0.0:
            raise ModulationError(f"tau={self.tau:.8g} has reached t={self.t:.8g}")
        return -math.log(self.lead)

    def to_y(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.xi) / self.lead**2.5

    def to_x(self, y: np.ndarray) -> np.ndarray:
        return self.xi + self.lead**2.5 * np.asarray(y)

    def to_sample(self) -> ModulationSample:
        return ModulationSample(
            t=self.t,
            tau=self.tau,
            kappa=self.kappa,
            xi=self.xi,
            tau_dot=self.tau_dot,
            kappa_dot=self.kappa_dot,
            xi_dot=self.xi_dot,
            frozen=self.frozen,
        )

    @classmethod
    def from_sample(cls, sample: ModulationSample) -> "ModulationState":
        return cls(**sample.model_dump())

    @classmethod
    def initial(cls, state: PhysState) -> "ModulationState":
        """τ = t + ε (so τ(-ε) = 0), κ = w₀(0), ξ = 0, with rates at the initial state."""
        kappa = sample_at(state.grid.x, state.primary, 0.0)
        mod = cls(t=state.t, tau=state.t + state.eps, kappa=kappa, xi=0.0)
        fields = _sampled_fields(state)
        tau_dot, kappa_dot, xi_dot, frozen = _rates(
            state.model, state.eps, mod.t, mod.tau, mod.kappa, _sample(state, fields, mod.xi)
        )
        return cls(mod.t, mod.tau, mod.kappa, mod.xi, tau_dot, kappa_dot, xi_dot, frozen)


ModulationLike = Union[ModulationState, ModulationSample]


def _sampled_fields(state: PhysState) -> np.ndarray:
    """Stack of the fields the modulation ODEs sample at ξ."""
    grid = state.grid
    nl = state.nonlocal_fields
    if state.model == "rsv":
        z = state.z
        q = nl["q"]
        return np.vstack(
            [
                z,
                grid.d(z, 1),
                grid.d(z, 2),
                q,
                grid.d(q, 1),
                grid.d(q, 2),
                nl["G"],
                grid.d(state.w, 3),
            ]
        )
    p = nl["p"]
    return np.vstack([p, grid.d(p, 1), grid.d(state.v, 3)])


def _sample(state: PhysState, fields: np.ndarray, xi: float) -> Dict[str, float]:
    x = state.grid.x
    if not x[EDGE_NODES] < xi < x[-EDGE_NODES - 1]:
        raise ModulationError(f"xi={xi:.6g} left the grid")
    names = _RSV_SAMPLED if state.model == "rsv" else _RB_SAMPLED
    return dict(zip(names, sample_rows_at(x, fields, xi)))


def _rates(
    model: str, eps: float, t: float, tau: float, kappa: float, v: Dict[str, float]
) -> Tuple[float, float, float, bool]:
    """(τ̇, κ̇, ξ̇, frozen) from field values sampled at ξ."""
    d = tau - t
    if d <= 0.0:
        raise ModulationError(f"tau={tau:.8g} has reached t={t:.8g}")
    guard = FREEZE_THRESHOLD * eps**-6

    if model == "rsv":
        tau_dot = d**2 * v["zx"] ** 2 / 4.0 - 4.0 * d * v["zx"] / 3.0 - 4.0 * d**2 * v["qx"] / 3.0
        if abs(v["w3"]) < guard:
            return tau_dot, 0.0, 0.0, True
        bracket = v["zx"] * v["zxx"] - 8.0 * v["qxx"] / 3.0 - 8.0 * v["zxx"] / (3.0 * d)
        kappa_dot = 2.0 * bracket / (d * v["w3"]) + 8.0 * (v["G"] - v["q"]) / 3.0
        xi_dot = -bracket / v["w3"] + v["z"] / 3.0 + kappa
        return tau_dot, kappa_dot, xi_dot, False

    tau_dot = -(d**2) * v["p"] / 2.0
    if abs(v["v3"]) < guard:
        return tau_dot, 0.0, 0.0, True
    kappa_dot = -2.0 * v["px"] / (d * v["v3"]) - v["px"]
    xi_dot = v["px"] / v["v3"] + kappa
    return tau_dot, kappa_dot, xi_dot, False


def step_modulation(
    mod: ModulationState,
    state: PhysState,
    dt: float,
    state_next: Optional[PhysState] = None,
    fields: Optional[np.ndarray] = None,
    fields_next: Optional[np.ndarray] = None,
) -> ModulationState:
    """
    Advance (τ, κ, ξ) over [t, t + dt] with classical Runge-Kutta.

    Field values at ξ are cubic interpolants of the grid fields; with
    ``state_next`` given, stage values are blended linearly in time between the
    two states.

    Args:
        mod: Modulation state at ``state.t``
        state: PDE state at the start of the step
        dt: Time step
        state_next: PDE state at the end of the step
        fields, fields_next: Precomputed sampled-field stacks

    Returns:
        Modulation state at t + dt

    Raises:
        ModulationError: If τ reaches t or ξ leaves the grid
    """
    fa = _sampled_fields(state) if fields is None else fields
    if state_next is None:
        fb = fa
    else:
        fb = _sampled_fields(state_next) if fields_next is None else fields_next

    frozen = False

    def rates(theta: float, y: np.ndarray) -> np.ndarray:
        nonlocal frozen
        tau, kappa, xi = y
        va = _sample(state, fa, xi)
        vb = va if fb is fa else _sample(state, fb, xi)
        blend = {k: (1.0 - theta) * va[k] + theta * vb[k] for k in va}
        out = _rates(state.model, state.eps, mod.t + theta * dt, tau, kappa, blend)
        frozen = frozen or out[3]
        return np.array(out[:3])

    y0 = np.array([mod.tau, mod.kappa, mod.xi])
    k1 = rates(0.0, y0)
    k2 = rates(0.5, y0 + 0.5 * dt * k1)
    k3 = rates(0.5, y0 + 0.5 * dt * k2)
    k4 = rates(1.0, y0 + dt * k3)
    y1 = y0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    end = rates(1.0, y1)

    if frozen:
        logger.warning(f"Modulation frozen at t={mod.t:.6g}: |∂x³w(ξ)| below guard")
    return ModulationState(
        t=mod.t + dt,
        tau=float(y1[0]),
        kappa=float(y1[1]),
        xi=float(y1[2]),
        tau_dot=float(end[0]),
        kappa_dot=float(end[1]),
        xi_dot=float(end[2]),
        frozen=frozen,
    )


class ModulationTracker:
    """
    Step observer that integrates the modulation ODEs inside a PDE run.

    The sampled-field stack of the last accepted state is reused as the start
    of the next step.
    """

    def __init__(self, state: PhysState):
        self.mod = ModulationState.initial(state)
        self.sample = self.mod.to_sample()
        self._last: Optional[Tuple[PhysState, np.ndarray]] = None

    @classmethod
    def start(cls, state: PhysState) -> "ModulationTracker":
        return cls(state)

    def advance(self, state: PhysState, dt: float, new_state: PhysState) -> ModulationSample:
        if self._last is not None and self._last[0] is state:
            fields = self._last[1]
        else:
            fields = _sampled_fields(state)
        fields_next = _sampled_fields(new_state)

        self.mod = step_modulation(self.mod, state, dt, new_state, fields, fields_next)
        self._last = (new_state, fields_next)
        self.sample = self.mod.to_sample()
        return self.sample


# ============================================================================
# Blow-up time estimates
# ============================================================================


def fit_blowup_time(t: Sequence[float], m: Sequence[float]) -> Tuple[float, float]:
    """
    Root of the least-squares line through m(t) = 1/max(-∂_x w).

    Returns:
        (T*, rms residual of the fit)

    Raises:
        BlowupEstimateError: With fewer than two samples or a nondecreasing fit
    """
    t = np.asarray(t, dtype=float)
    m = np.asarray(m, dtype=float)
    if t.size < 2:
        raise BlowupEstimateError("At least two samples are needed for a blow-up fit")
    slope, intercept = np.polyfit(t, m, 1)
    if not slope < 0.0:
        raise BlowupEstimateError(f"m(t) is not decreasing (fitted slope {slope:.3e})")
    residual = float(np.sqrt(np.mean((np.polyval([slope, intercept], t) - m) ** 2)))
    return float(-intercept / slope), residual


def estimate_blowup(traj: Trajectory, window: int = MIN_FIT_SNAPSHOTS) -> BlowupEstimate:
    """
    Slope-based (T*, x*) from the last ``window`` snapshots in the blow-up regime.

    Args:
        traj: Trajectory of a run
        window: Number of snapshots in the fit

    Returns:
        BlowupEstimate; ``valid`` is False when m(t) is not monotone in the window

    Raises:
        BlowupEstimateError: With fewer than ``MIN_FIT_SNAPSHOTS`` snapshots whose
            gradient has grown at least fourfold
    """
    regime = [s for s in traj.snapshots if traj.growth(s.scalars) >= BLOWUP_REGIME_GROWTH]
    if len(regime) < max(window, MIN_FIT_SNAPSHOTS):
        raise BlowupEstimateError(
            f"Only {len(regime)} snapshots in the blow-up regime, "
            f"need {max(window, MIN_FIT_SNAPSHOTS)}"
        )

    use = regime[-window:]
    t = np.array([s.t for s in use])
    m = np.array([1.0 / -s.scalars.min_dx for s in use])
    method = f"slope-last-{window}"
    if np.any(np.diff(m) >= 0.0):
        return BlowupEstimate(
            method=method, window=window, message="m(t) not monotone in fit window"
        )

    t_star, residual = fit_blowup_time(t, m)
    where = np.array([s.scalars.argmin_x for s in use])
    x_star = float(np.polyval(np.polyfit(t, where, 1), t_star))
    logger.info(f"Slope-based blow-up estimate ({window}): T*={t_star:.6g}, x*={x_star:.4g}")
    return BlowupEstimate(
        method=method,
        t_star=t_star,
        x_star=x_star,
        residual=residual,
        window=window,
        valid=True,
    )


def modulation_blowup_time(
    samples: Sequence[ModulationSample], window: int = MIN_FIT_SNAPSHOTS
) -> BlowupEstimate:
    """Zero of τ(t) - t extrapolated linearly from the last unfrozen samples."""
    usable = [s for s in samples if not s.frozen and s.tau > s.t]
    if len(usable) < 2:
        return BlowupEstimate(method="modulation", message="too few modulation samples")

    use = usable[-window:]
    t = np.array([s.t for s in use])
    lead = np.array([s.tau - s.t for s in use])
    slope, intercept = np.polyfit(t, lead, 1)
    if not slope < 0.0:
        return BlowupEstimate(method="modulation", message="tau - t is not decreasing")

    t_star = float(-intercept / slope)
    xi = np.array([s.xi for s in use])
    x_star = float(np.polyval(np.polyfit(t, xi, 1), t_star))
    residual = float(np.sqrt(np.mean((np.polyval([slope, intercept], t) - lead) ** 2)))
    return BlowupEstimate(
        method="modulation",
        t_star=t_star,
        x_star=x_star,
        residual=residual,
        window=int(t.size),
        valid=True,
    )


# ============================================================================
# Rescaled snapshots
# ============================================================================


def default_y_nodes(core: float = 2.0, core_nodes: int = 201, y_far: float = 1e7) -> np.ndarray:
    """Symmetric graded y-grid: uniform on |y| ≤ core, geometric beyond, one node at 0."""
    inner = np.linspace(0.0, core, core_nodes)
    outer = np.geomspace(core, y_far, 500)[1:]
    positive = np.concatenate((inner, outer))
    return np.concatenate((-positive[:0:-1], positive))


@dataclass
class RescaledSnapshot:
    """Fields of one snapshot in self-similar variables on a y-window."""

    model: str
    t: float
    s: float
    tau: float
    kappa: float
    xi: float
    tau_dot: float
    kappa_dot: float
    xi_dot: float
    y: np.ndarray
    W: np.ndarray
    W_y: np.ndarray
    W_yy: Optional[np.ndarray] = None
    W_yyy: Optional[np.ndarray] = None
    W_yyyy: Optional[np.ndarray] = None
    Z: Optional[np.ndarray] = None
    Z_y: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    Q_y: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    growth: float = 0.0

    def at_zero(self, values: np.ndarray) -> float:
        """Value of a rescaled field at y = 0."""
        hit = np.flatnonzero(self.y == 0.0)
        if hit.size:
            return float(values[hit[0]])
        return float(np.interp(0.0, self.y, values))

    def columns(self) -> Dict[str, np.ndarray]:
        """Columns written to a rescaled CSV."""
        cols = {"y": self.y, "W": self.W, "W_y": self.W_y}
        if self.Z is not None:
            cols["Z"] = self.Z
            cols["Z_y"] = self.Z_y
        if self.Q is not None:
            cols["Q"] = self.Q
        return cols


def rescale_snapshot(
    snap: Snapshot,
    mod: Optional[ModulationLike] = None,
    y_nodes: Optional[np.ndarray] = None,
    window_half_width: float = 0.8,
    growth: float = 0.0,
    grid: Optional[Grid1D] = None,
) -> RescaledSnapshot:
    """
    Map a snapshot to self-similar variables.

    ∂_y^n W = e^{3s/2} e^{-5ns/2} ∂_x^n w, so W_y = (τ - t)∂_x w; Z, Q and G̃
    are resampled directly and Z_y, Q_y carry a factor (τ - t)^{5/2}.

    Args:
        snap: Snapshot with fields on a grid
        mod: Modulation at the snapshot time (defaults to ``snap.modulation``)
        y_nodes: Fixed y-grid (defaults to ``default_y_nodes()``)
        window_half_width: Physical half-width of the resolved window around ξ
        growth: Gradient growth of the snapshot, carried for noise flags
        grid: Grid of the snapshot (rebuilt as uniform from the x column when omitted)

    Returns:
        RescaledSnapshot on the nodes with |x - ξ| ≤ window_half_width

    Raises:
        RescaleError: If τ ≤ t, no modulation is available, or the window is empty
    """
    mod = snap.modulation if mod is None else mod
    if mod is None:
        raise RescaleError(f"Snapshot {snap.index} has no modulation state")
    lead = mod.tau - mod.t
    if lead <= 0.0:
        raise RescaleError(f"tau={mod.tau:.8g} is not after t={mod.t:.8g}")

    model = "rsv" if "w" in snap.fields else "rb"
    x = snap.fields["x"]
    grid = grid_for(snap) if grid is None else grid
    nodes = default_y_nodes() if y_nodes is None else np.asarray(y_nodes, dtype=float)

    scale = lead**2.5
    x_pts = mod.xi + scale * nodes
    lo = max(x[EDGE_NODES], mod.xi - window_half_width)
    hi = min(x[-EDGE_NODES - 1], mod.xi + window_half_width)
    keep = (x_pts >= lo) & (x_pts <= hi)
    if keep.sum() < 3:
        raise RescaleError(
            f"Resolved y-window is empty at t={mod.t:.6g} (tau - t = {lead:.3g})"
        )
    y = nodes[keep]
    x_pts = x_pts[keep]

    primary = snap.fields["w" if model == "rsv" else "v"]
    derivs = [grid.d(primary, n) for n in (1, 2, 3, 4)]

    def at(f: np.ndarray) -> np.ndarray:
        return resample(x, f, x_pts)

    W = (at(primary) - mod.kappa) / lead**1.5
    W_y, W_yy, W_yyy, W_yyyy = (at(d) * lead ** (2.5 * n - 1.5) for n, d in enumerate(derivs, 1))

    nl = snap.fields["q" if model == "rsv" else "p"]
    out = RescaledSnapshot(
        model=model,
        t=mod.t,
        s=-math.log(lead),
        tau=mod.tau,
        kappa=mod.kappa,
        xi=mod.xi,
        tau_dot=mod.tau_dot,
        kappa_dot=mod.kappa_dot,
        xi_dot=mod.xi_dot,
        y=y,
        W=W,
        W_y=W_y,
        W_yy=W_yy,
        W_yyy=W_yyy,
        W_yyyy=W_yyyy,
        Q=at(nl),
        Q_y=at(grid.d(nl)) * scale,
        growth=growth,
    )
    if model == "rsv":
        z = snap.fields["z"]
        out.Z = at(z)
        out.Z_y = at(grid.d(z)) * scale
        out.G = at(snap.fields["G"])
    return out


def unrescale(rsnap: RescaledSnapshot) -> Tuple[np.ndarray, np.ndarray]:
    """Exact inverse map: (x, w) with x = ξ + (τ-t)^{5/2} y and w = κ + (τ-t)^{3/2} W."""
    lead = rsnap.tau - rsnap.t
    return rsnap.xi + lead**2.5 * rsnap.y, rsnap.kappa + lead**1.5 * rsnap.W


def profile_distance(rsnap: RescaledSnapshot, profile: ProfileTable) -> ProfileDistance:
    """
    Weighted distances of W_y to the profile slope plus constraint residuals at y = 0.
    """
    _, wbar_p, _ = profile_eval(profile, rsnap.y)
    diff = np.abs(rsnap.W_y - wbar_p)

    decay = (1.0 + np.abs(rsnap.y) ** 0.4) * diff
    i = int(np.argmax(decay))

    nz = rsnap.y != 0.0
    near = (1.0 + rsnap.y[nz] ** 2) / rsnap.y[nz] ** 2 * diff[nz]
    j = int(np.argmax(near)) if near.size else 0

    return ProfileDistance(
        s=rsnap.s,
        weighted_decay=float(decay[i]),
        weighted_decay_at=float(rsnap.y[i]),
        weighted_near=float(near[j]) if near.size else 0.0,
        weighted_near_at=float(rsnap.y[nz][j]) if near.size else 0.0,
        w0=abs(rsnap.at_zero(rsnap.W)),
        wy0_plus2=abs(rsnap.at_zero(rsnap.W_y) + 2.0),
        wyy0=abs(rsnap.at_zero(rsnap.W_yy)) if rsnap.W_yy is not None else 0.0,
        wyyy0=rsnap.at_zero(rsnap.W_yyy) if rsnap.W_yyy is not None else float("nan"),
    )


def residual_check(
    a: RescaledSnapshot,
    b: RescaledSnapshot,
    include_wy1: bool = False,
    max_ds: float = MAX_DS,
) -> ResidualRecord:
    """
    Residual of the rescaled transport equation between two nearby snapshots.

    W_s is the forward difference in s; every other term is averaged over the
    pair on their common y-nodes.

    Args:
        a: Earlier rescaled snapshot
        b: Later rescaled snapshot on the same y-grid
        include_wy1: Also evaluate the residual of the differentiated equation (rsv)
        max_ds: Largest admissible s-spacing

    Returns:
        ResidualRecord

    Raises:
        ResidualError: If b.s - a.s is not in (0, max_ds]
    """
    ds = b.s - a.s
    if not 0.0 < ds <= max_ds:
        raise ResidualError(ds, max_ds)

    y, ia, ib = np.intersect1d(a.y, b.y, return_indices=True)

    def mid(name: str) -> np.ndarray:
        return 0.5 * (getattr(a, name)[ia] + getattr(b, name)[ib])

    s = 0.5 * (a.s + b.s)
    tau_dot = 0.5 * (a.tau_dot + b.tau_dot)
    kappa = 0.5 * (a.kappa + b.kappa)
    kappa_dot = 0.5 * (a.kappa_dot + b.kappa_dot)
    xi_dot = 0.5 * (a.xi_dot + b.xi_dot)
    denom = 1.0 - tau_dot
    e_half = math.exp(0.5 * s)
    e_three_half = math.exp(1.5 * s)

    W = mid("W")
    W_y = mid("W_y")
    W_s = (b.W[ib] - a.W[ia]) / ds

    U = 2.5 * y + W / denom + e_three_half * (kappa - xi_dot) / denom
    if a.model == "rsv":
        Z = mid("Z")
        U = U + e_three_half * Z / (3.0 * denom)
        forcing = 8.0 * e_half * (mid("G") - mid("Q")) / (3.0 * denom)
        residual = W_s - 1.5 * W + U * W_y + e_half * kappa_dot / denom - forcing
    else:
        residual = (
            W_s - 1.5 * W + U * W_y + e_half * kappa_dot / denom
            + math.exp(3.0 * s) * mid("Q_y") / denom
        )

    sup_wy1 = None
    l2_wy1 = None
    if include_wy1 and a.model == "rsv":
        Z_y = mid("Z_y")
        Wy_s = (b.W_y[ib] - a.W_y[ia]) / ds
        damping = 1.0 + W_y / (2.0 * denom) - 4.0 * e_three_half * Z_y / (3.0 * denom)
        res1 = (
            Wy_s + damping * W_y + U * mid("W_yy")
            + 8.0 * e_half * mid("Q_y") / (3.0 * denom)
            - math.exp(3.0 * s) * Z_y**2 / (2.0 * denom)
        )
        sup_wy1 = float(np.max(np.abs(res1)))
        l2_wy1 = float(np.sqrt(np.mean(res1**2)))

    return ResidualRecord(
        s_mid=s,
        ds=ds,
        n_points=int(y.size),
        sup=float(np.max(np.abs(residual))),
        l2=float(np.sqrt(np.mean(residual**2))),
        sup_wy1=sup_wy1,
        l2_wy1=l2_wy1,
    )


def rescale_trajectory(
    traj: Trajectory,
    window_half_width: Optional[float] = None,
    y_nodes: Optional[np.ndarray] = None,
) -> List[RescaledSnapshot]:
    """Rescale every snapshot that carries a modulation state with τ > t."""
    half = traj.config.window_half_width if window_half_width is None else window_half_width
    nodes = default_y_nodes() if y_nodes is None else y_nodes
    out = []
    for snap in traj.snapshots:
        if snap.modulation is None or snap.modulation.tau <= snap.modulation.t:
            continue
        try:
            out.append(
                rescale_snapshot(
                    snap, None, nodes, half, growth=traj.growth(snap.scalars), grid=traj.grid
                )
            )
        except RescaleError as e:
            logger.warning(f"Skipping snapshot {snap.index}: {e}")
    return out


def grid_for(snap: Snapshot, stretch: float = 0.0) -> Grid1D:
    """
    Grid of a snapshot's x column.

    Raises:
        RescaleError: If the column does not match a grid with this stretch
    """
    x = snap.fields["x"]
    grid = Grid1D(float(x[0]), float(x[-1]), int(x.size), stretch)
    if not np.allclose(grid.x, x, rtol=1e-9, atol=1e-12):
        raise RescaleError(f"Snapshot {snap.index} x column does not match stretch={stretch:g}")
    return grid
