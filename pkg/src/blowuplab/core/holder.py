"""
Hölder semi-norms of gridded fields and log-log blow-up rate fits.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from blowuplab.core.elliptic import Grid1D
from blowuplab.core.exceptions import HolderError, RateFitError
from blowuplab.schemas import SlopeFit

MAX_PAIR_NODES = 2000
MIN_WINDOW_NODES = 8
MIN_RATE_SAMPLES = 6
MIN_LEAD_SPAN = 4.0

# Rows of the pair matrix evaluated at once.
_CHUNK = 256


def expected_rate(alpha: float) -> float:
    """Blow-up exponent of [w]_{C^α} near the singular point: -(5α - 3)/2, or 0 below α = 3/5."""
    return -max(0.0, (5.0 * alpha - 3.0) / 2.0)


def rate_tolerance(alpha: float) -> float:
    """Acceptance band around the expected slope."""
    return 0.1 if alpha <= 0.6 + 1e-12 else 0.15


def window_nodes(
    grid: Grid1D,
    window: Tuple[float, float],
    anchor: Optional[float] = None,
    max_nodes: int = MAX_PAIR_NODES,
) -> np.ndarray:
    """
    Node indices of a window, strided down to at most ``max_nodes``.

    The node nearest ``anchor`` (typically the argmin of ∂_x w) takes the place
    of the closest strided node.

    Raises:
        HolderError: If the window has fewer than 8 nodes
    """
    x = grid.x
    a, b = window
    idx = np.flatnonzero((x >= a) & (x <= b))
    if idx.size < MIN_WINDOW_NODES:
        raise HolderError(f"Window [{a:.4g}, {b:.4g}] holds {idx.size} nodes, need 8")
    if idx.size <= max_nodes:
        return idx

    stride = int(math.ceil(idx.size / max_nodes))
    sub = idx[::stride].copy()
    if anchor is not None and a <= anchor <= b:
        k = grid.nearest_index(anchor)
        sub[np.argmin(np.abs(sub - k))] = k
        sub = np.unique(sub)
    return sub


def holder_seminorm(
    field: np.ndarray,
    grid: Grid1D,
    alpha: float,
    window: Tuple[float, float],
    anchor: Optional[float] = None,
    max_nodes: int = MAX_PAIR_NODES,
) -> float:
    """
    Largest |f(x_i) - f(x_j)| / |x_i - x_j|^α over node pairs in a window.

    Pairs are taken over ``window_nodes``, so large windows are subsampled by
    stride with the anchor node kept.

    Args:
        field: Values on ``grid``
        grid: Grid
        alpha: Exponent in (0, 1]
        window: Closed interval [a, b]
        anchor: Coordinate whose nearest node must be included
        max_nodes: Subsampling threshold

    Returns:
        Semi-norm estimate

    Raises:
        HolderError: If alpha is outside (0, 1] or the window has fewer than 8 nodes
    """
    if not 0.0 < alpha <= 1.0:
        raise HolderError(f"Hölder exponent must lie in (0, 1], got {alpha}")

    idx = window_nodes(grid, window, anchor, max_nodes)
    xs = grid.x[idx]
    fs = np.asarray(field, dtype=float)[idx]
    best = 0.0
    for start in range(0, xs.size, _CHUNK):
        dist = np.abs(xs[start : start + _CHUNK, None] - xs[None, :])
        jump = np.abs(fs[start : start + _CHUNK, None] - fs[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0.0, jump / dist**alpha, 0.0)
        best = max(best, float(ratio.max()))
    return best


@dataclass
class SeminormSeries:
    """
    Semi-norm values over time for one exponent and window.

    Attributes:
        alpha: Exponent
        window: Spatial window [a, b]
        t: Strictly increasing sample times
        values: Nonnegative semi-norms
    """

    alpha: float
    window: Tuple[float, float]
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.t.shape != self.values.shape:
            raise HolderError("Series times and values differ in length")
        if np.any(np.diff(self.t) <= 0.0):
            raise HolderError("Series times must be strictly increasing")
        if np.any(self.values < 0.0):
            raise HolderError("Semi-norm values must be nonnegative")

    @classmethod
    def from_fields(
        cls,
        alpha: float,
        window: Tuple[float, float],
        grid: Grid1D,
        times: Sequence[float],
        fields: Sequence[np.ndarray],
        anchors: Optional[Sequence[float]] = None,
    ) -> "SeminormSeries":
        """Evaluate the semi-norm on each field of a sequence of snapshots."""
        values = [
            holder_seminorm(f, grid, alpha, window, None if anchors is None else anchors[i])
            for i, f in enumerate(fields)
        ]
        return cls(alpha, tuple(window), np.asarray(times), np.asarray(values))

    def rows(self, t_star: float) -> List[Tuple[float, float, float]]:
        """(t, T* - t, value) rows for CSV export."""
        return [(float(t), float(t_star - t), float(v)) for t, v in zip(self.t, self.values)]


def fit_window_indices(
    growth: Sequence[float], low: float = 4.0, high: float = 20.0
) -> np.ndarray:
    """Indices of samples whose gradient growth lies in [low, high]."""
    g = np.asarray(growth, dtype=float)
    return np.flatnonzero((g >= low) & (g <= high))


def fit_blowup_rate(
    series: SeminormSeries,
    t_star: float,
    expected: Optional[float] = None,
    tolerance: Optional[float] = None,
) -> SlopeFit:
    """
    Least-squares slope of log(value) against log(T* - t).

    Args:
        series: Semi-norm series
        t_star: Blow-up time
        expected: Expected slope (defaults to the singular-point exponent)
        tolerance: Acceptance band (defaults by exponent)

    Returns:
        SlopeFit

    Raises:
        RateFitError: With fewer than 6 usable samples, a lead-time span below 4,
            or nonpositive values
    """
    lead = t_star - series.t
    usable = lead > 0.0
    if usable.sum() < MIN_RATE_SAMPLES:
        raise RateFitError(f"Only {int(usable.sum())} samples before T*, need {MIN_RATE_SAMPLES}")

    lead = lead[usable]
    values = series.values[usable]
    if np.any(values <= 0.0):
        raise RateFitError("Semi-norm series has nonpositive values")
    span = lead.max() / lead.min()
    if span < MIN_LEAD_SPAN:
        raise RateFitError(f"T* - t spans a factor {span:.2f}, need {MIN_LEAD_SPAN:g}")

    log_lead = np.log(lead)
    log_val = np.log(values)
    slope, intercept = np.polyfit(log_lead, log_val, 1)
    residual = float(np.sqrt(np.mean((slope * log_lead + intercept - log_val) ** 2)))

    expected = expected_rate(series.alpha) if expected is None else expected
    tolerance = rate_tolerance(series.alpha) if tolerance is None else tolerance
    passed = abs(slope - expected) <= tolerance
    logger.debug(
        f"Rate fit alpha={series.alpha:g} window={series.window}: slope {slope:.4f} "
        f"(expected {expected:.4f})"
    )
    return SlopeFit(
        alpha=series.alpha,
        window=series.window,
        slope=float(slope),
        expected=expected,
        intercept=float(intercept),
        residual=residual,
        n_samples=int(lead.size),
        tolerance=tolerance,
        passed=bool(passed),
    )
