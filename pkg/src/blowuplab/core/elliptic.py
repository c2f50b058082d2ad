"""
One-dimensional elliptic solves behind the nonlocal forcing terms.

Two self-adjoint operators are discretized on a truncated line:

- ``Ih``: q ↦ h q - (h³ q_x)_x with homogeneous Neumann ends, solved for
  I_h q = h·rhs, i.e. q - h^{-1}(h³ q_x)_x = rhs.
- ``Helmholtz``: p ↦ p - p_xx with Robin ends p_x = ±p that match e^{-|x|} decay.

Both are assembled in finite-volume form: fluxes sit at half nodes and each
row is weighted by its control width (halved at the ends), so the matrices
are symmetric positive definite tridiagonals factored once with a banded
Cholesky decomposition. On a uniform grid this is the usual three-point
scheme scaled by dx.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from loguru import logger
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from blowuplab.core.exceptions import EllipticSolveError, GridError, NonPhysicalStateError
from blowuplab.utils.finite_diff import cumulative_integral, derivative, integral

# Normwise relative residual accepted from a banded solve.
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Grid1D:
    """
    Grid on the truncated line [x_min, x_max].

    With ``stretch = 0`` the nodes are uniform. A positive ``stretch`` a
    clusters them at the origin through x = L sinh(aξ)/sinh(a) with ξ uniform
    on [-1, 1]; the spacing at 0 is then about a/sinh(a) times the uniform one.
    Derivatives on a stretched grid use the same stencils in ξ and the chain
    rule.

    Attributes:
        x_min: Left end (< 0)
        x_max: Right end (> 0)
        n: Number of nodes (≥ 16)
        stretch: Clustering strength a (≥ 0)
    """

    x_min: float
    x_max: float
    n: int
    stretch: float = 0.0

    def __post_init__(self):
        if self.n < 16:
            raise GridError(f"Grid needs at least 16 nodes, got {self.n}")
        if not self.x_min < 0.0 < self.x_max:
            raise GridError(f"Grid must straddle 0, got [{self.x_min}, {self.x_max}]")
        if self.stretch < 0.0 or not math.isfinite(self.stretch):
            raise GridError(f"Grid stretch must be finite and ≥ 0, got {self.stretch}")
        if self.stretch > 0.0 and not math.isclose(-self.x_min, self.x_max, rel_tol=1e-12):
            raise GridError(f"Stretched grid must be symmetric, got [{self.x_min}, {self.x_max}]")

    @classmethod
    def symmetric(cls, half_length: float, n: int, stretch: float = 0.0) -> "Grid1D":
        """Grid on [-L, L]."""
        return cls(-float(half_length), float(half_length), int(n), float(stretch))

    @property
    def uniform(self) -> bool:
        return self.stretch == 0.0

    @property
    def dxi(self) -> float:
        """Spacing of the uniform computational coordinate ξ ∈ [-1, 1]."""
        return 2.0 / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        if self.uniform:
            return np.linspace(self.x_min, self.x_max, self.n)
        a = self.stretch
        xi = np.linspace(-1.0, 1.0, self.n)
        x = self.x_max * np.sinh(a * xi) / math.sinh(a)
        x[0], x[-1] = self.x_min, self.x_max
        return x

    @cached_property
    def metric(self) -> np.ndarray:
        """dx/dξ at each node."""
        if self.uniform:
            return np.full(self.n, 0.5 * (self.x_max - self.x_min))
        a = self.stretch
        xi = np.linspace(-1.0, 1.0, self.n)
        return self.x_max * a * np.cosh(a * xi) / math.sinh(a)

    @cached_property
    def spacing(self) -> np.ndarray:
        """Local node spacing dx/dξ·Δξ."""
        return self.metric * self.dxi

    @property
    def dx(self) -> float:
        """Smallest node spacing (the uniform spacing when unstretched)."""
        if self.uniform:
            return (self.x_max - self.x_min) / (self.n - 1)
        return float(np.min(np.diff(self.x)))

    @cached_property
    def control_widths(self) -> np.ndarray:
        """Finite-volume widths (x_{i+1} - x_{i-1})/2, halved cells at the ends."""
        gaps = np.diff(self.x)
        widths = np.empty(self.n)
        widths[1:-1] = 0.5 * (gaps[:-1] + gaps[1:])
        widths[0] = 0.5 * gaps[0]
        widths[-1] = 0.5 * gaps[-1]
        return widths

    def d(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        """
        ``order``-th x-derivative of a nodal field.

        Uniform grids use the fourth-order stencils directly; stretched grids
        apply the first-derivative stencil in ξ ``order`` times, dividing by
        the metric each time.
        """
        if self.uniform:
            return derivative(f, self.dx, order)
        if not 1 <= order <= 4:
            raise ValueError(f"Unsupported derivative order: {order}")
        g = np.asarray(f, dtype=float)
        for _ in range(order):
            g = derivative(g, self.dxi, 1) / self.metric
        return g

    def integrate(self, f: np.ndarray) -> float:
        """Trapezoid integral over the whole grid."""
        if self.uniform:
            return integral(f, self.dx)
        return float(trapezoid(f, self.x))

    def cumulative(self, f: np.ndarray) -> np.ndarray:
        """Cumulative trapezoid integral from the left end, starting at zero."""
        if self.uniform:
            return cumulative_integral(f, self.dx)
        return cumulative_trapezoid(f, self.x, initial=0.0)

    def nearest_index(self, x0: float) -> int:
        """Index of the node closest to ``x0``."""
        if self.uniform:
            return int(np.clip(round((x0 - self.x_min) / self.dx), 0, self.n - 1))
        x = self.x
        i = int(np.clip(np.searchsorted(x, x0), 1, self.n - 1))
        return i - 1 if abs(x[i - 1] - x0) <= abs(x[i] - x0) else i


@dataclass(frozen=True, eq=False)
class EllipticOperator:
    """
    Discrete self-adjoint elliptic operator with a cached banded factorization.

    Attributes:
        kind: "Ih" or "Helmholtz"
        grid: Grid the operator acts on
        h: Depth field (required for ``Ih``)
        boundary: "neumann" or "robin"
    """

    kind: str
    grid: Grid1D
    h: Optional[np.ndarray] = None
    boundary: str = "neumann"

    def __post_init__(self):
        if self.kind not in ("Ih", "Helmholtz"):
            raise ValueError(f"Unknown operator kind: {self.kind}")
        if self.boundary not in ("neumann", "robin"):
            raise ValueError(f"Unknown boundary condition: {self.boundary}")
        if self.kind == "Ih":
            if self.h is None or self.h.shape != (self.grid.n,):
                raise ValueError("Ih operator needs a depth field on the grid")
            if not np.all(np.isfinite(self.h)):
                raise EllipticSolveError(self.kind, message="Depth field is not finite")
            if np.min(self.h) <= 0.0:
                i = int(np.argmin(self.h))
                raise NonPhysicalStateError(float(self.h[i]), float(self.grid.x[i]))

    @classmethod
    def ih(cls, grid: Grid1D, h: np.ndarray) -> "EllipticOperator":
        return cls("Ih", grid, np.asarray(h, dtype=float), "neumann")

    @classmethod
    def helmholtz(cls, grid: Grid1D) -> "EllipticOperator":
        return cls("Helmholtz", grid, None, "robin")

    @cached_property
    def mass(self) -> np.ndarray:
        """Diagonal mass weights: h (or 1) times the control widths."""
        widths = self.grid.control_widths
        return widths.copy() if self.h is None else self.h * widths

    @cached_property
    def bands(self) -> np.ndarray:
        """Upper banded storage (superdiagonal, diagonal) of the symmetric matrix."""
        n = self.grid.n
        gaps = np.diff(self.grid.x)
        if self.h is None:
            flux = np.ones(n - 1)
        else:
            h3 = self.h**3
            flux = 0.5 * (h3[:-1] + h3[1:])
        coupling = flux / gaps

        diag = self.mass.copy()
        diag[:-1] += coupling
        diag[1:] += coupling
        if self.boundary == "robin":
            diag[0] += 1.0
            diag[-1] += 1.0

        ab = np.zeros((2, n))
        ab[0, 1:] = -coupling
        ab[1, :] = diag
        return ab

    @cached_property
    def _factor(self) -> np.ndarray:
        try:
            return cholesky_banded(self.bands, lower=False)
        except LinAlgError as e:
            raise EllipticSolveError(self.kind, message=f"{self.kind} factorization failed: {e}")

    def apply(self, q: np.ndarray) -> np.ndarray:
        """Matrix-vector product with the assembled (row-weighted) matrix."""
        ab = self.bands
        out = ab[1] * q
        out[:-1] += ab[0, 1:] * q[1:]
        out[1:] += ab[0, 1:] * q[:-1]
        return out

    def solve(self, rhs: np.ndarray, check: bool = True) -> np.ndarray:
        """
        Solve the operator equation for a right-hand side given pointwise.

        Args:
            rhs: Pointwise right-hand side (G for Ih, ½v_x² for Helmholtz)
            check: Verify the normwise relative residual

        Returns:
            Solution field

        Raises:
            EllipticSolveError: On non-finite input or a residual above tolerance
        """
        rhs = np.asarray(rhs, dtype=float)
        if not np.all(np.isfinite(rhs)):
            raise EllipticSolveError(self.kind, message=f"{self.kind} right-hand side not finite")

        b = self.mass * rhs
        q = cho_solve_banded((self._factor, False), b)

        if check:
            residual = self.relative_residual(q, b)
            if not residual <= RESIDUAL_TOL:
                raise EllipticSolveError(self.kind, residual)
        return q

    def relative_residual(self, q: np.ndarray, b: np.ndarray) -> float:
        """‖Aq - b‖∞ / (‖A‖∞‖q‖∞ + ‖b‖∞)."""
        ab = self.bands
        norm_a = np.max(np.abs(ab[1]) + 2.0 * np.abs(np.concatenate((ab[0, 1:], [0.0]))))
        denom = norm_a * np.max(np.abs(q)) + np.max(np.abs(b))
        if denom == 0.0:
            return 0.0
        return float(np.max(np.abs(self.apply(q) - b)) / denom)


def compute_G(h: np.ndarray, u: np.ndarray, grid: Grid1D) -> np.ndarray:
    """
    Cumulative integral of (u + √h)_x (u - √h)_x from the left end.

    The factored integrand vanishes identically on simple waves u = √h + c.

    Args:
        h: Depth field (> 0)
        u: Velocity field
        grid: Grid

    Returns:
        G with G(x_min) = 0

    Raises:
        NonPhysicalStateError: If h ≤ 0 somewhere
    """
    if np.min(h) <= 0.0:
        i = int(np.argmin(h))
        raise NonPhysicalStateError(float(h[i]), float(grid.x[i]))

    root = np.sqrt(h)
    plus = grid.d(u + root)
    minus = grid.d(u - root)
    return grid.cumulative(plus * minus)


def invert_Ih(h: np.ndarray, rhs: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Solve q - h^{-1}(h³q_x)_x = rhs with q_x = 0 at both ends."""
    return EllipticOperator.ih(grid, h).solve(rhs)


def helmholtz_solve(rhs: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Solve p - p_xx = rhs with p_x = p at x_min and p_x = -p at x_max."""
    return EllipticOperator.helmholtz(grid).solve(rhs)


def green_kernel_column(op: EllipticOperator, z_index: int) -> np.ndarray:
    """
    One column K(·, z) of the discrete resolvent.

    The source is a unit-mass delta, one over the control width at node ``z_index``.
    """
    if not 0 <= z_index < op.grid.n:
        raise GridError(f"Source index {z_index} outside grid of {op.grid.n} nodes")
    delta = np.zeros(op.grid.n)
    delta[z_index] = 1.0 / op.grid.control_widths[z_index]
    return op.solve(delta)


def kernel_decay_rate(
    column: np.ndarray,
    z_index: int,
    grid: Grid1D,
    skip: int = 10,
    floor: float = 1e-280,
) -> float:
    """
    Exponential decay rate θ of a kernel column, |K| ~ e^{-θ|x - z|}.

    Least-squares slope of -log|K| against |x - z| over both tails, skipping
    ``skip`` nodes next to the source and next to each boundary.

    Returns:
        θ, or +inf when the tail has underflowed below ``floor``
    """
    idx = np.arange(grid.n)
    tail = (np.abs(idx - z_index) > skip) & (idx >= skip) & (idx < grid.n - skip)
    values = np.abs(column[tail])
    dist = np.abs(grid.x[tail] - grid.x[z_index])

    usable = values > floor
    if usable.sum() < 4:
        logger.warning(f"Kernel tail underflowed at z_index={z_index}; reporting infinite rate")
        return float("inf")

    slope, _ = np.polyfit(dist[usable], -np.log(values[usable]), 1)
    return float(slope)
