"""
Custom exceptions for blow-up laboratory operations.
"""

from typing import Any, Optional


class BlowupLabException(Exception):
    """Base exception for blow-up laboratory errors."""


class ProfileError(BlowupLabException):
    """Raised when a self-similar profile cannot be built or evaluated."""


class ProfileConvergenceError(ProfileError):
    """Raised when the profile integrator fails or leaves the admissible slope range."""

    def __init__(self, last_y: float, last_residual: float, message: str = None):
        self.last_y = last_y
        self.last_residual = last_residual

        if message is None:
            message = (
                f"Profile integration failed near y={last_y:.6g} "
                f"(last residual {last_residual:.3e})"
            )

        super().__init__(message)


class GridError(BlowupLabException):
    """Raised when a grid is malformed or too coarse for the requested data."""


class NonPhysicalStateError(BlowupLabException):
    """Raised when the fluid depth is not strictly positive."""

    def __init__(self, min_value: float, location: Optional[float] = None, message: str = None):
        self.min_value = min_value
        self.location = location

        if message is None:
            where = f" at x={location:.6g}" if location is not None else ""
            message = f"Depth positivity lost: min value {min_value:.6g}{where}"

        super().__init__(message)


class EllipticSolveError(BlowupLabException):
    """Raised when a banded elliptic solve fails or misses its residual target."""

    def __init__(self, kind: str, residual: float = float("nan"), message: str = None):
        self.kind = kind
        self.residual = residual

        if message is None:
            message = f"{kind} solve failed (relative residual {residual:.3e})"

        super().__init__(message)


class StepRejectedError(BlowupLabException):
    """Raised inside a time step when a stage produces a non-physical state."""

    def __init__(self, t: float, dt: float, reason: str):
        self.t = t
        self.dt = dt
        self.reason = reason
        super().__init__(f"Step rejected at t={t:.8g} with dt={dt:.3e}: {reason}")


class SimulationInstabilityError(BlowupLabException):
    """Raised when the conserved energy drifts beyond its limit during the smooth phase."""

    def __init__(self, t: float, drift: float, limit: float, trajectory: Any = None):
        self.t = t
        self.drift = drift
        self.limit = limit
        self.trajectory = trajectory
        super().__init__(
            f"Energy drift {drift:.3e} exceeds limit {limit:.1e} at t={t:.8g}"
        )


class ModulationError(BlowupLabException):
    """Raised when modulation variables reach an invalid state (tau <= t)."""


class RescaleError(BlowupLabException):
    """Raised when a snapshot cannot be mapped to self-similar variables."""


class ResidualError(BlowupLabException):
    """Raised when two rescaled snapshots are too far apart to difference in s."""

    def __init__(self, ds: float, max_ds: float):
        self.ds = ds
        self.max_ds = max_ds
        super().__init__(f"Self-similar time spacing {ds:.4g} outside (0, {max_ds}]")


class BlowupEstimateError(BlowupLabException):
    """Raised when blow-up time extrapolation has too little usable data."""


class HolderError(BlowupLabException):
    """Raised for invalid Hölder semi-norm requests (bad exponent or empty window)."""


class RateFitError(BlowupLabException):
    """Raised when a blow-up rate fit has insufficient or invalid samples."""


class QuadratureError(BlowupLabException):
    """Raised when adaptive quadrature does not reach its tolerance."""


class StorageError(BlowupLabException):
    """Raised when run files are missing, unlisted, or malformed."""

    def __init__(self, path: Any, message: str = None):
        self.path = path

        if message is None:
            message = "cannot read run file"

        super().__init__(f"{path}: {message}")
