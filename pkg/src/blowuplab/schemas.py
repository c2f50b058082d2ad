"""
Pydantic models for run configuration, reports, and run manifests.

These models define the structure of everything the laboratory reads from
and writes to disk, providing validation and JSON round-trips.
"""

import math
from datetime import datetime
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

# Absolute tolerance for inequalities that are tight (equality cases at y = 0).
EQ_TOL = 1e-10

# Admissible range of the weight Θ in the initial-data slope condition.
THETA_MIN = 50.0 ** (-0.2)
THETA_MAX = 6.0 / 13.0

MANIFEST_SCHEMA_VERSION = 1


# ============================================================================
# Run configuration
# ============================================================================


class SimConfig(BaseModel):
    """Configuration of one rSV or rB blow-up run."""

    model: Literal["rsv", "rb"] = Field(default="rsv", description="Equation to integrate")
    eps: float = Field(default=0.3, gt=0.0, description="Initial-data scale ε")
    h_star: float = Field(default=4.0, gt=0.0, description="Background depth h_*")
    half_length: float = Field(default=4.0, gt=2.0, description="Half-domain length L")
    n: int = Field(default=8192, ge=16, description="Number of grid nodes")
    grid_stretch: float = Field(
        default=0.0, ge=0.0, le=20.0, description="sinh clustering of nodes at x = 0 (0 = uniform)"
    )
    cfl: float = Field(default=0.4, gt=0.0, lt=1.0, description="CFL number")
    stop_growth_factor: float = Field(
        default=20.0, gt=1.0, description="Gradient growth that flags blow-up"
    )
    dt_floor: float = Field(default=1e-10, gt=0.0, description="Smallest admissible time step")
    snapshot_cadence: int = Field(default=25, ge=1, description="Steps between snapshots")
    t_max: Optional[float] = Field(
        default=None, description="Final time (defaults to +ε, past the predicted blow-up)"
    )
    max_steps: int = Field(default=200_000, ge=1, description="Hard cap on time steps")
    energy_drift_limit: float = Field(
        default=1e-3, gt=0.0, description="Relative energy drift that aborts the smooth phase"
    )
    theta_weight: float = Field(
        default=0.46, description="Weight Θ of the initial slope condition"
    )
    window_half_width: float = Field(
        default=0.8, gt=0.0, description="Physical half-width of the rescaled window"
    )
    z_bump_amplitude: float = Field(default=0.0, description="Amplitude of a z₀ perturbation")
    z_bump_width: float = Field(default=0.5, gt=0.0, description="Width of the z₀ perturbation")
    allow_large_eps: bool = Field(
        default=False, description="Accept ε > 0.5 for falsification runs"
    )
    track_modulation: bool = Field(
        default=True, description="Integrate the modulation ODEs alongside the PDE"
    )
    label: str = Field(default="", description="Free-form run label")

    @field_validator("theta_weight")
    @classmethod
    def validate_theta(cls, v: float) -> float:
        """Θ must lie strictly between 50^{-1/5} and 6/13."""
        if not THETA_MIN < v < THETA_MAX:
            raise ValueError(f"theta_weight must lie in ({THETA_MIN:.6f}, {THETA_MAX:.6f})")
        return v

    @model_validator(mode="after")
    def validate_eps(self) -> "SimConfig":
        if self.eps > 0.5 and not self.allow_large_eps:
            raise ValueError("eps must lie in (0, 0.5] unless allow_large_eps is set")
        if self.t_max is not None and self.t_max <= -self.eps:
            raise ValueError("t_max must be later than the start time -eps")
        return self

    @property
    def t_start(self) -> float:
        return -self.eps

    @property
    def t_end(self) -> float:
        return self.eps if self.t_max is None else self.t_max

    def run_label(self) -> str:
        """Label used for the run directory."""
        if self.label:
            return self.label
        return f"{self.model} eps {self.eps:g} n {self.n}"


# ============================================================================
# Verification reports
# ============================================================================


CheckKind = Literal["inequality", "equality", "initial", "assumption", "improved", "monitor"]


class CheckRecord(BaseModel):
    """Outcome of one numerical check."""

    check_id: str = Field(..., description="Short identifier of the check")
    domain: str = Field(default="", description="Where the check was evaluated")
    worst_margin: float = Field(..., description="Smallest margin (negative means violated)")
    worst_location: Optional[float] = Field(None, description="Coordinate of the worst margin")
    passed: bool = Field(..., description="Worst margin within tolerance")
    kind: CheckKind = Field(default="inequality")
    required: bool = Field(default=False, description="Counts toward the report verdict")
    notes: str = Field(default="")
    first_violation: Optional[float] = Field(None, description="First time or s of violation")
    trend: List[float] = Field(default_factory=list, description="Worst margin per sample")

    @classmethod
    def from_margin(
        cls,
        check_id: str,
        margins: Union[float, Sequence[float], np.ndarray],
        locations: Optional[Union[Sequence[float], np.ndarray]] = None,
        tol: float = EQ_TOL,
        **kwargs,
    ) -> "CheckRecord":
        """
        Build a record from pointwise margins (RHS - LHS, nonnegative when satisfied).

        Non-finite margins count as violations.
        """
        m = np.asarray(margins, dtype=float).ravel()
        if m.size == 0:
            notes = kwargs.pop("notes", "") or "empty domain"
            return cls(check_id=check_id, worst_margin=0.0, passed=True, notes=notes, **kwargs)

        m = np.where(np.isfinite(m), m, -1e300)
        i = int(np.argmin(m))
        loc = None
        if locations is not None:
            loc = float(np.asarray(locations, dtype=float).ravel()[i])
        worst = float(m[i])
        return cls(
            check_id=check_id,
            worst_margin=worst,
            worst_location=loc,
            passed=worst >= -tol,
            **kwargs,
        )


class VerifyReport(BaseModel):
    """Collection of check records with a verdict."""

    title: str
    records: List[CheckRecord] = Field(default_factory=list)
    parameters: Dict[str, Union[float, int, str, bool, None]] = Field(default_factory=dict)

    def add(self, record: CheckRecord) -> CheckRecord:
        self.records.append(record)
        return record

    def get(self, check_id: str) -> Optional[CheckRecord]:
        for record in self.records:
            if record.check_id == check_id:
                return record
        return None

    def failures(self) -> List[CheckRecord]:
        return [r for r in self.records if not r.passed]

    @property
    def passed(self) -> bool:
        """True iff every required check passed."""
        return all(r.passed for r in self.records if r.required)

    def summary(self, file: Optional[str] = None) -> "VerifySummary":
        failed = self.failures()
        return VerifySummary(
            title=self.title,
            passed=self.passed,
            n_checks=len(self.records),
            n_failed=len(failed),
            failed_ids=[r.check_id for r in failed],
            file=file,
        )


class VerifySummary(BaseModel):
    """Manifest entry for a VerifyReport written to disk."""

    title: str
    passed: bool
    n_checks: int
    n_failed: int
    failed_ids: List[str] = Field(default_factory=list)
    file: Optional[str] = None


# ============================================================================
# Run time series
# ============================================================================


class ScalarSample(BaseModel):
    """Scalar diagnostics of one state."""

    t: float
    energy: float
    min_dx: float = Field(..., description="min ∂_x w (or ∂_x v)")
    argmin_x: float = Field(..., description="Location of min ∂_x w")
    max_abs_zx: float = 0.0
    g_sup: float = 0.0
    q_sup: float = 0.0
    h_min: Optional[float] = None
    h_max: Optional[float] = None
    z_c1: float = 0.0
    dt: float = 0.0


class ModulationSample(BaseModel):
    """Modulation variables and their rates at one time."""

    t: float
    tau: float
    kappa: float
    xi: float
    tau_dot: float
    kappa_dot: float
    xi_dot: float
    frozen: bool = False

    @property
    def s(self) -> float:
        return -math.log(self.tau - self.t)


class SnapshotEntry(BaseModel):
    """Manifest entry for a snapshot CSV."""

    index: int
    step: int
    t: float
    file: str
    scalars: ScalarSample
    modulation: Optional[ModulationSample] = None


# ============================================================================
# Derived analysis records
# ============================================================================


class BlowupEstimate(BaseModel):
    """Estimated blow-up time and location."""

    method: str
    t_star: Optional[float] = None
    x_star: Optional[float] = None
    residual: Optional[float] = None
    window: int = 0
    valid: bool = False
    message: str = ""


class SlopeFit(BaseModel):
    """Log-log rate fit of a semi-norm series."""

    alpha: float
    window: Tuple[float, float]
    slope: float
    expected: float
    intercept: float
    residual: float
    n_samples: int
    tolerance: float
    passed: bool
    file: Optional[str] = None


class ProfileDistance(BaseModel):
    """Distance of a rescaled snapshot to the self-similar profile."""

    s: float
    weighted_decay: float = Field(..., description="sup (1+|y|^{2/5})|W_y - W̄'|")
    weighted_decay_at: float
    weighted_near: float = Field(..., description="sup (1+y²)/y² |W_y - W̄'|")
    weighted_near_at: float
    w0: float = Field(..., description="|W(0,s)|")
    wy0_plus2: float = Field(..., description="|W_y(0,s) + 2|")
    wyy0: float = Field(..., description="|W_yy(0,s)|")
    wyyy0: float = Field(..., description="∂_y³W(0,s)")

    @property
    def constraint_max(self) -> float:
        return max(self.w0, self.wy0_plus2, self.wyy0)


class ResidualRecord(BaseModel):
    """Residual of the rescaled transport equation between two snapshots."""

    s_mid: float
    ds: float
    n_points: int
    sup: float
    l2: float
    sup_wy1: Optional[float] = None
    l2_wy1: Optional[float] = None


# ============================================================================
# Run manifest
# ============================================================================


class RunManifest(BaseModel):
    """Self-contained description of a run and everything derived from it."""

    schema_version: int = MANIFEST_SCHEMA_VERSION
    created_at: datetime = Field(default_factory=datetime.now)
    config: SimConfig
    profile: Dict[str, float] = Field(default_factory=dict)
    series: List[ScalarSample] = Field(default_factory=list)
    modulation: List[ModulationSample] = Field(default_factory=list)
    snapshots: List[SnapshotEntry] = Field(default_factory=list)
    blowup_flagged: bool = False
    stop_reason: str = ""
    peak_growth: float = Field(default=0.0, description="Largest measured gradient growth")
    predicted_growth: float = Field(
        default=0.0, description="Largest modulation-predicted growth ε/(τ - t), diagnostic only"
    )
    estimates: List[BlowupEstimate] = Field(default_factory=list)
    slopes: List[SlopeFit] = Field(default_factory=list)
    distances: List[ProfileDistance] = Field(default_factory=list)
    residuals: List[ResidualRecord] = Field(default_factory=list)
    verify: List[VerifySummary] = Field(default_factory=list)
    files: List[str] = Field(default_factory=list)

    def add_file(self, relative_path: str) -> None:
        if relative_path not in self.files:
            self.files.append(relative_path)
