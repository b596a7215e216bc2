"""
Pydantic models for weight constants, check reports and suite configuration.
"""
from enum import Enum
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field

# non-finite floats are written as the strings "Infinity", "-Infinity" and "NaN"
REPORT_MODEL = ConfigDict(ser_json_inf_nan="strings")


class WeightConstants(BaseModel):
    """Family-relative estimate of a weight-class constant."""
    model_config = REPORT_MODEL

    value: float = Field(..., description="Maximum of the defining product over the family")
    weight_class: str = Field(..., description="A_1, A_p, A_inf, RH_s, RH_inf or A_pq")
    params: Dict[str, float] = Field(default_factory=dict, description="Exponent parameters")
    family: str = Field(..., description="Descriptor of the ball family")
    family_size: int = Field(0, description="Number of balls in the family")
    witness_center: Optional[List[int]] = Field(None, description="Centre cell of the maximizing ball")
    witness_radius: Optional[float] = Field(None, description="Radius of the maximizing ball")
    divergent: bool = Field(False, description="Estimate grows without bound under refinement")
    ladder: List[float] = Field(default_factory=list, description="Estimates along an N-doubling ladder")


class OffDiagPoint(BaseModel):
    """One (t, d, ratio) measurement of an off-diagonal profile."""
    model_config = REPORT_MODEL

    t: float
    d: float
    ratio: float = Field(..., ge=0)


class OffDiagProfile(BaseModel):
    """Measured off-diagonal decay of an operator family."""
    model_config = REPORT_MODEL

    r: float = Field(..., description="Lebesgue exponent of the estimate")
    points: List[OffDiagPoint] = Field(default_factory=list)
    m_fit: float = Field(..., description="Fitted decay order, inf when every positive-gap ratio vanishes")
    residual: float = Field(0.0, description="RMS residual of the log-log fit")
    fitted_points: int = Field(0, description="Points with ratio above the fit threshold and d > 0")


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    DIVERGENT = "divergent"
    ERROR = "error"


class PsiPoint(BaseModel):
    """Measured operator constant against a measured weight constant."""
    model_config = REPORT_MODEL

    label: str
    weight_constant: float
    measured_constant: float


class CheckParams(BaseModel):
    """Parameter record of a check; unused entries stay None."""
    model_config = REPORT_MODEL

    n: Optional[int] = None
    N: Optional[List[int]] = Field(None, description="Cells per axis along the ladder")
    K: Optional[List[int]] = Field(None, description="t-levels along the ladder")
    p: Optional[float] = None
    r: Optional[float] = None
    s: Optional[float] = None
    p0: Optional[float] = None
    alpha: Optional[float] = None
    M: Optional[float] = None
    beta: Optional[float] = None
    weight: Optional[str] = None
    family: Optional[str] = None
    seed: Optional[int] = None
    extra: Dict[str, Any] = Field(default_factory=dict)


class CheckReport(BaseModel):
    """Outcome of one numerical check."""
    model_config = REPORT_MODEL

    name: str = Field(..., description="Check name")
    label: Optional[str] = Field(None, description="Display name from the suite configuration")
    params: CheckParams = Field(default_factory=CheckParams)
    measured: Dict[str, float] = Field(default_factory=dict, description="Scalar measurements")
    series: Dict[str, List[float]] = Field(default_factory=dict, description="Measurements along ladders or samples")
    bound: Optional[float] = Field(None, description="Bound the measured quantity is compared against")
    slack: Optional[float] = Field(None, description="Relative slack applied to the bound")
    status: CheckStatus = CheckStatus.PASS
    expect_fail: bool = Field(False, description="Negative control: failing is the designed outcome")
    reason: Optional[str] = Field(None, description="Why the check failed or was flagged")
    notes: List[str] = Field(default_factory=list)
    skipped: List[str] = Field(default_factory=list, description="Skipped instances with reasons")
    psi_trace: List[PsiPoint] = Field(default_factory=list)
    profile: Optional[OffDiagProfile] = None
    runtime: Optional[float] = Field(None, description="Seconds, only recorded when timing is enabled")

    @computed_field
    @property
    def outcome(self) -> str:
        if self.expect_fail:
            return "expected-fail: " + ("pass" if self.succeeded else "fail")
        return self.status.value

    @property
    def succeeded(self) -> bool:
        """True when the check behaved as designed."""
        if self.expect_fail:
            return self.status in (CheckStatus.FAIL, CheckStatus.DIVERGENT)
        return self.status == CheckStatus.PASS


class ReportMeta(BaseModel):
    model_config = REPORT_MODEL

    version: str
    seed: int
    timestamp: Optional[str] = Field(None, description="Only set when timestamps are enabled")


class SuiteReport(BaseModel):
    """Top-level JSON report."""
    model_config = REPORT_MODEL

    meta: ReportMeta
    checks: List[CheckReport] = Field(default_factory=list)


class ResolutionStep(BaseModel):
    cells: int = Field(..., ge=2, description="Cells per axis N")
    levels: int = Field(..., ge=1, description="t-levels K")


class CheckInvocation(BaseModel):
    """One check requested by a suite configuration."""
    check: str = Field(..., description="Registered check name")
    label: Optional[str] = Field(None, description="Optional display name")
    params: Dict[str, Any] = Field(default_factory=dict)
    expect_fail: bool = Field(False, description="Mark as negative control")


class SuiteConfig(BaseModel):
    """Parsed suite configuration."""
    checks: List[CheckInvocation] = Field(default_factory=list)
    seed: int = Field(..., description="Global seed")
    ladder_1d: List[ResolutionStep] = Field(..., min_length=1)
    ladder_2d: List[ResolutionStep] = Field(..., min_length=1)
    output_dir: str = "reports"
    format: Literal["json", "csv", "both"] = "both"
    jobs: int = Field(1, ge=1)
    timing: bool = Field(False, description="Record runtimes and timestamps (breaks byte-identical reruns)")
