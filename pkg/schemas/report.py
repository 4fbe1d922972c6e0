from typing import Optional

from pydantic import BaseModel, Field


class RegVarEstimate(BaseModel):
    alpha: float = Field(..., gt=0)
    c: float = Field(..., gt=0)
    k: int = Field(..., ge=1)
    n: int
    alpha_se: float
    c_se: float


class TailCurvePoint(BaseModel):
    r: float
    empirical: float
    model: Optional[float] = None


class TailCurve(BaseModel):
    a_n: float
    n: int
    points: list[TailCurvePoint]


class ScalingCheck(BaseModel):
    s: float
    x0: float
    ratio: Optional[float] = None
    ratio_se: Optional[float] = None
    expected: float
    expected_se: float
    exceedances: int
    sufficient: bool
    agrees: Optional[bool] = None


class RatioPoint(BaseModel):
    x: float
    ratio: Optional[float]
    ratio_se: Optional[float]
    exceedances: int


class BreimanCheck(BaseModel):
    limit: float = Field(..., description="E[Y^alpha] by quadrature")
    points: list[RatioPoint]
    mean_ratio: Optional[float]
    relative_error: Optional[float]
    tolerance: float
    passed: bool


class TailConstant(BaseModel):
    value: float
    method: str
    standard_error: float = 0.0


class MarginalRatioCheck(BaseModel):
    evaluation_point: float
    predicted: TailConstant
    points: list[RatioPoint]
    mean_ratio: Optional[float]
    relative_error: Optional[float]
    tolerance: float
    passed: bool


class Band(BaseModel):
    estimate: float
    lower: float
    upper: float


class SpectralSummary(BaseModel):
    k: int
    threshold: float
    positive_sign_fraction: Band
    argmax_median: Band
    argmax_quantiles: dict[str, float]
    argmax_ks_uniform: float
    angle_means: dict[str, float]


class PizzaSliceRow(BaseModel):
    sign: int
    bin: int
    r: float
    empirical: float
    predicted: float


class PizzaSliceCheck(BaseModel):
    n: int
    a_n: float
    alpha: float
    rows: list[PizzaSliceRow]


class ModulusRow(BaseModel):
    delta: float
    epsilon: float
    c1: float
    c2: float
    c3: float


class ModulusDiagnostic(BaseModel):
    n: int
    a_n: float
    fraction: float
    floor: float
    rows: list[ModulusRow]
    passed: bool
    edges_decay: bool


class MomentRegimeReport(BaseModel):
    regime: str
    alpha: float
    gamma: float
    estimates: dict[str, float]
    decay_ratio: Optional[float]
    passed: bool
    heuristic: bool = True
    note: str = "finiteness of an expectation is not decidable from samples; pass means summable decay"


class NonzeroCheck(BaseModel):
    head: int
    samples: int
    passed: bool
    failing_points: list[float]


class TruncationSummary(BaseModel):
    draws: int
    failures: int
    errors: int
    mean_terms: Optional[float]
    max_terms: Optional[int]
    max_residual_bound: Optional[float]
    soundness_checked: int = 0
    soundness_violations: int = 0


class AdditivityCheck(BaseModel):
    x: float
    ratio: Optional[float]
    ratio_se: Optional[float]
    expected: float = 2.0


class TailReport(BaseModel):
    experiment: str
    pipeline: str
    seed: int
    sample_size: int
    innovation_model: str
    coefficient_variant: str
    notes: list[str] = Field(default_factory=list)
    hill: Optional[RegVarEstimate] = None
    hill_sensitivity: list[RegVarEstimate] = Field(default_factory=list)
    tail_curve: Optional[TailCurve] = None
    scaling: Optional[ScalingCheck] = None
    breiman: Optional[BreimanCheck] = None
    marginal: Optional[MarginalRatioCheck] = None
    norm_constant: Optional[TailConstant] = None
    spectral: Optional[SpectralSummary] = None
    pizza_slices: Optional[PizzaSliceCheck] = None
    modulus: Optional[ModulusDiagnostic] = None
    additivity: Optional[AdditivityCheck] = None
    moments: Optional[MomentRegimeReport] = None
    nonzero: Optional[NonzeroCheck] = None
    truncation: Optional[TruncationSummary] = None


class RunManifest(BaseModel):
    config: str
    version: str
    platform: str
    checksums: dict[str, str]
    timings: dict[str, float]
