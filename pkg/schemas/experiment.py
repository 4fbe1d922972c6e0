from enum import Enum
from pathlib import Path
from typing import Annotated, Optional

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator

from schemas.coefficients import CoefficientFamily, CoefficientParameters, split_csv
from schemas.innovation import InnovationParameters, InnovationSpec
from schemas.series import SeriesParameters, SeriesSpec

FloatList = Annotated[list[float], BeforeValidator(split_csv)]


class Pipeline(str, Enum):
    PATH = "path"
    MARGINAL = "marginal"
    BREIMAN = "breiman"


class RunSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(..., pattern=r"^[a-z0-9][a-z0-9._-]*$", examples=["breiman-uniform"])
    seed: int = Field(0, ge=0, lt=2 ** 64)
    pipeline: Pipeline = Pipeline.PATH
    resolution: int = Field(100, ge=1)
    n: int = Field(10_000, ge=1, description="Panel size")
    workers: int = Field(1, ge=1)
    output_dir: Optional[Path] = None


class EstimatorParameters(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Hill / normalization (None: ceil(sqrt(N)) and N // 100)
    hill_k: Optional[int] = Field(None, ge=1)
    n_target: Optional[int] = Field(None, ge=2)

    # Tail curve and scaling
    r_grid: FloatList = Field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0, 8.0])
    scaling_s: float = Field(2.0, gt=0)
    scaling_quantile: float = Field(0.995, gt=0, lt=1)

    # Spectral measure (None: skip)
    spectral_k: Optional[int] = Field(None, ge=30)
    angle_points: FloatList = Field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    pizza_bins: int = Field(4, ge=1)
    bootstrap: int = Field(200, ge=1)

    # Moduli
    delta_grid: FloatList = Field(default_factory=lambda: [0.5, 0.2, 0.1, 0.05, 0.02, 0.01])
    epsilon_grid: FloatList = Field(default_factory=lambda: [0.1, 0.5])
    modulus_fraction: float = Field(0.1, gt=0, le=1)
    modulus_floor: float = Field(0.05, ge=0)

    # Breiman and marginal ratios
    x_grid: FloatList = Field(default_factory=lambda: [20.0, 50.0])
    marginal_levels: FloatList = Field(default_factory=lambda: [1e-3, 3e-4])
    breiman_tolerance: float = Field(0.10, gt=0)
    marginal_tolerance: float = Field(0.15, gt=0)

    # Coefficient diagnostics (moment_gamma None: alpha / 4)
    moment_gamma: Optional[float] = Field(None, gt=0)
    moment_head: int = Field(1, ge=1)
    moment_samples: int = Field(200, ge=1)

    @field_validator("r_grid", "x_grid")
    @classmethod
    def _positive_ascending(cls, value: list[float]) -> list[float]:
        if not value or any(v <= 0 for v in value) or any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("must be a nonempty, positive, strictly ascending list")
        return value

    @field_validator("delta_grid")
    @classmethod
    def _decreasing_deltas(cls, value: list[float]) -> list[float]:
        if not value or any(not 0 < v <= 1 for v in value) or any(b >= a for a, b in zip(value, value[1:])):
            raise ValueError("must be a nonempty, strictly decreasing list in (0, 1]")
        return value

    @field_validator("epsilon_grid")
    @classmethod
    def _positive(cls, value: list[float]) -> list[float]:
        if not value or any(v <= 0 for v in value):
            raise ValueError("must be a nonempty list of positive values")
        return value

    @field_validator("marginal_levels")
    @classmethod
    def _probabilities(cls, value: list[float]) -> list[float]:
        if not value or any(not 0 < v < 1 for v in value):
            raise ValueError("must be a nonempty list of probabilities in (0, 1)")
        return value

    @field_validator("angle_points")
    @classmethod
    def _unit_interval(cls, value: list[float]) -> list[float]:
        if any(not 0 <= v <= 1 for v in value):
            raise ValueError("points must lie in [0, 1]")
        return value

    @field_validator("scaling_s")
    @classmethod
    def _not_one(cls, value: float) -> float:
        if value == 1:
            raise ValueError("s = 1 is the trivial ratio")
        return value


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    run: RunSection
    innovation: InnovationParameters = Field(default_factory=InnovationParameters)
    coefficients: CoefficientParameters = Field(default_factory=CoefficientParameters)
    series: SeriesParameters = Field(default_factory=SeriesParameters)
    estimators: EstimatorParameters = Field(default_factory=EstimatorParameters)

    @model_validator(mode="after")
    def _check_gamma(self):
        gamma = self.estimators.moment_gamma
        if gamma is not None and not gamma < self.innovation.alpha:
            raise ValueError("estimators.moment_gamma must lie in (0, innovation.alpha)")
        return self

    def innovation_spec(self) -> InnovationSpec:
        return InnovationSpec(resolution=self.run.resolution, **self.innovation.model_dump())

    def coefficient_family(self) -> CoefficientFamily:
        return CoefficientFamily(resolution=self.run.resolution, **self.coefficients.model_dump())

    def series_spec(self) -> SeriesSpec:
        return SeriesSpec(
            innovation=self.innovation_spec(),
            coefficients=self.coefficient_family(),
            **self.series.model_dump(),
        )
