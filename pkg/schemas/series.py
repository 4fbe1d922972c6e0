from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from schemas.coefficients import CoefficientFamily, CoefficientKind
from schemas.innovation import InnovationSpec


class TruncationMode(str, Enum):
    FIXED = "fixed"
    ADAPTIVE = "adaptive"


class Wiring(str, Enum):
    INDEPENDENT = "independent"
    COUPLED = "coupled"


class SeriesParameters(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    truncation: TruncationMode = TruncationMode.ADAPTIVE
    terms: int = Field(50, ge=1, description="J for fixed truncation")
    tolerance: float = Field(1e-6, gt=0, description="Adaptive stopping tolerance")
    max_terms: int = Field(200, ge=1, description="J_max for adaptive truncation")
    evaluation_point: float = Field(1.0, ge=0, le=1, description="t of the marginal X(t)")

    @property
    def term_cap(self) -> int:
        return self.terms if self.truncation == TruncationMode.FIXED else self.max_terms


class SeriesSpec(SeriesParameters):
    innovation: InnovationSpec
    coefficients: CoefficientFamily

    @model_validator(mode="after")
    def _check_shared_grid(self):
        if self.innovation.resolution != self.coefficients.resolution:
            raise ValueError(
                f"innovation resolution {self.innovation.resolution} != "
                f"coefficient resolution {self.coefficients.resolution}"
            )
        return self

    @property
    def wiring(self) -> Wiring:
        """Bilinear coefficients reuse innovation draws; every other family is independent."""
        if self.coefficients.kind == CoefficientKind.BILINEAR_PRODUCT:
            return Wiring.COUPLED
        return Wiring.INDEPENDENT

    @property
    def grid(self):
        return self.innovation.grid
