from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.cadlag import Grid


class InnovationKind(str, Enum):
    PARETO_SCALAR = "pareto-scalar"
    STABLE_SCALAR = "symmetric-stable-scalar"
    COMPOUND_POISSON = "compound-poisson-path"
    SINGLE_JUMP = "single-jump-path"
    CONSTANT = "constant-path"

    @property
    def is_scalar(self) -> bool:
        """Kinds whose paths are constant in t."""
        return self in (InnovationKind.PARETO_SCALAR, InnovationKind.STABLE_SCALAR, InnovationKind.CONSTANT)


class TailModel(BaseModel):
    """P(|Z| > x) = c x^{-alpha} for x >= c^{1/alpha}, positive-tail weight p."""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=0, examples=[1.5])
    c: float = Field(1.0, gt=0)
    p: float = Field(1.0, ge=0, le=1)

    @property
    def scale(self) -> float:
        return self.c ** (1.0 / self.alpha)

    @classmethod
    def from_scale(cls, alpha: float, scale: float, p: float = 1.0) -> "TailModel":
        return cls(alpha=alpha, c=scale ** alpha, p=p)

    def exceedance(self, x: float) -> float:
        """Exact P(|Z| > x) of the Pareto law with this tail."""
        return min(1.0, self.c * x ** (-self.alpha))


class InnovationParameters(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: InnovationKind = InnovationKind.COMPOUND_POISSON
    alpha: float = Field(1.5, gt=0, examples=[1.5])
    scale: float = Field(1.0, gt=0, description="Pareto scale x_m of jumps / variates")
    rate: float = Field(1.0, ge=0, description="Poisson jump rate on [0,1]")
    p: float = Field(1.0, ge=0, le=1, description="Probability of a positive sign")
    beta: float = Field(0.0, ge=-1, le=1, description="Stable skewness")
    level: float = Field(1.0, description="Value of the deterministic constant path")

    @model_validator(mode="after")
    def _check_stable_range(self):
        if self.kind == InnovationKind.STABLE_SCALAR and self.alpha > 2:
            raise ValueError("stable innovations require alpha in (0, 2]")
        return self

    @property
    def tail(self) -> TailModel:
        return TailModel.from_scale(self.alpha, self.scale, self.p)


class InnovationSpec(InnovationParameters):
    resolution: int = Field(100, ge=1)

    @property
    def grid(self) -> Grid:
        return Grid(self.resolution)
