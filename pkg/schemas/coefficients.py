from enum import Enum
from functools import lru_cache
from typing import Annotated

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator
from scipy import integrate

from models.cadlag import Grid


def split_csv(value):
    """Accept "a, b, c" from the config text as a list."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class CoefficientKind(str, Enum):
    DETERMINISTIC_GEOMETRIC = "deterministic-geometric"
    SRE_PRODUCT = "sre-product"
    BILINEAR_PRODUCT = "bilinear-product"
    FINITE_LIST = "finite-list"


class Profile(str, Enum):
    FLAT = "flat"
    RAMP = "ramp"
    BUMP = "bump"

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self is Profile.FLAT:
            return np.ones_like(t)
        if self is Profile.RAMP:
            return t.copy()
        # continuous: 0 on [0, 0.4], 1 on [0.5, 1]
        return np.clip((t - 0.4) / 0.1, 0.0, 1.0)


class LawKind(str, Enum):
    CONSTANT = "constant"
    UNIFORM = "uniform"


class ScalarLaw(BaseModel):
    """Bounded scalar law used for SRE and Breiman multipliers."""
    model_config = ConfigDict(frozen=True)

    kind: LawKind = LawKind.UNIFORM
    value: float = 1.0
    low: float = 0.0
    high: float = 1.0

    @model_validator(mode="after")
    def _check_support(self):
        if self.kind == LawKind.UNIFORM and not self.low < self.high:
            raise ValueError("uniform law needs low < high")
        return self

    @property
    def bound(self) -> float:
        if self.kind == LawKind.CONSTANT:
            return abs(self.value)
        return max(abs(self.low), abs(self.high))

    @property
    def nonnegative(self) -> bool:
        if self.kind == LawKind.CONSTANT:
            return self.value >= 0
        return self.low >= 0

    def moment(self, power: float) -> float:
        """E|Y|^power; quadrature for the uniform law."""
        return _moment(self, float(power))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == LawKind.CONSTANT:
            return np.full(size, self.value)
        return rng.uniform(self.low, self.high, size)


@lru_cache(maxsize=256)
def _moment(law: ScalarLaw, power: float) -> float:
    if law.kind == LawKind.CONSTANT:
        return abs(law.value) ** power
    density = 1.0 / (law.high - law.low)
    points = [0.0] if law.low < 0 < law.high else None
    value, _ = integrate.quad(lambda y: abs(y) ** power * density, law.low, law.high, points=points)
    return value


class CoefficientParameters(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: CoefficientKind = CoefficientKind.DETERMINISTIC_GEOMETRIC
    ratio: float = Field(0.5, description="Geometric ratio a, |a| < 1")
    profile: Profile = Profile.FLAT

    y_law: LawKind = LawKind.UNIFORM
    y_value: float = 0.5
    y_low: float = 0.0
    y_high: float = 0.9

    bilinear_scale: float = Field(0.5, description="Coefficient c of the bilinear recursion")
    square_innovation: bool = False

    profiles: Annotated[list[Profile], BeforeValidator(split_csv)] = Field(
        default_factory=lambda: [Profile.FLAT]
    )
    weights: Annotated[list[float], BeforeValidator(split_csv)] = Field(
        default_factory=lambda: [1.0]
    )

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == CoefficientKind.DETERMINISTIC_GEOMETRIC and not abs(self.ratio) < 1:
            raise ValueError("deterministic-geometric needs |ratio| < 1")
        if self.y_law == LawKind.UNIFORM and not self.y_low < self.y_high:
            raise ValueError("uniform y_law needs y_low < y_high")
        if self.kind == CoefficientKind.FINITE_LIST:
            if not self.profiles or len(self.profiles) != len(self.weights):
                raise ValueError("finite-list needs one weight per profile")
        if self.square_innovation and self.kind != CoefficientKind.BILINEAR_PRODUCT:
            raise ValueError("square_innovation applies to bilinear-product only")
        return self

    @property
    def multiplier(self) -> ScalarLaw:
        return ScalarLaw(kind=self.y_law, value=self.y_value, low=self.y_low, high=self.y_high)

    @property
    def variant(self) -> str:
        if self.kind == CoefficientKind.BILINEAR_PRODUCT:
            return "bilinear-squared" if self.square_innovation else "bilinear-linear"
        return self.kind.value


class CoefficientFamily(CoefficientParameters):
    resolution: int = Field(100, ge=1)

    @property
    def grid(self) -> Grid:
        return Grid(self.resolution)


class MomentCheckSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=0)
    gamma: float = Field(..., gt=0)
    head: int = Field(1, ge=1, description="m: number of leading terms in the alpha-gamma sum")
    samples: int = Field(200, ge=1)
    max_terms: int = Field(100, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self):
        if not self.gamma < self.alpha:
            raise ValueError("gamma must lie in (0, alpha)")
        if self.max_terms < self.head:
            raise ValueError("max_terms must be >= head")
        return self
