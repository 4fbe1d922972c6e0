from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from models.cadlag import CadlagPath


@dataclass(frozen=True)
class CoefficientTerm:
    """Psi_j together with the innovation indices it was built from."""
    index: int
    path: CadlagPath
    drivers: tuple[int, ...] = ()


@dataclass
class CoefficientPanel:
    """Psi_1..Psi_J plus the driver record (Y_k for SRE, W_k for bilinear) that determines them."""
    terms: list[CoefficientTerm]
    auxiliary: dict[int, CadlagPath] = field(default_factory=dict)
    variant: str = ""

    @property
    def paths(self) -> list[CadlagPath]:
        return [term.path for term in self.terms]


class DrawStatus(str, Enum):
    OK = "ok"
    TRUNCATION_FAILURE = "truncation_failure"
    ERROR = "error"


@dataclass
class SeriesDraw:
    x: CadlagPath
    j_used: int
    residual_bound: float
    term_norms: np.ndarray
    partial_sums: Optional[list[CadlagPath]] = None
    # truncation inequality held on every J' < j_used
    sound: bool = True


@dataclass
class PanelRecord:
    replicate: int
    status: DrawStatus
    draw: Optional[SeriesDraw] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == DrawStatus.OK


@dataclass
class MarginalPanel:
    """Vectorized replicates of the scalar marginal X(t)."""
    evaluation_point: float
    values: np.ndarray
    j_used: np.ndarray
    residual_bound: np.ndarray
    ok: np.ndarray
    sound: np.ndarray

    @property
    def failures(self) -> int:
        return int(np.count_nonzero(~self.ok))
