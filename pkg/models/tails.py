from dataclasses import dataclass

from core.exceptions import ValidationException
from models.cadlag import CadlagPath, sup_norm

_UNIT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SpectralSample:
    angle: CadlagPath
    radius: float
    threshold: float

    def __post_init__(self):
        if not self.radius > self.threshold:
            raise ValidationException(f"radius {self.radius} must exceed threshold {self.threshold}")
        if abs(sup_norm(self.angle) - 1.0) > _UNIT_TOLERANCE:
            raise ValidationException("angle must lie on the unit sup-norm sphere")
