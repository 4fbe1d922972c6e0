import logging
from collections.abc import Iterator
from itertools import islice
from typing import Optional

import numpy as np

from core.config import settings
from core.exceptions import InvalidParameterException, TermCapExceededException
from models.cadlag import CadlagPath, sup_norm
from models.series import CoefficientPanel, CoefficientTerm
from models.stream import COEFFICIENT_STREAM, INNOVATION_STREAM, StreamKey
from schemas.coefficients import CoefficientFamily, CoefficientKind, MomentCheckSpec
from schemas.innovation import InnovationSpec
from schemas.report import MomentRegimeReport, NonzeroCheck
from services.innovation_service import InnovationService

logger = logging.getLogger(__name__)

# Median consecutive-term ratio above which decay is not considered summable
_DECAY_LIMIT = 0.99


class CoefficientService:
    """
    Coefficient processes Psi_j of the series X = sum_{j>=1} Psi_j Z_j.

    Indexing starts at j = 1 with Psi_1 the coefficient of the present
    innovation; the recursions' own index j' = j - 1 starts at 0. For the SRE
    family Psi_j = prod_{k<j} Y_k and for the bilinear family
    Psi_j = c^{j-1} prod_{k<j} W_k, both with the empty product Psi_1 = 1.
    The squared bilinear variant unrolls X_i = c X_{i-1} Z_{i-1} + Z_i: the
    series adds Z_1 + sum_{j>=2} Psi_j Z_j^2 with Psi_j = c^{j-1} prod_{1<k<j} W_k.
    """

    def __init__(self, innovations: Optional[InnovationService] = None):
        self.innovations = innovations or InnovationService()

    def iter_coefficients(
        self,
        key: StreamKey,
        family: CoefficientFamily,
        innovation: Optional[InnovationSpec] = None,
        record: Optional[dict[int, CadlagPath]] = None,
    ) -> Iterator[CoefficientTerm]:
        """
        Lazily generate Psi_1, Psi_2, ... for one replicate.

        Y_k is drawn from key.child(COEFFICIENT_STREAM, k); the bilinear driver
        W_k is the innovation drawn from key.child(INNOVATION_STREAM, k), the very
        stream the series uses for Z_k, which is what couples the two.

        Args:
            key: Replicate key
            family: Coefficient family
            innovation: Innovation spec, required by the bilinear family
            record: If given, receives the driver paths Y_k / W_k

        Raises:
            InvalidParameterException: If a bilinear family has no innovation spec
        """
        grid = family.grid
        points = grid.points()
        profile = family.profile.evaluate(points)
        if family.kind == CoefficientKind.BILINEAR_PRODUCT and innovation is None:
            raise InvalidParameterException("innovation", None, "an innovation spec for bilinear coefficients")

        if family.kind == CoefficientKind.FINITE_LIST:
            listed = [
                CadlagPath(grid, weight * shape.evaluate(points))
                for shape, weight in zip(family.profiles, family.weights)
            ]
            zero = CadlagPath.zeros(grid)
            j = 1
            while True:
                yield CoefficientTerm(j, listed[j - 1] if j <= len(listed) else zero)
                j += 1

        if family.kind == CoefficientKind.DETERMINISTIC_GEOMETRIC:
            j = 1
            while True:
                yield CoefficientTerm(j, CadlagPath(grid, family.ratio ** (j - 1) * profile))
                j += 1

        current = np.ones(grid.size)
        law = family.multiplier
        # squared variant: Psi_j = c^{j-1} prod_{1<k<j} W_k multiplies Z_j^2, Z_1 enters unsquared
        first_driver = 2 if family.square_innovation else 1
        j = 1
        while True:
            drivers = tuple(range(first_driver, j)) if family.kind == CoefficientKind.BILINEAR_PRODUCT else ()
            yield CoefficientTerm(j, CadlagPath(grid, current), drivers)
            if family.kind == CoefficientKind.SRE_PRODUCT:
                y = law.sample(key.child(COEFFICIENT_STREAM, j).generator(), 1)[0]
                driver = CadlagPath(grid, y * profile)
            elif j < first_driver:
                driver = CadlagPath.constant(grid, family.bilinear_scale)
            else:
                w = self.innovations.draw(key.child(INNOVATION_STREAM, j), innovation)
                driver = CadlagPath(grid, family.bilinear_scale * w.values)
            if record is not None:
                record[j] = driver
            current = current * driver.values
            j += 1

    def generate_coefficients(
        self,
        key: StreamKey,
        family: CoefficientFamily,
        terms: int,
        innovation: Optional[InnovationSpec] = None,
    ) -> CoefficientPanel:
        """
        Generate Psi_1..Psi_J and the auxiliary driver record.

        Args:
            key: Replicate key
            family: Coefficient family
            terms: J, number of coefficients
            innovation: Innovation spec (bilinear family only)

        Returns:
            CoefficientPanel with the J coefficients and driver record

        Raises:
            InvalidParameterException: If terms < 1
            TermCapExceededException: If terms exceeds the hard cap
        """
        if terms < 1:
            raise InvalidParameterException("terms", terms, "J >= 1")
        if terms > settings.MAX_SERIES_TERMS:
            raise TermCapExceededException(terms, settings.MAX_SERIES_TERMS)
        record: dict[int, CadlagPath] = {}
        generated = list(islice(self.iter_coefficients(key, family, innovation, record), terms))
        # drivers beyond J - 1 do not enter Psi_1..Psi_J
        auxiliary = {k: path for k, path in record.items() if k < terms}
        return CoefficientPanel(generated, auxiliary, family.variant)

    def norm_matrix(
        self,
        key: StreamKey,
        family: CoefficientFamily,
        samples: int,
        terms: int,
        innovation: Optional[InnovationSpec] = None,
    ) -> np.ndarray:
        """||Psi_j||_inf for `samples` independent replicates, shape (samples, terms)."""
        norms = np.empty((samples, terms))
        for s in range(samples):
            panel = self.generate_coefficients(key.child(s), family, terms, innovation)
            norms[s] = [sup_norm(path) for path in panel.paths]
        return norms

    def nonzero_condition_check(
        self,
        family: CoefficientFamily,
        head: int,
        key: StreamKey,
        samples: int = 100,
        innovation: Optional[InnovationSpec] = None,
    ) -> NonzeroCheck:
        """
        Monte Carlo evidence that P(Psi_j(t) != 0 for some j <= m) > 0 at every grid point.

        Checking all grid points is stronger than the co-countable set the
        condition is stated on.

        Args:
            family: Coefficient family
            head: m, number of leading coefficients
            key: Stream key
            samples: Replicates used for the estimate
            innovation: Innovation spec (bilinear family only)

        Returns:
            NonzeroCheck listing the grid points where no replicate was nonzero
        """
        if head < 1:
            raise InvalidParameterException("head", head, "m >= 1")
        hits = np.zeros(family.grid.size, dtype=bool)
        for s in range(samples):
            panel = self.generate_coefficients(key.child(s), family, head, innovation)
            stacked = np.vstack([path.values for path in panel.paths])
            hits |= np.any(stacked != 0, axis=0)
            if hits.all():
                break
        failing = [float(t) for t in family.grid.points()[~hits]]
        if failing:
            logger.warning("Nonzero condition fails at %d grid points", len(failing))
        return NonzeroCheck(head=head, samples=samples, passed=not failing, failing_points=failing)

    def moment_regime_check(
        self,
        family: CoefficientFamily,
        spec: MomentCheckSpec,
        key: StreamKey,
        innovation: Optional[InnovationSpec] = None,
    ) -> MomentRegimeReport:
        """
        Heuristic check of the moment hypotheses on (||Psi_j||_inf)_j.

        The regime follows alpha: for alpha in (0,1) or (1,2) the head sum
        sum_{j<=m} E||Psi_j||^{alpha-gamma} and the full sum
        sum_j E||Psi_j||^{alpha+gamma}; for alpha in {1, 2}
        E(sum_j ||Psi_j||^{alpha-gamma})^{(alpha+gamma)/(alpha-gamma)}; for
        alpha > 2 E(sum_j ||Psi_j||^2)^{(alpha+gamma)/2}. Sums are truncated at
        spec.max_terms. Passing means finite estimates and a median ratio of
        consecutive terms j -> E||Psi_j||^{alpha+gamma} over the second half of
        the nonzero terms below 0.99.

        Args:
            family: Coefficient family
            spec: Moment check parameters (alpha, gamma, m, samples, J_max)
            key: Stream key
            innovation: Innovation spec (bilinear family only)

        Returns:
            MomentRegimeReport with the regime label, estimates and verdict
        """
        alpha, gamma = spec.alpha, spec.gamma
        norms = self.norm_matrix(key, family, spec.samples, spec.max_terms, innovation)
        upper = np.mean(norms ** (alpha + gamma), axis=0)

        if alpha in (1.0, 2.0):
            regime = "critical"
            power = (alpha + gamma) / (alpha - gamma)
            estimates = {
                "expected_power_sum": float(np.mean(np.sum(norms ** (alpha - gamma), axis=1) ** power)),
            }
        elif alpha > 2:
            regime = "square-summable"
            estimates = {
                "expected_square_sum": float(np.mean(np.sum(norms ** 2, axis=1) ** ((alpha + gamma) / 2))),
            }
        else:
            regime = "split"
            estimates = {
                "head_lower_sum": float(np.sum(np.mean(norms[:, : spec.head] ** (alpha - gamma), axis=0))),
                "upper_sum": float(np.sum(upper)),
            }

        decay = _decay_ratio(upper)
        finite = all(np.isfinite(v) for v in estimates.values())
        passed = finite and (decay is None or decay < _DECAY_LIMIT)
        if not passed:
            logger.warning("Moment diagnostic fails for %s (decay ratio %s)", family.variant, decay)
        return MomentRegimeReport(
            regime=regime,
            alpha=alpha,
            gamma=gamma,
            estimates=estimates,
            decay_ratio=decay,
            passed=passed,
        )


def _decay_ratio(terms: np.ndarray) -> Optional[float]:
    """Median ratio of consecutive positive terms over their second half; None if the terms vanish."""
    positive = np.flatnonzero(terms > 0)
    if positive.size == 0 or positive[-1] < terms.size - 1:
        return None
    tail = terms[positive][positive.size // 2:]
    if tail.size < 2:
        return None
    return float(np.median(tail[1:] / tail[:-1]))
