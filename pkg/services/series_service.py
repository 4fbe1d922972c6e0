import logging
import math
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from itertools import islice
from typing import Optional

import numpy as np

from core.config import settings
from core.exceptions import (
    InvalidParameterException,
    PredictabilityViolationException,
    RVSeriesException,
    TermCapExceededException,
    TruncationFailureException,
)
from models.cadlag import CadlagPath, add, pointwise_product, sup_norm
from models.series import CoefficientTerm, DrawStatus, MarginalPanel, PanelRecord, SeriesDraw
from models.stream import COEFFICIENT_STREAM, INNOVATION_STREAM, StreamKey
from schemas.coefficients import CoefficientKind
from schemas.series import SeriesSpec, TruncationMode
from services.coefficient_service import CoefficientService
from services.innovation_service import InnovationService

logger = logging.getLogger(__name__)

# Number of trailing term norms the decay ratio is fitted on
DECAY_WINDOW = 5
RHO_MAX = 0.99

# Lineage tag of the replicate blocks of vectorized marginal panels
BLOCK_STREAM = 3

_SOUNDNESS_RTOL = 1e-12


def residual_bounds(coefficient_norms, innovation_norms, innovation_max) -> np.ndarray:
    """
    Geometric extrapolation of sum_{j>J} ||Psi_j|| ||Z_j|| from the last terms.

    Each row holds the trailing ||Psi_j|| and ||Z_j|| for j = J-w+1..J and the
    largest ||Z_j|| seen so far in the draw. A log-linear fit over the positive
    term norms gives the decay ratio rho (clamped to [0, 0.99], and 0.99 with
    fewer than two positive terms). The bound is ||Psi_J|| max_j ||Z_j|| *
    rho / (1 - rho), which is never below the realized ||Psi_J|| ||Z_J|| *
    rho / (1 - rho). A window of zero coefficients gives 0; nonzero
    coefficients with no nonzero innovation so far give inf.
    """
    coefficients = np.atleast_2d(np.asarray(coefficient_norms, dtype=float))
    innovations = np.atleast_2d(np.asarray(innovation_norms, dtype=float))
    scale = np.atleast_1d(np.asarray(innovation_max, dtype=float))
    window = coefficients * innovations
    width = window.shape[1]
    positive = window > 0
    count = positive.sum(axis=1)
    logs = np.log(np.where(positive, window, 1.0))
    x = np.broadcast_to(np.arange(width, dtype=float), window.shape)
    sx = np.where(positive, x, 0.0).sum(axis=1)
    sy = np.where(positive, logs, 0.0).sum(axis=1)
    sxx = np.where(positive, x * x, 0.0).sum(axis=1)
    sxy = np.where(positive, x * logs, 0.0).sum(axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        denominator = count * sxx - sx * sx
        slope = np.where(count >= 2, (count * sxy - sx * sy) / denominator, np.nan)
    rho = np.where(count >= 2, np.clip(np.exp(np.nan_to_num(slope, nan=0.0)), 0.0, RHO_MAX), RHO_MAX)
    bound = coefficients[:, -1] * scale * rho / (1.0 - rho)
    live = np.any(coefficients > 0, axis=1)
    bound = np.where(live & (scale == 0), np.inf, bound)
    return np.where(live, bound, 0.0)


def bound_holds(x, total, low, high, terms, rtol: float = _SOUNDNESS_RTOL):
    """
    Whether ||X^{(J_used)} - X^{(J')}|| <= S_{J_used} - S_{J'} for every J' < J_used.

    S_J is the running sum of ||Psi_j|| ||Z_j||; `low` and `high` are the pointwise
    minimum of X^{(J')} - S_{J'} and maximum of X^{(J')} + S_{J'} over J' < J_used,
    with X^{(0)} = S_0 = 0, so no partial sum needs to be kept. Rounding allowance: rtol plus the
    2 * J_used * eps relative error the additions can accumulate, both on S_{J_used}.
    Works per grid point for one path or per replicate for a marginal block.
    """
    slack = (rtol + 2 * np.asarray(terms) * np.finfo(float).eps) * total
    violated = (x - total > low + slack) | (x + total < high - slack)
    return ~violated


class SeriesService:
    """
    Draws of X = sum_{j>=1} Psi_j Z_j with truncation control.

    Z_j is drawn from key.child(INNOVATION_STREAM, j) and the coefficients from
    the coefficient service with the same replicate key, so the first J terms
    of a draw never depend on how many terms are drawn after them.
    """

    def __init__(
        self,
        innovations: Optional[InnovationService] = None,
        coefficients: Optional[CoefficientService] = None,
    ):
        self.innovations = innovations or InnovationService()
        self.coefficients = coefficients or CoefficientService(self.innovations)

    def draw_series(self, key: StreamKey, spec: SeriesSpec, keep_partials: bool = False) -> SeriesDraw:
        """
        One draw of the series.

        Args:
            key: Replicate key
            spec: Series specification
            keep_partials: Record every partial sum X^{(J)}

        Returns:
            SeriesDraw with X, the number of terms used and the residual bound

        Raises:
            TermCapExceededException: If the term cap exceeds the hard cap
            TruncationFailureException: If adaptive truncation reaches J_max with the
                bound above tolerance; carries the partial draw
            PredictabilityViolationException: If a coefficient is driven by a
                current or future innovation
        """
        terms = self.coefficients.iter_coefficients(key, spec.coefficients, spec.innovation)
        return self.accumulate(key, spec, terms, keep_partials)

    def accumulate(
        self,
        key: StreamKey,
        spec: SeriesSpec,
        terms: Iterable[CoefficientTerm],
        keep_partials: bool = False,
    ) -> SeriesDraw:
        """Sum Psi_j Z_j over the given coefficient terms under the configured truncation rule."""
        cap = spec.term_cap
        if cap > settings.MAX_SERIES_TERMS:
            raise TermCapExceededException(cap, settings.MAX_SERIES_TERMS)
        adaptive = spec.truncation == TruncationMode.ADAPTIVE
        square = spec.coefficients.square_innovation

        x = CadlagPath.zeros(spec.grid)
        coefficient_norms: list[float] = []
        innovation_norms: list[float] = []
        norms: list[float] = []
        partials: list[CadlagPath] = []
        bound = 0.0
        total = 0.0
        largest = 0.0
        low = np.zeros(spec.grid.size)
        high = np.zeros(spec.grid.size)
        for term in islice(terms, cap):
            j = term.index
            if any(d >= j for d in term.drivers):
                raise PredictabilityViolationException(j, term.drivers)
            if j > 1:
                low = np.minimum(low, x.values - total)
                high = np.maximum(high, x.values + total)
            z = self.innovations.draw(key.child(INNOVATION_STREAM, j), spec.innovation)
            # the present innovation enters unsquared: X_i = Z_i + c Z_{i-1} X_{i-1}
            if square and j > 1:
                z = pointwise_product(z, z)
            x = add(x, pointwise_product(term.path, z))
            coefficient_norms.append(sup_norm(term.path))
            innovation_norms.append(sup_norm(z))
            norms.append(coefficient_norms[-1] * innovation_norms[-1])
            total += norms[-1]
            largest = max(largest, innovation_norms[-1])
            if keep_partials:
                partials.append(x)
            if adaptive and j >= min(DECAY_WINDOW, cap):
                bound = float(_window_bounds(spec, j, coefficient_norms, innovation_norms, largest)[0])
                if bound < spec.tolerance:
                    break

        if not adaptive:
            bound = float(_window_bounds(spec, len(norms), coefficient_norms, innovation_norms, largest)[0])
        draw = SeriesDraw(
            x=x,
            j_used=len(norms),
            residual_bound=bound,
            term_norms=np.asarray(norms),
            partial_sums=partials if keep_partials else None,
            sound=bool(np.all(bound_holds(x.values, total, low, high, len(norms)))),
        )
        if adaptive and not bound < spec.tolerance:
            raise TruncationFailureException(draw, bound, spec.tolerance)
        return draw

    def draw_panel(
        self,
        key: StreamKey,
        spec: SeriesSpec,
        n: int,
        workers: int = 1,
        keep_partials: bool = False,
    ) -> list[PanelRecord]:
        """
        n independent draws, replicate r drawn with key.child(r).

        Per-replicate failures are recorded with their status instead of being
        dropped, so downstream estimators see the censoring count. The output
        is a pure function of (key, spec, n) for any worker count.

        Args:
            key: Panel key
            spec: Series specification
            n: Number of replicates
            workers: Size of the process pool
            keep_partials: Keep partial sums in each draw

        Returns:
            Records in replicate order
        """
        if n < 1:
            raise InvalidParameterException("n", n, "n >= 1")
        self._warn_if_degenerate(spec)
        logger.info("Drawing %d series replicates on %d worker(s)", n, workers)
        ranges = _split(n, workers)
        if workers == 1 or len(ranges) == 1:
            records = _draw_range(key, spec, 0, n, keep_partials)
        else:
            records = [None] * n
            with ProcessPoolExecutor(max_workers=workers) as executor:
                jobs = [(key, spec, start, stop, keep_partials) for start, stop in ranges]
                for (start, stop), chunk in zip(ranges, executor.map(_draw_range_job, jobs)):
                    records[start:stop] = chunk
        failures = sum(1 for record in records if not record.ok)
        if failures:
            logger.warning("%d of %d replicates did not complete", failures, n)
        return records

    def draw_marginal_panel(
        self,
        key: StreamKey,
        spec: SeriesSpec,
        n: int,
        t: Optional[float] = None,
        workers: int = 1,
    ) -> MarginalPanel:
        """
        Vectorized draws of the scalar marginal X(t) for scalar innovation kinds.

        Replicates are drawn in fixed blocks of settings.REPLICATE_BLOCK_SIZE; block b
        uses streams under key.child(BLOCK_STREAM, b), one per term, so block
        boundaries and results do not depend on the worker count. Each replicate
        stops under the same adaptive rule as draw_series.

        Args:
            key: Panel key
            spec: Series specification with a scalar innovation kind
            n: Number of replicates
            t: Evaluation point, defaults to spec.evaluation_point
            workers: Size of the process pool

        Returns:
            MarginalPanel with values, terms used, residual bounds and status

        Raises:
            InvalidParameterException: If the innovation kind is not scalar
        """
        if not spec.innovation.kind.is_scalar:
            raise InvalidParameterException("innovation.kind", spec.innovation.kind.value, "a scalar kind")
        if spec.term_cap > settings.MAX_SERIES_TERMS:
            raise TermCapExceededException(spec.term_cap, settings.MAX_SERIES_TERMS)
        if n < 1:
            raise InvalidParameterException("n", n, "n >= 1")
        t = spec.evaluation_point if t is None else t
        block = settings.REPLICATE_BLOCK_SIZE
        jobs = [(key, spec, b, min(block, n - b * block), t) for b in range(math.ceil(n / block))]
        logger.info("Drawing %d marginal replicates at t=%g in %d block(s)", n, t, len(jobs))
        if workers == 1 or len(jobs) == 1:
            parts = [_marginal_block_job(job) for job in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                parts = list(executor.map(_marginal_block_job, jobs))
        values, j_used, residual, ok, sound = (np.concatenate(column) for column in zip(*parts))
        panel = MarginalPanel(t, values, j_used, residual, ok, sound)
        if panel.failures:
            logger.warning("%d of %d marginal replicates hit the term cap", panel.failures, n)
        return panel

    def marginal_block(self, key: StreamKey, spec: SeriesSpec, block: int, size: int, t: float):
        """Replicates of one block of draw_marginal_panel."""
        family = spec.coefficients
        grid = spec.grid
        index = grid.index_of(t)
        points = grid.points()
        block_key = key.child(BLOCK_STREAM, block)
        adaptive = spec.truncation == TruncationMode.ADAPTIVE
        square = family.square_innovation
        cap = spec.term_cap

        profile = family.profile.evaluate(points)
        profile_t, profile_sup = profile[index], np.max(np.abs(profile))
        listed = [w * shape.evaluate(points) for shape, w in zip(family.profiles, family.weights)]
        law = family.multiplier

        x = np.zeros(size)
        total = np.zeros(size)
        largest = np.zeros(size)
        low = np.zeros(size)
        high = np.zeros(size)
        running = np.ones(size)
        active = np.ones(size, dtype=bool)
        j_used = np.full(size, cap)
        residual = np.zeros(size)
        coefficient_window: list[np.ndarray] = []
        innovation_window: list[np.ndarray] = []

        for j in range(1, cap + 1):
            z = self.innovations.scalar_samples(block_key.child(INNOVATION_STREAM, j), spec.innovation, size)
            if family.kind == CoefficientKind.DETERMINISTIC_GEOMETRIC:
                psi_t = np.full(size, family.ratio ** (j - 1) * profile_t)
                psi_sup = np.full(size, abs(family.ratio) ** (j - 1) * profile_sup)
            elif family.kind == CoefficientKind.FINITE_LIST:
                path = listed[j - 1] if j <= len(listed) else np.zeros(grid.size)
                psi_t = np.full(size, path[index])
                psi_sup = np.full(size, np.max(np.abs(path)))
            elif family.kind == CoefficientKind.SRE_PRODUCT:
                psi_t = running * profile_t ** (j - 1)
                psi_sup = np.abs(running) * profile_sup ** (j - 1)
                running = running * law.sample(block_key.child(COEFFICIENT_STREAM, j).generator(), size)
            else:
                psi_t = running.copy()
                psi_sup = np.abs(running)
                running = running * family.bilinear_scale * (1.0 if square and j == 1 else z)

            term = z * z if square and j > 1 else z
            if j > 1:
                low = np.where(active, np.minimum(low, x - total), low)
                high = np.where(active, np.maximum(high, x + total), high)
            x = np.where(active, x + psi_t * term, x)
            total = np.where(active, total + psi_sup * np.abs(term), total)
            largest = np.where(active, np.maximum(largest, np.abs(term)), largest)
            coefficient_window = (coefficient_window + [psi_sup])[-DECAY_WINDOW:]
            innovation_window = (innovation_window + [np.abs(term)])[-DECAY_WINDOW:]

            if adaptive and j >= min(DECAY_WINDOW, cap):
                bounds = _window_bounds(
                    spec, j, np.column_stack(coefficient_window), np.column_stack(innovation_window), largest
                )
                stopped = active & (bounds < spec.tolerance)
                j_used[stopped] = j
                residual[stopped] = bounds[stopped]
                active &= ~stopped
                if not active.any():
                    break

        bounds = _window_bounds(
            spec, j, np.column_stack(coefficient_window), np.column_stack(innovation_window), largest
        )
        if adaptive:
            residual[active] = bounds[active]
            ok = ~active
        else:
            residual = bounds
            ok = np.ones(size, dtype=bool)
        sound = bound_holds(x, total, low, high, j_used)
        return x, j_used, residual, ok, sound

    def truncation_gaps(self, draw: SeriesDraw) -> tuple[np.ndarray, np.ndarray]:
        """
        Realized truncation gaps ||X^{(J_used)} - X^{(J')}|| and their bounds
        sum_{J'<j<=J_used} ||Psi_j|| ||Z_j|| for J' = 1..J_used-1.

        Raises:
            InvalidParameterException: If the draw was made without partial sums
        """
        if draw.partial_sums is None:
            raise InvalidParameterException("partial_sums", None, "a draw made with keep_partials=True")
        final = draw.partial_sums[-1].values
        gaps = np.array([np.max(np.abs(final - partial.values)) for partial in draw.partial_sums[:-1]])
        allowed = np.cumsum(draw.term_norms[::-1])[::-1][1:]
        return gaps, allowed

    def soundness_violations(self, draw: SeriesDraw) -> int:
        """
        Count J' whose truncation gap exceeds its bound beyond rounding.

        Rounding allowance: a relative 1e-12 on the bound plus the error the
        J_used floating-point additions can accumulate, J_used * eps * sum ||Psi_j|| ||Z_j||.
        """
        gaps, allowed = self.truncation_gaps(draw)
        slack = 2 * draw.j_used * np.finfo(float).eps * float(np.sum(draw.term_norms))
        return int(np.count_nonzero(gaps > allowed * (1 + _SOUNDNESS_RTOL) + slack))

    def _warn_if_degenerate(self, spec: SeriesSpec) -> None:
        family = spec.coefficients
        if family.kind == CoefficientKind.FINITE_LIST:
            points = spec.grid.points()
            if all(w == 0 or not np.any(shape.evaluate(points)) for shape, w in zip(family.profiles, family.weights)):
                logger.warning("finite-list coefficients are all zero: P(some ||Psi_j|| > 0) = 1 fails")


def _window_bounds(spec: SeriesSpec, j: int, coefficient_norms, innovation_norms, largest) -> np.ndarray:
    family = spec.coefficients
    if family.kind == CoefficientKind.FINITE_LIST and j >= len(family.weights):
        # every later Psi_j is zero
        return np.zeros(np.atleast_1d(largest).shape)
    return residual_bounds(
        np.atleast_2d(coefficient_norms)[:, -DECAY_WINDOW:],
        np.atleast_2d(innovation_norms)[:, -DECAY_WINDOW:],
        largest,
    )


def _split(n: int, workers: int) -> list[tuple[int, int]]:
    chunk = math.ceil(n / max(1, workers))
    return [(start, min(n, start + chunk)) for start in range(0, n, chunk)]


def _draw_range(key: StreamKey, spec: SeriesSpec, start: int, stop: int, keep_partials: bool) -> list[PanelRecord]:
    service = SeriesService()
    records = []
    for r in range(start, stop):
        try:
            draw = service.draw_series(key.child(r), spec, keep_partials)
            records.append(PanelRecord(r, DrawStatus.OK, draw))
        except TruncationFailureException as exc:
            records.append(PanelRecord(r, DrawStatus.TRUNCATION_FAILURE, exc.partial, exc.detail))
        except RVSeriesException as exc:
            records.append(PanelRecord(r, DrawStatus.ERROR, None, str(exc)))
    return records


def _draw_range_job(job) -> list[PanelRecord]:
    return _draw_range(*job)


def _marginal_block_job(job):
    key, spec, block, size, t = job
    return SeriesService().marginal_block(key, spec, block, size, t)
