import logging
import math
from collections.abc import Sequence
from typing import Optional

import numpy as np
from scipy import stats

from core.exceptions import (
    DivergentSeriesException,
    EmptySampleException,
    InsufficientDataException,
    InvalidParameterException,
    StatisticalPreconditionException,
)
from models.cadlag import (
    CadlagPath,
    argmax_location,
    modulus_interval,
    modulus_wpp,
    normalize,
    sup_norm,
)
from models.stream import COEFFICIENT_STREAM, INNOVATION_STREAM, StreamKey
from models.tails import SpectralSample
from schemas.coefficients import CoefficientFamily, CoefficientKind, ScalarLaw
from schemas.innovation import InnovationSpec, TailModel
from schemas.report import (
    AdditivityCheck,
    Band,
    BreimanCheck,
    MarginalRatioCheck,
    ModulusDiagnostic,
    ModulusRow,
    PizzaSliceCheck,
    PizzaSliceRow,
    RatioPoint,
    RegVarEstimate,
    ScalingCheck,
    SpectralSummary,
    TailConstant,
    TailCurve,
    TailCurvePoint,
)
from services.coefficient_service import CoefficientService
from services.innovation_service import InnovationService

logger = logging.getLogger(__name__)

MIN_SCALING_EXCEEDANCES = 100
MIN_SPECTRAL_K = 30
SCALING_SE_MULTIPLE = 4.0
ARGMAX_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


def default_hill_k(n: int) -> int:
    """ceil(sqrt(n)), kept inside [1, n - 1]."""
    return max(1, min(n - 1, math.ceil(math.sqrt(n))))


def _as_sample(sample, what: str = "sample") -> np.ndarray:
    values = np.asarray(sample, dtype=float).ravel()
    if values.size == 0:
        raise EmptySampleException(what)
    return values


def _check_grid(name: str, grid: Sequence[float]) -> np.ndarray:
    values = np.asarray(grid, dtype=float)
    if values.size == 0 or np.any(values <= 0) or np.any(np.diff(values) <= 0):
        raise InvalidParameterException(name, list(grid), "a nonempty, positive, strictly ascending grid")
    return values


def _ratio_point(x: float, hits_a: np.ndarray, hits_b: np.ndarray) -> RatioPoint:
    """P(A)/P(B) from one sample, with the delta-method SE of correlated counts."""
    n_a, n_b = int(hits_a.sum()), int(hits_b.sum())
    if n_a == 0 or n_b == 0:
        return RatioPoint(x=x, ratio=None, ratio_se=None, exceedances=min(n_a, n_b))
    n_ab = int((hits_a & hits_b).sum())
    ratio = n_a / n_b
    variance = max(0.0, 1.0 / n_a + 1.0 / n_b - 2.0 * n_ab / (n_a * n_b))
    return RatioPoint(x=x, ratio=ratio, ratio_se=ratio * math.sqrt(variance), exceedances=min(n_a, n_b))


def _mean_ratio(points: list[RatioPoint], target: float) -> tuple[Optional[float], Optional[float]]:
    ratios = [point.ratio for point in points if point.ratio is not None]
    if not ratios:
        return None, None
    mean = float(np.mean(ratios))
    return mean, abs(mean - target) / target if target else None


def _within(relative_error: Optional[float], tolerance: float) -> bool:
    return relative_error is not None and relative_error <= tolerance


def _band(estimate: float, replicates: np.ndarray) -> Band:
    lower, upper = np.percentile(replicates, [2.5, 97.5])
    return Band(estimate=float(estimate), lower=float(lower), upper=float(upper))


class TailService:
    """
    Verification of regular variation on samples of norms, marginals and paths.

    Estimators are pure functions of their inputs; the only randomness is in the
    Monte Carlo oracles and bootstrap bands, which take a StreamKey.
    """

    def __init__(
        self,
        innovations: Optional[InnovationService] = None,
        coefficients: Optional[CoefficientService] = None,
    ):
        self.innovations = innovations or InnovationService()
        self.coefficients = coefficients or CoefficientService(self.innovations)

    # ========== TAIL INDEX ==========

    def hill_estimate(self, sample, k: int) -> RegVarEstimate:
        """
        Hill estimator over the k largest order statistics.

        Args:
            sample: Positive observations (typically sup-norms)
            k: Number of order statistics above the threshold X_(k+1)

        Returns:
            RegVarEstimate with alpha = 1 / mean(ln X_(i) / X_(k+1)),
            c = (k/n) X_(k+1)^alpha and their standard errors

        Raises:
            EmptySampleException: If the sample is empty
            InvalidParameterException: If k is outside [1, n) or one of the top
                k+1 values is not strictly positive
            StatisticalPreconditionException: If the top k values are all tied
                with X_(k+1)
        """
        values = _as_sample(sample, "Hill sample")
        n = values.size
        if not 1 <= k < n:
            raise InvalidParameterException("k", k, f"1 <= k < n = {n}")
        top = np.sort(values)[::-1][: k + 1]
        if not np.all(top > 0):
            raise InvalidParameterException("sample", "nonpositive order statistic", "top k+1 values > 0")
        threshold = top[k]
        mean_excess = float(np.mean(np.log(top[:k] / threshold)))
        if not mean_excess > 0:
            raise StatisticalPreconditionException("Hill estimator undefined: top order statistics are tied")
        alpha = 1.0 / mean_excess
        c = k / n * threshold ** alpha
        c_se = c * math.sqrt((1.0 + (alpha * math.log(threshold)) ** 2) / k)
        logger.debug("Hill estimate alpha=%.4f from k=%d of n=%d", alpha, k, n)
        return RegVarEstimate(alpha=alpha, c=c, k=k, n=n, alpha_se=alpha / math.sqrt(k), c_se=c_se)

    def hill_sensitivity(self, sample, k: Optional[int] = None) -> list[RegVarEstimate]:
        """Hill estimates at k/2, k and 2k (k defaults to ceil(sqrt(n)))."""
        values = _as_sample(sample, "Hill sample")
        k = default_hill_k(values.size) if k is None else k
        ks = sorted({max(1, k // 2), k, min(2 * k, values.size - 1)})
        return [self.hill_estimate(values, kk) for kk in ks]

    # ========== NORMALIZATION AND TAIL CURVES ==========

    def normalizer_a_n(self, sample, n_target: int) -> float:
        """
        Empirical (1 - 1/n_target)-quantile: the order statistic of ascending
        rank ceil(N (1 - 1/n_target)) = N - floor(N / n_target).

        Raises:
            InvalidParameterException: Unless N >= n_target >= 2
        """
        values = _as_sample(sample)
        size = values.size
        if not 2 <= n_target <= size:
            raise InvalidParameterException("n_target", n_target, f"2 <= n_target <= N = {size}")
        rank = size - size // n_target
        return float(np.sort(values)[rank - 1])

    def tail_curve(
        self,
        sample,
        a_n: float,
        n: int,
        r_grid: Sequence[float],
        estimate: Optional[RegVarEstimate] = None,
    ) -> TailCurve:
        """
        n * P(X > a_n r) on r_grid, paired with the fitted n c (a_n r)^{-alpha} when
        an estimate is given.
        """
        values = _as_sample(sample)
        radii = _check_grid("r_grid", r_grid)
        if not a_n > 0:
            raise InvalidParameterException("a_n", a_n, "a_n > 0")
        points = []
        for r in radii:
            level = a_n * r
            empirical = n * float(np.mean(values > level))
            model = None if estimate is None else n * estimate.c * level ** (-estimate.alpha)
            points.append(TailCurvePoint(r=float(r), empirical=empirical, model=model))
        return TailCurve(a_n=a_n, n=n, points=points)

    def scaling_check(self, sample, s: float, x0: float, estimate: RegVarEstimate) -> ScalingCheck:
        """
        Compare P(X > s x0) / P(X > x0) with s^{-alpha}.

        The two events are nested, so the ratio has a binomial standard error
        given the larger event. Fewer than 100 exceedances of the smaller event
        leaves the check unjudged rather than failing it.

        Raises:
            InvalidParameterException: If s <= 0, s == 1 or x0 <= 0
        """
        values = _as_sample(sample)
        if not s > 0 or s == 1:
            raise InvalidParameterException("s", s, "s > 0 and s != 1")
        if not x0 > 0:
            raise InvalidParameterException("x0", x0, "x0 > 0")
        base = int(np.count_nonzero(values > x0))
        scaled = int(np.count_nonzero(values > s * x0))
        expected = s ** (-estimate.alpha)
        expected_se = abs(math.log(s)) * expected * estimate.alpha_se
        exceedances = min(base, scaled)
        sufficient = exceedances >= MIN_SCALING_EXCEEDANCES

        ratio = ratio_se = agrees = None
        if base and scaled:
            ratio = scaled / base
            if s > 1:
                ratio_se = math.sqrt(ratio * (1 - ratio) / base)
            else:
                inverse = base / scaled
                ratio_se = math.sqrt(inverse * (1 - inverse) / scaled) / inverse ** 2
            if sufficient:
                combined = math.hypot(ratio_se, expected_se)
                agrees = abs(ratio - expected) <= SCALING_SE_MULTIPLE * combined
        if not sufficient:
            logger.warning("Scaling check has %d exceedances, need %d", exceedances, MIN_SCALING_EXCEEDANCES)
        return ScalingCheck(
            s=s, x0=x0, ratio=ratio, ratio_se=ratio_se, expected=expected, expected_se=expected_se,
            exceedances=exceedances, sufficient=sufficient, agrees=agrees,
        )

    def additivity_check(self, norms_single, norms_sum, x: float) -> AdditivityCheck:
        """P(||Z_1 + Z_2|| > x) / P(||Z_1|| > x) from independent samples; tends to 2."""
        single = _as_sample(norms_single)
        summed = _as_sample(norms_sum)
        p_sum = float(np.mean(summed > x))
        p_single = float(np.mean(single > x))
        if p_sum == 0 or p_single == 0:
            return AdditivityCheck(x=x, ratio=None, ratio_se=None)
        ratio = p_sum / p_single
        se = ratio * math.sqrt(1 / (p_sum * summed.size) + 1 / (p_single * single.size))
        return AdditivityCheck(x=x, ratio=ratio, ratio_se=se)

    # ========== PRODUCT AND SERIES TAIL CONSTANTS ==========

    def breiman_check(
        self,
        key: StreamKey,
        multiplier: ScalarLaw,
        tail: TailModel,
        n: int,
        x_grid: Sequence[float],
        tolerance: float = 0.10,
    ) -> BreimanCheck:
        """
        Monte Carlo P(YZ > x) / P(Z > x) against the limit E[Y^alpha].

        Z is one-sided Pareto from key.child(INNOVATION_STREAM), Y is drawn
        independently from key.child(COEFFICIENT_STREAM).

        Args:
            key: Experiment key
            multiplier: Bounded, nonnegative law of Y
            tail: Tail model of Z
            n: Number of (Y, Z) pairs
            x_grid: Levels x
            tolerance: Largest relative error of the mean ratio that passes

        Returns:
            BreimanCheck with per-level ratios, their mean, the quadrature limit and the verdict

        Raises:
            InvalidParameterException: If Y can be negative or n < 1
        """
        if not multiplier.nonnegative:
            raise InvalidParameterException("multiplier", multiplier.kind.value, "a nonnegative law")
        if n < 1:
            raise InvalidParameterException("n", n, "n >= 1")
        levels = _check_grid("x_grid", x_grid)
        z = self.innovations.pareto_samples(key.child(INNOVATION_STREAM), n, tail)
        y = multiplier.sample(key.child(COEFFICIENT_STREAM).generator(), n)
        product = y * z
        limit = multiplier.moment(tail.alpha)
        points = [_ratio_point(float(x), product > x, z > x) for x in levels]
        mean_ratio, relative_error = _mean_ratio(points, limit)
        logger.info("Breiman ratio %s against E[Y^%g] = %.4f", mean_ratio, tail.alpha, limit)
        return BreimanCheck(
            limit=limit,
            points=points,
            mean_ratio=mean_ratio,
            relative_error=relative_error,
            tolerance=tolerance,
            passed=_within(relative_error, tolerance),
        )

    def series_tail_constant(
        self,
        family: CoefficientFamily,
        t: float,
        alpha: float,
        key: Optional[StreamKey] = None,
        method: str = "auto",
        samples: int = 1000,
        terms: int = 100,
        innovation: Optional[InnovationSpec] = None,
    ) -> TailConstant:
        """
        Predicted sum_{j>=1} E|Psi_j(t)|^alpha, the limit of P(X(t) > x) / P(Z > x)
        for one-sided Pareto innovations.

        Closed forms: geometric |phi(t)|^alpha / (1 - |a|^alpha); SRE
        1 / (1 - E|Y|^alpha |phi(t)|^alpha); finite-list sum_j |w_j phi_j(t)|^alpha.
        The bilinear family, or method="monte-carlo", averages the sum over
        `samples` coefficient replicates truncated at `terms`.

        Raises:
            InvalidParameterException: If alpha <= 0 or method is unknown
            DivergentSeriesException: If the SRE moment term is >= 1
        """
        if not alpha > 0:
            raise InvalidParameterException("alpha", alpha, "alpha > 0")
        if method not in ("auto", "closed-form", "monte-carlo"):
            raise InvalidParameterException("method", method, "auto, closed-form or monte-carlo")
        grid = family.grid
        point = grid.points()[grid.index_of(t)]
        phi = abs(float(family.profile.evaluate(np.array([point]))[0]))

        if method == "monte-carlo" or family.kind == CoefficientKind.BILINEAR_PRODUCT:
            if method == "closed-form":
                raise InvalidParameterException("method", method, "a family with a closed form")
            return self._monte_carlo_constant(family, point, alpha, key or StreamKey(0), samples, terms, innovation)

        if family.kind == CoefficientKind.DETERMINISTIC_GEOMETRIC:
            value = phi ** alpha / (1.0 - abs(family.ratio) ** alpha)
        elif family.kind == CoefficientKind.SRE_PRODUCT:
            moment = family.multiplier.moment(alpha) * phi ** alpha
            if moment >= 1:
                raise DivergentSeriesException(moment, alpha)
            value = 1.0 / (1.0 - moment)
        else:
            value = sum(
                abs(w * float(shape.evaluate(np.array([point]))[0])) ** alpha
                for shape, w in zip(family.profiles, family.weights)
            )
        return TailConstant(value=value, method="closed-form")

    def _monte_carlo_constant(self, family, point, alpha, key, samples, terms, innovation) -> TailConstant:
        index = family.grid.index_of(point)
        sums = np.empty(samples)
        for s in range(samples):
            panel = self.coefficients.generate_coefficients(key.child(s), family, terms, innovation)
            sums[s] = sum(abs(path.values[index]) ** alpha for path in panel.paths)
        se = float(np.std(sums, ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
        return TailConstant(value=float(np.mean(sums)), method="monte-carlo", standard_error=se)

    def norm_tail_constant(
        self,
        family: CoefficientFamily,
        alpha: float,
        key: StreamKey,
        samples: int = 200,
        terms: int = 100,
        innovation: Optional[InnovationSpec] = None,
    ) -> TailConstant:
        """
        Predicted limit of P(||X|| > x) / P(|J| > x) for single-jump innovations:
        E sum_j (sup_{t >= tau} |Psi_j(t)|)^alpha with tau uniform on t_1..t_m.
        """
        sums = np.empty(samples)
        for s in range(samples):
            panel = self.coefficients.generate_coefficients(key.child(s), family, terms, innovation)
            stacked = np.abs(np.vstack([path.values for path in panel.paths]))
            suffix = np.maximum.accumulate(stacked[:, ::-1], axis=1)[:, ::-1]
            sums[s] = float(np.sum(np.mean(suffix[:, 1:] ** alpha, axis=1)))
        se = float(np.std(sums, ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
        return TailConstant(value=float(np.mean(sums)), method="monte-carlo", standard_error=se)

    def marginal_ratio(
        self,
        sample,
        tail: TailModel,
        x_grid: Sequence[float],
        predicted: TailConstant,
        evaluation_point: float,
        tolerance: float = 0.15,
    ) -> MarginalRatioCheck:
        """
        P(X(t) > x) / (p c x^{-alpha}) on x_grid with binomial standard errors.

        Passes when the mean ratio is within `tolerance` of the predicted constant, relatively.
        """
        values = _as_sample(sample, "marginal sample")
        levels = _check_grid("x_grid", x_grid)
        if tail.p == 0:
            raise InvalidParameterException("p", tail.p, "p > 0 for a right-tail ratio")
        n = values.size
        points = []
        for x in levels:
            hits = int(np.count_nonzero(values > x))
            exact = tail.p * tail.exceedance(float(x))
            ratio = hits / n / exact if hits else None
            se = math.sqrt(hits) / n / exact if hits else None
            points.append(RatioPoint(x=float(x), ratio=ratio, ratio_se=se, exceedances=hits))
        mean_ratio, relative_error = _mean_ratio(points, predicted.value)
        return MarginalRatioCheck(
            evaluation_point=evaluation_point,
            predicted=predicted,
            points=points,
            mean_ratio=mean_ratio,
            relative_error=relative_error,
            tolerance=tolerance,
            passed=_within(relative_error, tolerance),
        )

    # ========== SPECTRAL MEASURE ==========

    def spectral_estimate(self, panel: Sequence[CadlagPath], k: int) -> list[SpectralSample]:
        """
        Polar decomposition of the k paths with largest sup-norm.

        The threshold is the (k+1)-th largest norm; paths tied with it are
        dropped so every radius strictly exceeds it.

        Raises:
            InvalidParameterException: If k < 30
            InsufficientDataException: If fewer than k+1 paths have a positive norm
        """
        if k < MIN_SPECTRAL_K:
            raise InvalidParameterException("k", k, f"k >= {MIN_SPECTRAL_K}")
        norms = np.array([sup_norm(path) for path in panel])
        usable = int(np.count_nonzero(norms > 0))
        if usable < k + 1:
            raise InsufficientDataException(k + 1, usable, "paths with positive sup-norm")
        order = np.argsort(-norms, kind="stable")
        threshold = float(norms[order[k]])
        selected = [i for i in order[:k] if norms[i] > threshold]
        if len(selected) < k:
            logger.warning("%d paths tie with the spectral threshold and are dropped", k - len(selected))
        if len(selected) < MIN_SPECTRAL_K:
            raise InsufficientDataException(MIN_SPECTRAL_K, len(selected), "paths above the threshold")
        return [SpectralSample(normalize(panel[i]), float(norms[i]), threshold) for i in selected]

    def spectral_summary(
        self,
        samples: Sequence[SpectralSample],
        angle_points: Sequence[float],
        key: StreamKey,
        bootstrap: int = 200,
    ) -> SpectralSummary:
        """
        Functionals of the empirical spectral measure: sign at the maximum,
        argmax location (quantiles and KS distance to uniform on [0, 1]) and the
        mean angle at fixed times. Sign fraction and argmax median carry
        bootstrap percentile bands.
        """
        if not samples:
            raise EmptySampleException("spectral sample")
        angles = np.vstack([sample.angle.values for sample in samples])
        peaks = np.argmax(np.abs(angles), axis=1)
        positive = (angles[np.arange(len(samples)), peaks] > 0).astype(float)
        locations = np.array([argmax_location(sample.angle) for sample in samples])

        rng = key.generator()
        resamples = rng.integers(0, len(samples), size=(bootstrap, len(samples)))
        grid = samples[0].angle.grid
        return SpectralSummary(
            k=len(samples),
            threshold=samples[0].threshold,
            positive_sign_fraction=_band(positive.mean(), positive[resamples].mean(axis=1)),
            argmax_median=_band(np.median(locations), np.median(locations[resamples], axis=1)),
            argmax_quantiles={f"{q:g}": float(np.quantile(locations, q)) for q in ARGMAX_QUANTILES},
            argmax_ks_uniform=float(stats.kstest(locations, "uniform").statistic),
            angle_means={f"{t:g}": float(angles[:, grid.index_of(t)].mean()) for t in angle_points},
        )

    def pizza_slice_check(
        self,
        panel: Sequence[CadlagPath],
        a_n: float,
        n: int,
        r_grid: Sequence[float],
        bins: int,
        alpha: float,
    ) -> PizzaSliceCheck:
        """
        n P(X / a_n in V_{r;S}) for slices S = (sign at argmax) x (argmax bin),
        against the scaling prediction r^{-alpha} n P(X / a_n in V_{1;S}).
        """
        if not panel:
            raise EmptySampleException("panel")
        radii = _check_grid("r_grid", r_grid)
        if bins < 1:
            raise InvalidParameterException("bins", bins, "bins >= 1")
        values = np.vstack([path.values for path in panel])
        magnitude = np.abs(values)
        peaks = np.argmax(magnitude, axis=1)
        norms = magnitude.max(axis=1)
        signs = np.where(values[np.arange(len(panel)), peaks] >= 0, 1, -1)
        slots = np.minimum(bins - 1, (peaks / panel[0].grid.resolution * bins).astype(int))

        rows = []
        for sign in (1, -1):
            for slot in range(bins):
                in_slice = (signs == sign) & (slots == slot)
                base = n * float(np.mean(in_slice & (norms > a_n)))
                for r in radii:
                    empirical = n * float(np.mean(in_slice & (norms > a_n * r)))
                    rows.append(PizzaSliceRow(
                        sign=sign, bin=slot, r=float(r), empirical=empirical, predicted=base * r ** (-alpha),
                    ))
        return PizzaSliceCheck(n=n, a_n=a_n, alpha=alpha, rows=rows)

    # ========== MODULUS CONDITIONS ==========

    def modulus_diagnostic(
        self,
        panel: Sequence[CadlagPath],
        a_n: float,
        n: int,
        epsilon_grid: Sequence[float],
        delta_grid: Sequence[float],
        fraction: float = 0.1,
        floor: float = 0.05,
    ) -> ModulusDiagnostic:
        """
        n P(w''(Z, delta) > a_n eps) and its analogues with the oscillation on
        [0, delta) and [1 - delta, 1), for every (delta, eps).

        A column decays when its value at the smallest delta is below `fraction`
        of the value at the largest delta, or below `floor`, for every eps. The
        verdict `passed` is that of the w'' column c1; `edges_decay` reports the
        same rule on the edge oscillations c2 and c3 without gating.

        Raises:
            EmptySampleException: If the panel is empty
            InvalidParameterException: If delta_grid is not strictly decreasing in
                (0, 1] or epsilon_grid has a nonpositive entry
        """
        if not panel:
            raise EmptySampleException("panel")
        deltas = np.asarray(delta_grid, dtype=float)
        if deltas.size == 0 or np.any(deltas <= 0) or np.any(deltas > 1) or np.any(np.diff(deltas) >= 0):
            raise InvalidParameterException("delta_grid", list(delta_grid), "strictly decreasing in (0, 1]")
        epsilons = np.asarray(epsilon_grid, dtype=float)
        if epsilons.size == 0 or np.any(epsilons <= 0):
            raise InvalidParameterException("epsilon_grid", list(epsilon_grid), "positive values")

        rows = []
        for delta in deltas:
            c1 = np.array([modulus_wpp(path, delta) for path in panel])
            c2 = np.array([modulus_interval(path, (0.0, delta)) for path in panel])
            c3 = np.array([modulus_interval(path, (1.0 - delta, 1.0)) for path in panel])
            for eps in epsilons:
                level = a_n * eps
                rows.append(ModulusRow(
                    delta=float(delta),
                    epsilon=float(eps),
                    c1=n * float(np.mean(c1 > level)),
                    c2=n * float(np.mean(c2 > level)),
                    c3=n * float(np.mean(c3 > level)),
                ))
            logger.debug("Modulus estimates done for delta=%g", delta)

        decays = {"c1": True, "c2": True, "c3": True}
        for eps in epsilons:
            first = next(row for row in rows if row.delta == deltas[0] and row.epsilon == eps)
            last = next(row for row in rows if row.delta == deltas[-1] and row.epsilon == eps)
            for column in decays:
                small, large = getattr(last, column), getattr(first, column)
                if not (small < fraction * large or small < floor):
                    decays[column] = False
        passed = decays["c1"]
        if not passed:
            logger.warning("w'' estimate does not decay over the delta grid")
        return ModulusDiagnostic(
            n=n,
            a_n=a_n,
            fraction=fraction,
            floor=floor,
            rows=rows,
            passed=passed,
            edges_decay=decays["c2"] and decays["c3"],
        )
