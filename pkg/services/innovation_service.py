import logging
import math

import numpy as np

from core.exceptions import InvalidParameterException
from models.cadlag import CadlagPath, Grid
from models.stream import StreamKey
from schemas.innovation import InnovationKind, InnovationSpec, TailModel

logger = logging.getLogger(__name__)

_MANTISSA = float(2 ** 53)


def open_uniform(rng: np.random.Generator, size=None):
    """Uniform draws on the open interval (0, 1)."""
    return (rng.integers(0, 2 ** 53, size=size) + 0.5) / _MANTISSA


def pareto_transform(u, alpha: float, scale: float):
    """Inverse CDF of the Pareto law: scale * u^{-1/alpha}."""
    return scale * np.power(u, -1.0 / alpha)


def cms_transform(angle, exponential, alpha: float, beta: float):
    """
    Chambers-Mallows-Stuck map from a uniform angle on (-pi/2, pi/2) and a
    standard exponential to a standard alpha-stable variate.
    """
    angle = np.asarray(angle, dtype=float)
    exponential = np.asarray(exponential, dtype=float)
    if alpha == 2:
        return 2.0 * np.sqrt(exponential) * np.sin(angle)
    if alpha == 1:
        if beta == 0:
            return np.tan(angle)
        shifted = math.pi / 2 + beta * angle
        return 2 / math.pi * (
            shifted * np.tan(angle)
            - beta * np.log(math.pi / 2 * exponential * np.cos(angle) / shifted)
        )
    zeta = beta * math.tan(math.pi * alpha / 2)
    cos_angle = np.cos(angle)
    head = (np.sin(alpha * angle) + zeta * np.cos(alpha * angle)) / cos_angle
    tail = (np.cos((1 - alpha) * angle) + zeta * np.sin((1 - alpha) * angle)) / (exponential * cos_angle)
    return head * np.power(tail, (1 - alpha) / alpha)


def _check_pareto(alpha: float, scale: float) -> None:
    if not alpha > 0:
        raise InvalidParameterException("alpha", alpha, "alpha > 0")
    if not scale > 0:
        raise InvalidParameterException("scale", scale, "x_m > 0")


def _check_stable(alpha: float, beta: float) -> None:
    if not 0 < alpha <= 2:
        raise InvalidParameterException("alpha", alpha, "0 < alpha <= 2")
    if not -1 <= beta <= 1:
        raise InvalidParameterException("beta", beta, "-1 <= beta <= 1")


class InnovationService:
    """
    Generators of regularly varying variates and i.i.d. cadlag innovations.
    Every draw is a pure function of its StreamKey.
    """

    def pareto_sample(self, key: StreamKey, alpha: float, scale: float) -> float:
        """
        One Pareto variate with P(X > x) = (x / scale)^{-alpha}, x >= scale.

        Args:
            key: Stream the uniform is drawn from
            alpha: Tail index
            scale: Scale x_m, the infimum of the support

        Returns:
            scale * u^{-1/alpha} for the stream's next u in (0, 1)

        Raises:
            InvalidParameterException: If alpha <= 0 or scale <= 0
        """
        _check_pareto(alpha, scale)
        return float(pareto_transform(open_uniform(key.generator()), alpha, scale))

    def pareto_samples(self, key: StreamKey, size: int, tail: TailModel, signed: bool = False) -> np.ndarray:
        """
        Vectorized Pareto draws with the law of the given tail model.

        Args:
            key: Stream for the whole vector
            size: Number of draws
            tail: Tail model; its scale is c^{1/alpha}
            signed: Attach sign +1 with probability tail.p, else -1

        Returns:
            Array of draws
        """
        rng = key.generator()
        magnitudes = pareto_transform(open_uniform(rng, size), tail.alpha, tail.scale)
        if not signed:
            return magnitudes
        return np.where(rng.random(size) < tail.p, magnitudes, -magnitudes)

    def stable_sample(self, key: StreamKey, alpha: float, beta: float) -> float:
        """
        One standard alpha-stable variate by the CMS transformation.

        Raises:
            InvalidParameterException: If alpha is outside (0, 2] or beta outside [-1, 1]
        """
        return float(self.stable_samples(key, 1, alpha, beta)[0])

    def stable_samples(self, key: StreamKey, size: int, alpha: float, beta: float) -> np.ndarray:
        _check_stable(alpha, beta)
        rng = key.generator()
        angle = (open_uniform(rng, size) - 0.5) * math.pi
        exponential = -np.log(open_uniform(rng, size))
        return cms_transform(angle, exponential, alpha, beta)

    def compound_poisson_path(self, key: StreamKey, grid: Grid, rate: float, jump_tail: TailModel) -> CadlagPath:
        """
        Compound Poisson path Z(t) = sum_{tau_i <= t} J_i with Pareto-tailed signed jumps.

        Jump times are uniform on [0, 1] snapped to the nearest grid point t_k with
        k >= 1, so Z(0) = 0 and the sup-norm and moduli are exact on the grid.

        Args:
            key: Stream for this path
            grid: Grid of the path
            rate: Poisson intensity lambda on [0, 1]
            jump_tail: Tail model of the jump sizes

        Returns:
            Step path with N ~ Poisson(rate) jumps

        Raises:
            InvalidParameterException: If rate < 0
        """
        if not rate >= 0:
            raise InvalidParameterException("rate", rate, "lambda >= 0")
        rng = key.generator()
        count = int(rng.poisson(rate))
        increments = np.zeros(grid.size)
        if count:
            slots = np.maximum(1, np.rint(rng.random(count) * grid.resolution).astype(int))
            sizes = pareto_transform(open_uniform(rng, count), jump_tail.alpha, jump_tail.scale)
            signs = np.where(rng.random(count) < jump_tail.p, 1.0, -1.0)
            np.add.at(increments, slots, signs * sizes)
        return CadlagPath(grid, np.cumsum(increments))

    def single_jump_path(self, key: StreamKey, grid: Grid, jump_tail: TailModel) -> CadlagPath:
        """
        Z = J * 1_{[tau, 1]} with tau uniform on {t_1, ..., t_m} and J signed Pareto.
        The sup-norm is |J| exactly.
        """
        rng = key.generator()
        slot = int(rng.integers(1, grid.resolution + 1))
        size = float(pareto_transform(open_uniform(rng), jump_tail.alpha, jump_tail.scale))
        sign = 1.0 if rng.random() < jump_tail.p else -1.0
        values = np.zeros(grid.size)
        values[slot:] = sign * size
        return CadlagPath(grid, values)

    def scalar_samples(self, key: StreamKey, spec: InnovationSpec, size: int) -> np.ndarray:
        """Vectorized values of a scalar innovation kind (its paths are constant in t)."""
        if spec.kind == InnovationKind.PARETO_SCALAR:
            return self.pareto_samples(key, size, spec.tail, signed=True)
        if spec.kind == InnovationKind.STABLE_SCALAR:
            return spec.scale * self.stable_samples(key, size, spec.alpha, spec.beta)
        if spec.kind == InnovationKind.CONSTANT:
            return np.full(size, spec.level)
        raise InvalidParameterException("kind", spec.kind.value, "a scalar innovation kind")

    def draw(self, key: StreamKey, spec: InnovationSpec) -> CadlagPath:
        """One innovation path of the given kind."""
        grid = spec.grid
        if spec.kind == InnovationKind.COMPOUND_POISSON:
            return self.compound_poisson_path(key, grid, spec.rate, spec.tail)
        if spec.kind == InnovationKind.SINGLE_JUMP:
            return self.single_jump_path(key, grid, spec.tail)
        return CadlagPath.constant(grid, float(self.scalar_samples(key, spec, 1)[0]))

    def iid_panel(self, key: StreamKey, spec: InnovationSpec, count: int) -> list[CadlagPath]:
        """
        count i.i.d. innovations; element j (1-based) is drawn from key.child(j)
        and is reproducible in isolation.

        Raises:
            InvalidParameterException: If count < 1
        """
        if count < 1:
            raise InvalidParameterException("count", count, "count >= 1")
        logger.debug("Drawing %d %s innovations", count, spec.kind.value)
        return [self.draw(key.child(j), spec) for j in range(1, count + 1)]
