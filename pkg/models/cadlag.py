"""
Finite-resolution càdlàg paths on [0,1].

A path is stored as its values on the uniform grid t_k = k/m and read as the
right-continuous step function x(t) = values[floor(t*m)], x(1) = values[m].
Suprema over [0,1] are grid maxima, which is exact for step paths whose
jumps sit on grid points.
"""
from dataclasses import dataclass
import math
from typing import Callable

import numpy as np

from core.exceptions import GridMismatchException, InvalidParameterException, ValidationException

# Absorbs float noise in products like 0.3 * 10 before flooring to a window size
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class Grid:
    resolution: int

    def __post_init__(self):
        if isinstance(self.resolution, bool) or not isinstance(self.resolution, (int, np.integer)):
            raise InvalidParameterException("resolution", self.resolution, "integer m >= 1")
        if self.resolution < 1:
            raise InvalidParameterException("resolution", self.resolution, "m >= 1")
        object.__setattr__(self, "resolution", int(self.resolution))

    @property
    def size(self) -> int:
        return self.resolution + 1

    def points(self) -> np.ndarray:
        return np.arange(self.size, dtype=float) / self.resolution

    def index_of(self, t: float) -> int:
        """Index k of the grid cell [t_k, t_{k+1}) holding t; t = 1 maps to m."""
        if not 0.0 <= t <= 1.0:
            raise InvalidParameterException("t", t, "0 <= t <= 1")
        return min(int(math.floor(t * self.resolution + _GRID_EPS)), self.resolution)

    def window(self, delta: float) -> int:
        """Largest index distance l with l/m <= delta, capped at m."""
        return min(int(math.floor(delta * self.resolution + _GRID_EPS)), self.resolution)


@dataclass(frozen=True, eq=False)
class CadlagPath:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValidationException(
                f"Path needs {self.grid.size} values for resolution {self.grid.resolution}, "
                f"got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationException("Path values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    # Constructors

    @classmethod
    def zeros(cls, grid: Grid) -> "CadlagPath":
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def constant(cls, grid: Grid, level: float) -> "CadlagPath":
        return cls(grid, np.full(grid.size, float(level)))

    @classmethod
    def indicator(cls, grid: Grid, start: float, height: float = 1.0) -> "CadlagPath":
        """height * 1_{[start, 1]}, with start snapped to its grid cell."""
        values = np.zeros(grid.size)
        values[grid.index_of(start):] = height
        return cls(grid, values)

    @classmethod
    def ramp(cls, grid: Grid) -> "CadlagPath":
        return cls(grid, grid.points())

    @classmethod
    def from_function(cls, grid: Grid, f: Callable[[np.ndarray], np.ndarray]) -> "CadlagPath":
        return cls(grid, np.broadcast_to(f(grid.points()), (grid.size,)))

    def at(self, t: float) -> float:
        return float(self.values[self.grid.index_of(t)])

    def __repr__(self) -> str:
        return f"CadlagPath(m={self.grid.resolution}, sup={sup_norm(self):.6g})"


def _check_same_grid(x: CadlagPath, y: CadlagPath) -> None:
    if x.grid != y.grid:
        raise GridMismatchException(x.grid.resolution, y.grid.resolution)


def _check_delta(delta: float) -> None:
    if not delta > 0:
        raise InvalidParameterException("delta", delta, "delta > 0")


def _forward_increments(values: np.ndarray, width: int) -> np.ndarray:
    """inc[k, d] = |x(t_{k+d}) - x(t_k)| for d = 0..width, zero past the right end."""
    size = values.size
    idx = np.arange(size)[:, None] + np.arange(width + 1)[None, :]
    inside = idx < size
    inc = np.abs(values[np.minimum(idx, size - 1)] - values[:, None])
    return np.where(inside, inc, 0.0)


def _backward_increments(values: np.ndarray, width: int) -> np.ndarray:
    """inc[k, d] = |x(t_k) - x(t_{k-d})| for d = 0..width, zero past the left end."""
    idx = np.arange(values.size)[:, None] - np.arange(width + 1)[None, :]
    inside = idx >= 0
    inc = np.abs(values[:, None] - values[np.maximum(idx, 0)])
    return np.where(inside, inc, 0.0)


def sup_norm(x: CadlagPath) -> float:
    return float(np.max(np.abs(x.values)))


def modulus_w(x: CadlagPath, delta: float) -> float:
    """sup_{|s-t| <= delta} |x(s) - x(t)| over grid pairs, O(m * w) for w = floor(delta*m)."""
    _check_delta(delta)
    width = x.grid.window(delta)
    if width == 0:
        return 0.0
    return float(_forward_increments(x.values, width).max())


def modulus_wpp(x: CadlagPath, delta: float) -> float:
    """
    Two-sided oscillation modulus w''(x, delta).

    Exact supremum over grid triples k1 <= k <= k2 with t_{k2} - t_{k1} <= delta of
    min(|x(t_k) - x(t_{k1})|, |x(t_{k2}) - x(t_k)|).

    For a fixed middle point k and left offset d1, the best right point is the
    largest right increment within offset w - d1, so a running maximum over the
    right offsets reduces the triple scan to O(m * w) time and memory, with
    w = floor(delta*m).
    """
    _check_delta(delta)
    width = x.grid.window(delta)
    if width < 2:
        return 0.0
    right = np.maximum.accumulate(_forward_increments(x.values, width), axis=1)
    left = _backward_increments(x.values, width)
    # column d1 of left pairs with right offsets up to width - d1
    return float(np.minimum(left, right[:, ::-1]).max())


def modulus_interval(x: CadlagPath, interval: tuple[float, float]) -> float:
    """w(x, [a, b)): oscillation over the grid points inside the half-open interval."""
    start, end = interval
    if not (0.0 <= start < end <= 1.0):
        raise InvalidParameterException("interval", interval, "0 <= a < b <= 1")
    m = x.grid.resolution
    lo = math.ceil(start * m - _GRID_EPS)
    hi = math.ceil(end * m - _GRID_EPS)
    inside = x.values[lo:hi]
    if inside.size <= 1:
        return 0.0
    return float(inside.max() - inside.min())


def pointwise_product(psi: CadlagPath, x: CadlagPath) -> CadlagPath:
    _check_same_grid(psi, x)
    return CadlagPath(x.grid, psi.values * x.values)


def add(x: CadlagPath, y: CadlagPath) -> CadlagPath:
    _check_same_grid(x, y)
    return CadlagPath(x.grid, x.values + y.values)


def scale(x: CadlagPath, s: float) -> CadlagPath:
    return CadlagPath(x.grid, s * x.values)


def argmax_location(x: CadlagPath) -> float:
    """First grid time at which |x| attains its supremum."""
    return float(np.argmax(np.abs(x.values))) / x.grid.resolution


def normalize(x: CadlagPath) -> CadlagPath:
    """Angular part x / ||x||, a point of the unit sup-norm sphere."""
    norm = sup_norm(x)
    if norm == 0.0:
        raise ValidationException("The zero path has no angular part")
    return CadlagPath(x.grid, x.values / norm)
