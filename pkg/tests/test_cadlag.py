import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from core.exceptions import GridMismatchException, InvalidParameterException, ValidationException
from models.cadlag import (
    CadlagPath,
    Grid,
    add,
    argmax_location,
    modulus_interval,
    modulus_w,
    modulus_wpp,
    normalize,
    pointwise_product,
    scale,
    sup_norm,
)


def brute_force_wpp(path: CadlagPath, delta: float) -> float:
    """Triple scan over k1 <= k <= k2 with k2 - k1 inside the window."""
    values = path.values
    width = path.grid.window(delta)
    best = 0.0
    for k1 in range(values.size):
        for k2 in range(k1, min(values.size, k1 + width + 1)):
            middle = values[k1:k2 + 1]
            if middle.size:
                best = max(best, float(np.max(np.minimum(np.abs(middle - values[k1]), np.abs(values[k2] - middle)))))
    return best


paths = st.integers(min_value=1, max_value=30).flatmap(
    lambda m: st.lists(
        st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False),
        min_size=m + 1,
        max_size=m + 1,
    ).map(lambda values: CadlagPath(Grid(m), np.array(values)))
)
deltas = st.floats(min_value=1e-3, max_value=1.0)


# ========== GRID AND PATHS ==========

def test_grid_rejects_bad_resolution():
    with pytest.raises(InvalidParameterException):
        Grid(0)
    with pytest.raises(InvalidParameterException):
        Grid(2.5)


def test_path_shape_and_finiteness_checked(grid):
    with pytest.raises(ValidationException):
        CadlagPath(grid, np.zeros(5))
    with pytest.raises(ValidationException):
        CadlagPath(grid, np.full(grid.size, np.inf))


def test_path_is_right_continuous_step(grid):
    path = CadlagPath.indicator(grid, 0.5)
    assert path.at(0.49) == 0.0
    assert path.at(0.5) == 1.0
    assert path.at(1.0) == 1.0


# ========== NORMS AND MODULI ==========

@pytest.mark.parametrize(
    "values, expected",
    [([1.0, -3.0, 2.0], 3.0), ([0.0, 0.0, 0.0], 0.0), ([0.5, 0.5, 0.5], 0.5)],
)
def test_sup_norm(values, expected):
    assert sup_norm(CadlagPath(Grid(2), values)) == expected


def test_modulus_w_examples(grid):
    assert modulus_w(CadlagPath.constant(grid, 4.0), 0.3) == 0.0
    assert modulus_w(CadlagPath.indicator(grid, 0.5), 0.2) == 1.0
    assert modulus_w(CadlagPath.ramp(grid), 0.3) == pytest.approx(0.3)


def test_moduli_reject_nonpositive_delta(grid):
    path = CadlagPath.ramp(grid)
    with pytest.raises(InvalidParameterException):
        modulus_w(path, 0.0)
    with pytest.raises(InvalidParameterException):
        modulus_wpp(path, -0.1)


def test_wpp_vanishes_on_single_jump(grid):
    for start in (0.1, 0.5, 1.0):
        for delta in (0.1, 0.5, 1.0):
            assert modulus_wpp(CadlagPath.indicator(grid, start, 3.0), delta) == 0.0


def test_wpp_two_jumps_in_one_window(grid):
    path = add(CadlagPath.indicator(grid, 0.3, 1.0), CadlagPath.indicator(grid, 0.5, 0.5))
    assert modulus_wpp(path, 0.3) == 0.5


def test_wpp_on_ramp():
    assert modulus_wpp(CadlagPath.ramp(Grid(100)), 0.1) == pytest.approx(0.05)


def test_wpp_matches_brute_force_on_random_paths():
    rng = np.random.default_rng(500)
    for _ in range(500):
        m = int(rng.integers(1, 51))
        steps = rng.standard_normal(m + 1) * (rng.random(m + 1) < 0.4)
        path = CadlagPath(Grid(m), np.cumsum(steps))
        delta = float(rng.choice([0.05, 0.1, 0.2, 0.5, 1.0]))
        assert modulus_wpp(path, delta) == brute_force_wpp(path, delta)


@pytest.mark.parametrize(
    "start, interval, expected",
    [(None, (0.0, 0.3), 0.0), (0.5, (0.0, 0.4), 0.0), (0.2, (0.0, 0.4), 1.0)],
)
def test_modulus_interval(grid, start, interval, expected):
    path = CadlagPath.constant(grid, 2.0) if start is None else CadlagPath.indicator(grid, start)
    assert modulus_interval(path, interval) == expected


def test_modulus_interval_rejects_empty_interval(grid):
    with pytest.raises(InvalidParameterException):
        modulus_interval(CadlagPath.ramp(grid), (0.4, 0.4))


@given(paths, deltas, deltas)
def test_modulus_w_monotone_in_delta(path, d1, d2):
    small, large = sorted((d1, d2))
    assert modulus_w(path, small) <= modulus_w(path, large)


@given(paths, deltas)
def test_moduli_bounded_by_norm(path, delta):
    assert modulus_wpp(path, delta) <= modulus_w(path, delta) <= 2 * sup_norm(path)


@hypothesis_settings(max_examples=50)
@given(paths)
def test_triangle_inequality(path):
    other = CadlagPath(path.grid, path.values[::-1])
    assert sup_norm(add(path, other)) <= sup_norm(path) + sup_norm(other)


# ========== ALGEBRA ==========

def test_pointwise_product_examples():
    grid = Grid(4)
    jump = CadlagPath.indicator(grid, 0.5)
    assert np.array_equal(pointwise_product(CadlagPath.constant(grid, 1.0), jump).values, jump.values)
    assert sup_norm(pointwise_product(CadlagPath.zeros(grid), jump)) == 0.0
    product = pointwise_product(CadlagPath.ramp(grid), jump)
    assert np.array_equal(product.values, [0.0, 0.0, 0.5, 0.75, 1.0])


def test_scale_and_add_cancel(grid):
    path = CadlagPath.from_function(grid, np.sin)
    assert sup_norm(add(path, scale(path, -1))) == 0.0


def test_grid_mismatch_rejected():
    with pytest.raises(GridMismatchException):
        add(CadlagPath.zeros(Grid(4)), CadlagPath.zeros(Grid(5)))


def test_angular_part(grid):
    path = scale(CadlagPath.indicator(grid, 0.3), -2.5)
    angle = normalize(path)
    assert sup_norm(angle) == 1.0
    assert argmax_location(angle) == pytest.approx(0.3)
    with pytest.raises(ValidationException):
        normalize(CadlagPath.zeros(grid))
