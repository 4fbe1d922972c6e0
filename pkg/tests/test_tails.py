import math

import numpy as np
import pytest

from core.exceptions import (
    DivergentSeriesException,
    EmptySampleException,
    InsufficientDataException,
    InvalidParameterException,
    StatisticalPreconditionException,
)
from models.cadlag import CadlagPath, Grid, scale, sup_norm
from schemas.coefficients import CoefficientFamily, CoefficientKind, LawKind, ScalarLaw
from schemas.innovation import InnovationKind, InnovationSpec, TailModel
from schemas.report import RegVarEstimate, TailConstant
from services.tail_service import default_hill_k


def estimate(alpha: float, alpha_se: float = 0.01) -> RegVarEstimate:
    return RegVarEstimate(alpha=alpha, c=1.0, k=100, n=1000, alpha_se=alpha_se, c_se=0.01)


def pareto(innovations, key, n: int, alpha: float) -> np.ndarray:
    return innovations.pareto_samples(key, n, TailModel(alpha=alpha))


# ========== HILL ==========

def test_hill_on_exponential_order_statistics(tails):
    sample = [math.e ** 3, math.e ** 2, math.e, 1.0]
    result = tails.hill_estimate(sample, 2)
    assert result.alpha == pytest.approx(2 / 3, rel=1e-12)
    assert result.k == 2 and result.n == 4


def test_hill_is_scale_free(tails, innovations, key):
    sample = pareto(innovations, key, 5000, 1.5)
    base = tails.hill_estimate(sample, 100)
    scaled = tails.hill_estimate(7.0 * sample, 100)
    assert scaled.alpha == pytest.approx(base.alpha, rel=1e-12)


@pytest.mark.slow
def test_hill_recovers_pareto_index(tails, innovations, key):
    sample = pareto(innovations, key, 100_000, 2.0)
    k = default_hill_k(sample.size)
    result = tails.hill_estimate(sample, k)
    assert k == 317
    assert abs(result.alpha - 2.0) < 3 * result.alpha_se
    assert tails.hill_estimate(sample, 10_000).alpha == pytest.approx(2.0, abs=0.15)


def test_hill_rejects_bad_inputs(tails):
    with pytest.raises(EmptySampleException):
        tails.hill_estimate([], 1)
    with pytest.raises(InvalidParameterException):
        tails.hill_estimate([3.0, 2.0, 1.0], 3)
    with pytest.raises(InvalidParameterException):
        tails.hill_estimate([3.0, 2.0, 0.0], 2)
    with pytest.raises(StatisticalPreconditionException):
        tails.hill_estimate([2.0, 2.0, 2.0, 1.0], 2)


def test_hill_sensitivity_sweep(tails, innovations, key):
    sample = pareto(innovations, key, 100, 1.0)
    sweep = tails.hill_sensitivity(sample)
    assert [result.k for result in sweep] == [5, 10, 20]


# ========== NORMALIZER AND TAIL CURVES ==========

def test_normalizer_rank(tails):
    sample = np.arange(1, 101, dtype=float)
    assert tails.normalizer_a_n(sample, 100) == 99.0
    assert tails.normalizer_a_n(sample, 2) == 50.0
    with pytest.raises(InvalidParameterException):
        tails.normalizer_a_n(sample, 1)
    with pytest.raises(InvalidParameterException):
        tails.normalizer_a_n(sample, 101)


@pytest.mark.slow
def test_normalizer_matches_pareto_quantile(tails, innovations, key):
    sample = pareto(innovations, key, 1_000_000, 1.0)
    assert tails.normalizer_a_n(sample, 1000) == pytest.approx(1000, rel=0.1)


def test_tail_curve_edges(tails):
    sample = np.array([2.0, 3.0, 5.0, 8.0])
    curve = tails.tail_curve(sample, a_n=1.0, n=50, r_grid=[1.0, 4.0, 10.0])
    assert [point.empirical for point in curve.points] == [50.0, 25.0, 0.0]
    assert all(point.model is None for point in curve.points)
    with pytest.raises(InvalidParameterException):
        tails.tail_curve(sample, 1.0, 50, [2.0, 1.0])
    with pytest.raises(EmptySampleException):
        tails.tail_curve([], 1.0, 50, [1.0])


def test_tail_curve_is_nonincreasing(tails, innovations, key):
    sample = pareto(innovations, key, 10_000, 1.2)
    curve = tails.tail_curve(sample, 10.0, 100, [0.5, 1, 2, 4, 8], estimate(1.2))
    values = [point.empirical for point in curve.points]
    assert values == sorted(values, reverse=True)
    assert all(0 <= value <= 100 for value in values)
    assert curve.points[0].model == pytest.approx(100 * 5.0 ** -1.2)


@pytest.mark.slow
def test_tail_curve_of_pareto(tails, innovations, key):
    big_n, n = 1_000_000, 1000
    sample = pareto(innovations, key, big_n, 1.0)
    a_n = tails.normalizer_a_n(sample, n)
    value = tails.tail_curve(sample, a_n, n, [2.0]).points[0].empirical
    p = 1 / (2 * a_n)
    assert abs(value - n * p) < 4 * n * math.sqrt(p / big_n)
    assert value == pytest.approx(0.5, abs=0.1)


# ========== SCALING AND ADDITIVITY ==========

@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_scaling_of_pareto_tails(tails, innovations, key, alpha):
    sample = pareto(innovations, key, 200_000, alpha)
    check = tails.scaling_check(sample, 2.0, 3.0, estimate(alpha))
    assert check.expected == pytest.approx(2.0 ** -alpha)
    assert check.sufficient
    assert check.agrees
    assert check.ratio == pytest.approx(2.0 ** -alpha, abs=4 * math.hypot(check.ratio_se, check.expected_se))


def test_scaling_below_one(tails, innovations, key):
    sample = pareto(innovations, key, 200_000, 1.0)
    check = tails.scaling_check(sample, 0.5, 10.0, estimate(1.0))
    assert check.ratio == pytest.approx(2.0, rel=0.1)
    assert check.agrees


def test_scaling_with_few_exceedances_is_unjudged(tails):
    check = tails.scaling_check(np.arange(1.0, 51.0), 2.0, 10.0, estimate(1.0))
    assert not check.sufficient
    assert check.agrees is None


@pytest.mark.parametrize("s, x0", [(1.0, 2.0), (0.0, 2.0), (2.0, 0.0)])
def test_scaling_rejects_degenerate_arguments(tails, s, x0):
    with pytest.raises(InvalidParameterException):
        tails.scaling_check([1.0, 2.0], s, x0, estimate(1.0))


def test_additivity_of_independent_pareto(tails, innovations, key):
    n = 1_000_000
    z1 = pareto(innovations, key.child(1), n, 1.5)
    z2 = pareto(innovations, key.child(2), n, 1.5)
    check = tails.additivity_check(z1, z1 + z2, 100.0)
    # first-order correction 2 (1 + alpha E[Z] / x) with E[Z] = 3
    assert abs(check.ratio - 2.09) < 5 * check.ratio_se
    assert check.expected == 2.0


def test_additivity_without_exceedances(tails):
    assert tails.additivity_check([1.0, 2.0], [1.0, 3.0], 10.0).ratio is None


# ========== BREIMAN ==========

def test_breiman_with_unit_multiplier(tails, key):
    unit = ScalarLaw(kind=LawKind.CONSTANT, value=1.0)
    check = tails.breiman_check(key, unit, TailModel(alpha=1.5), 10_000, [2.0, 5.0])
    assert check.limit == 1.0
    assert [point.ratio for point in check.points] == [1.0, 1.0]
    assert check.relative_error == 0.0
    assert check.passed


def test_breiman_with_constant_multiplier(tails, key):
    check = tails.breiman_check(key, ScalarLaw(kind=LawKind.CONSTANT, value=3.0), TailModel(alpha=1.0), 100_000, [10.0])
    assert check.limit == 3.0
    point = check.points[0]
    assert abs(point.ratio - 3.0) < 4 * point.ratio_se


@pytest.mark.slow
def test_breiman_with_uniform_multiplier(tails, key):
    law = ScalarLaw(kind=LawKind.UNIFORM, low=0.0, high=2.0)
    check = tails.breiman_check(key, law, TailModel(alpha=1.5), 1_000_000, [20.0, 50.0])
    assert check.limit == pytest.approx(2 ** 2.5 / 5, rel=1e-8)
    assert check.relative_error < 0.1
    assert check.passed


def test_breiman_rejects_signed_multipliers(tails, key):
    law = ScalarLaw(kind=LawKind.UNIFORM, low=-1.0, high=1.0)
    with pytest.raises(InvalidParameterException):
        tails.breiman_check(key, law, TailModel(alpha=1.5), 100, [2.0])


# ========== SERIES TAIL CONSTANTS ==========

def test_geometric_series_constant(tails):
    family = CoefficientFamily(ratio=0.5, resolution=10)
    constant = tails.series_tail_constant(family, 0.5, 1.5)
    assert constant.method == "closed-form"
    assert constant.value == pytest.approx(1 / (1 - 0.5 ** 1.5), rel=1e-12)
    assert constant.value == pytest.approx(1.5469, abs=1e-4)


def test_sre_series_constant(tails):
    family = CoefficientFamily(kind=CoefficientKind.SRE_PRODUCT, y_low=0.0, y_high=0.9, resolution=10)
    constant = tails.series_tail_constant(family, 1.0, 1.5)
    moment = 0.9 ** 1.5 / 2.5
    assert constant.value == pytest.approx(1 / (1 - moment), rel=1e-8)
    assert constant.value == pytest.approx(1.5187, abs=1e-4)


def test_finite_list_series_constant(tails):
    family = CoefficientFamily(kind=CoefficientKind.FINITE_LIST, resolution=10)
    assert tails.series_tail_constant(family, 0.3, 0.8).value == 1.0


def test_divergent_sre_constant(tails):
    family = CoefficientFamily(kind=CoefficientKind.SRE_PRODUCT, y_law=LawKind.CONSTANT, y_value=1.0, resolution=10)
    with pytest.raises(DivergentSeriesException):
        tails.series_tail_constant(family, 1.0, 1.5)


def test_monte_carlo_constant_agrees_with_closed_form(tails, key):
    geometric = CoefficientFamily(ratio=0.5, resolution=10)
    closed = tails.series_tail_constant(geometric, 0.5, 1.5)
    sampled = tails.series_tail_constant(geometric, 0.5, 1.5, key, method="monte-carlo", samples=5)
    assert sampled.method == "monte-carlo"
    assert sampled.value == pytest.approx(closed.value, rel=1e-9)

    sre = CoefficientFamily(kind=CoefficientKind.SRE_PRODUCT, y_low=0.0, y_high=0.9, resolution=10)
    closed = tails.series_tail_constant(sre, 1.0, 1.5)
    sampled = tails.series_tail_constant(sre, 1.0, 1.5, key, method="monte-carlo", samples=2000, terms=60)
    assert abs(sampled.value - closed.value) < 4 * sampled.standard_error


def test_bilinear_constant_needs_monte_carlo(tails, key):
    innovation = InnovationSpec(kind=InnovationKind.PARETO_SCALAR, alpha=1.5, resolution=10)
    bilinear = CoefficientFamily(kind=CoefficientKind.BILINEAR_PRODUCT, bilinear_scale=0.2, resolution=10)
    constant = tails.series_tail_constant(bilinear, 1.0, 1.5, key, samples=50, terms=30, innovation=innovation)
    assert constant.method == "monte-carlo"
    assert constant.value >= 1.0
    with pytest.raises(InvalidParameterException):
        tails.series_tail_constant(bilinear, 1.0, 1.5, key, method="closed-form", innovation=innovation)
    with pytest.raises(InvalidParameterException):
        tails.series_tail_constant(bilinear, 1.0, 1.5, key, method="guess")


def test_norm_tail_constant_of_unit_coefficient(tails, key):
    family = CoefficientFamily(kind=CoefficientKind.FINITE_LIST, resolution=10)
    constant = tails.norm_tail_constant(family, 1.5, key, samples=3, terms=5)
    assert constant.value == 1.0
    geometric = CoefficientFamily(ratio=0.5, resolution=10)
    assert tails.norm_tail_constant(geometric, 1.5, key, samples=2).value == pytest.approx(1 / (1 - 0.5 ** 1.5))


def test_marginal_ratio_of_pareto_sample(tails, innovations, key):
    tail = TailModel(alpha=1.0)
    sample = innovations.pareto_samples(key, 100_000, tail)
    check = tails.marginal_ratio(sample, tail, [10.0, 100.0], TailConstant(value=1.0, method="closed-form"), 1.0)
    assert check.mean_ratio == pytest.approx(1.0, abs=0.08)
    assert check.relative_error < 0.08
    assert check.passed
    doubled = TailConstant(value=2.0, method="closed-form")
    assert not tails.marginal_ratio(sample, tail, [10.0, 100.0], doubled, 1.0, 0.15).passed
    with pytest.raises(InvalidParameterException):
        tails.marginal_ratio(sample, TailModel(alpha=1.0, p=0.0), [10.0], check.predicted, 1.0)


# ========== SPECTRAL MEASURE ==========

def constant_panel(innovations, key, count: int, grid: Grid) -> list[CadlagPath]:
    values = innovations.pareto_samples(key, count, TailModel(alpha=1.5, p=0.5), signed=True)
    return [CadlagPath.constant(grid, float(v)) for v in values]


def test_constant_paths_have_constant_angles(tails, innovations, key, grid):
    samples = tails.spectral_estimate(constant_panel(innovations, key, 200, grid), 50)
    assert len(samples) == 50
    for sample in samples:
        assert np.all(np.abs(sample.angle.values) == 1.0)
        assert np.all(sample.angle.values == sample.angle.values[0])
        assert sample.radius > sample.threshold


def test_spectral_estimate_commutes_with_rescaling(tails, innovations, key, grid):
    panel = constant_panel(innovations, key, 200, grid)
    base = tails.spectral_estimate(panel, 40)
    doubled = tails.spectral_estimate([scale(path, 2.0) for path in panel], 40)
    for a, b in zip(base, doubled):
        assert np.array_equal(a.angle.values, b.angle.values)
        assert b.radius == 2 * a.radius


def test_spectral_estimate_preconditions(tails, innovations, key, grid):
    panel = constant_panel(innovations, key, 20, grid)
    with pytest.raises(InvalidParameterException):
        tails.spectral_estimate(panel, 10)
    with pytest.raises(InsufficientDataException):
        tails.spectral_estimate(panel, 30)


@pytest.mark.slow
def test_single_jump_argmax_is_uniform(tails, innovations, key):
    grid = Grid(100)
    panel = [innovations.single_jump_path(key.child(i), grid, TailModel(alpha=1.5)) for i in range(6000)]
    samples = tails.spectral_estimate(panel, 3000)
    summary = tails.spectral_summary(samples, [0.5], key.child(1), bootstrap=50)
    assert summary.k == 3000
    assert summary.positive_sign_fraction.estimate == 1.0
    assert summary.positive_sign_fraction.lower == 1.0
    assert summary.argmax_ks_uniform < 0.05
    assert summary.angle_means["0.5"] == pytest.approx(0.5, abs=0.05)
    assert set(summary.argmax_quantiles) == {"0.1", "0.25", "0.5", "0.75", "0.9"}


def test_spectral_summary_requires_samples(tails, key):
    with pytest.raises(EmptySampleException):
        tails.spectral_summary([], [0.5], key)


def test_pizza_slices_at_unit_radius_match_prediction(tails, innovations, key, grid):
    panel = constant_panel(innovations, key, 500, grid)
    check = tails.pizza_slice_check(panel, 5.0, 50, [1.0, 2.0], bins=2, alpha=1.5)
    assert len(check.rows) == 2 * 2 * 2
    for row in check.rows:
        if row.r == 1.0:
            assert row.predicted == row.empirical
    # constant paths peak at t = 0, so the second bin is empty
    assert all(row.empirical == 0.0 for row in check.rows if row.bin == 1)


# ========== MODULUS ==========

def test_modulus_of_single_jump_panel(tails, innovations, key):
    grid = Grid(50)
    panel = [innovations.single_jump_path(key.child(i), grid, TailModel(alpha=1.5)) for i in range(200)]
    a_n = tails.normalizer_a_n([sup_norm(path) for path in panel], 50)
    diagnostic = tails.modulus_diagnostic(panel, a_n, 50, [0.1, 0.5], [0.5, 0.1, 0.02])
    assert len(diagnostic.rows) == 6
    assert all(row.c1 == 0.0 for row in diagnostic.rows)


def test_modulus_of_constant_panel(tails, innovations, key, grid):
    panel = constant_panel(innovations, key, 100, grid)
    diagnostic = tails.modulus_diagnostic(panel, 3.0, 100, [0.1], [0.5, 0.1])
    assert all(row.c1 == row.c2 == row.c3 == 0.0 for row in diagnostic.rows)
    assert diagnostic.passed


def test_modulus_verdict_ignores_jumps_at_the_left_edge(tails, key):
    grid = Grid(100)
    panel = [CadlagPath.indicator(grid, 0.01) for _ in range(10)]
    diagnostic = tails.modulus_diagnostic(panel, 0.5, 10, [0.1], [0.5, 0.02])
    assert all(row.c1 == 0.0 and row.c2 == 10.0 for row in diagnostic.rows)
    assert diagnostic.passed
    assert not diagnostic.edges_decay


@pytest.mark.slow
def test_modulus_of_compound_poisson_panel(tails, innovations, key):
    spec = InnovationSpec(kind=InnovationKind.COMPOUND_POISSON, rate=2.0, alpha=1.5, p=0.5, resolution=100)
    n = 10_000
    panel = innovations.iid_panel(key, spec, n)
    a_n = tails.normalizer_a_n([sup_norm(path) for path in panel], n)
    diagnostic = tails.modulus_diagnostic(panel, a_n, n, [0.1, 0.5], [0.5, 0.2, 0.1, 0.05, 0.01])
    assert diagnostic.passed


def test_modulus_rejects_bad_grids(tails, innovations, key, grid):
    panel = constant_panel(innovations, key, 10, grid)
    with pytest.raises(InvalidParameterException):
        tails.modulus_diagnostic(panel, 1.0, 10, [0.1], [0.1, 0.5])
    with pytest.raises(InvalidParameterException):
        tails.modulus_diagnostic(panel, 1.0, 10, [0.0], [0.5])
    with pytest.raises(EmptySampleException):
        tails.modulus_diagnostic([], 1.0, 10, [0.1], [0.5])
