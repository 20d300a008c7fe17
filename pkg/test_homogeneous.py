"""
测试齐次解：Gamma 型闭式解、残差、区域检查、周期插件、渐近比和尾部求和
"""
import cmath
import math

import numpy as np
import pytest
from scipy import special

from fde.coefficient import (AffinePowerGenerator, EquationParams, FamilyKind, FiniteFactorSpec,
                             OmegaSpec, SequenceFamily)
from fde.errors import IncompatibleParams, InvalidHypotheses, OutOfRange, RegionViolation
from fde.homogeneous import (PeriodicPlugin, appendix_bounds, asymptotic_ratio, build, check_region,
                             compose_multidimensional, envelope_check, lgn, log_l1)
from fde.particular import exp_sine_plugin

UNIT = AffinePowerGenerator(c2=1.0)


def gamma_spec():
    """Omega(z) = z: Y_h = c^{-(z-1/2)} Gamma(z)."""
    return OmegaSpec(FiniteFactorSpec(delta0=1.0, d2=(0.0,)), label="z")


def sinc_spec():
    return OmegaSpec(FiniteFactorSpec(delta0=1.0),
                     (SequenceFamily(FamilyKind.H, 1, UNIT), SequenceFamily(FamilyKind.GAMMA, 1, UNIT)),
                     "sinc")


@pytest.fixture(scope="module")
def sinc_solution():
    return build(sinc_spec(), EquationParams(a1=1.0, a2=0.5, nu=0.5), truncation=2000)


def test_lgn_series_matches_direct_formula():
    a, w = 200.0 + 0j, 0.3 + 0.1j
    direct = special.loggamma(a + w) - (a + w - 0.5) * cmath.log(a) + a - 0.5 * math.log(2 * math.pi)
    assert complex(lgn(a, w)) == pytest.approx(direct, abs=1e-12)


def _lgn_direct(a, w):
    return special.loggamma(a + w) - (a + w - 0.5) * np.log(a) + a - 0.5 * math.log(2 * math.pi)


def test_log_l1_series_matches_summed_gamma_factors():
    ys = np.array([0.3 + 0.7j, -2.5 + 40.0j])
    n = np.arange(1, 3001, dtype=float).reshape(-1, 1)
    direct = (_lgn_direct(n, ys) - _lgn_direct(n, 1.0 - ys)).sum(axis=0)
    assert log_l1(sinc_spec(), ys, 3000) == pytest.approx(direct, rel=1e-10, abs=1e-9)


def test_gamma_closed_form():
    sol = build(gamma_spec(), EquationParams(a1=1.0, a2=0.0), truncation=10)
    z, sigma = 0.5 + 0.3j, 2.0
    expected = special.gamma(z) * 2.0 ** (-(z - 0.5))
    assert sol.evaluate(z, sigma) == pytest.approx(expected, rel=1e-12)


def test_gamma_pole_line_raises():
    sol = build(gamma_spec(), EquationParams(a1=1.0, a2=0.0), truncation=10)
    with pytest.raises(RegionViolation):
        sol.log_evaluate(-1.0 + 0.5j, 1.0)


@pytest.mark.parametrize("z, sigma", [(0.3 + 0.7j, 1.0), (-0.4 + 2.0j, 1.5 + 0.5j), (2.5 - 1.0j, 0.8)])
def test_sinc_residual(sinc_solution, z, sigma):
    assert sinc_solution.residual(z, sigma) < 1e-8


@pytest.mark.parametrize("which", ["four-family", "tan"])
def test_residual_at_random_points(example_spec, tan_omega, which):
    spec = example_spec if which == "four-family" else tan_omega
    sol = build(spec, EquationParams(a1=1.0, a2=0.5, nu=0.5), truncation=10_000)
    rng = np.random.default_rng(7)
    for _ in range(10):
        z = complex(rng.uniform(-2.5, 2.5), rng.uniform(0.3, 3.0))
        sigma = complex(rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0))
        assert sol.residual(z, sigma) < 1e-8, (z, sigma)


def test_negative_step_residual():
    sol = build(sinc_spec(), EquationParams(a1=1.0, a2=0.5, nu=0.5, beta=-2.0), truncation=2000)
    assert sol.sign_beta == -1
    assert sol.residual(0.3 + 0.7j, 1.5 + 0.5j) < 1e-8


def test_plugin_keeps_residual(sinc_solution):
    plugin = PeriodicPlugin(lambda w: cmath.sin(2 * math.pi * w) + 2.0, label="sin+2")
    assert plugin.periodicity_defect() < 1e-12
    sol = sinc_solution.with_plugin(plugin)
    assert sol.residual(0.3 + 0.7j, 1.0) < 1e-8


def test_zero_plugin_residual_is_zero(sinc_solution):
    assert sinc_solution.with_plugin(PeriodicPlugin.zero()).residual(0.3, 1.0) == 0.0


def test_components_multiply_to_value(sinc_solution):
    z, sigma = 0.3 + 0.4j, 1.2
    parts = sinc_solution.components(z, sigma)
    product = 1.0 + 0j
    for v in parts.values():
        product *= v
    assert product == pytest.approx(sinc_solution.evaluate(z, sigma), rel=1e-10)


def test_growth_exponent_of_exponential_plugin():
    plugin = PeriodicPlugin(lambda w: cmath.exp(2j * math.pi * w), label="e",
                            log_evaluator=lambda w: 2j * math.pi * w)
    upper, lower = plugin.growth_exponent()
    assert upper == pytest.approx(-2 * math.pi, rel=1e-9)
    assert lower == pytest.approx(2 * math.pi, rel=1e-9)


def test_exp_sine_plugin_is_periodic():
    assert exp_sine_plugin().periodicity_defect() < 1e-12


def test_build_rejects_failing_hypotheses():
    spec = OmegaSpec(FiniteFactorSpec(), (SequenceFamily(FamilyKind.H, 1, UNIT),))
    with pytest.raises(InvalidHypotheses):
        build(spec, EquationParams(), truncation=500)


def test_check_region_pole_and_zero_lines():
    params = EquationParams()
    poles = check_region(sinc_spec(), params, -2.0 + 0.1j)
    assert "pole:gamma" in poles.clause_ids()
    assert not poles.admissible
    zeros = check_region(sinc_spec(), params, 3.0 + 0.1j)
    assert "zero:h" in zeros.clause_ids()
    assert not zeros.pole_violations()
    assert check_region(sinc_spec(), params, 0.5 + 0.1j).admissible


def test_check_region_plugin_cancels_poles():
    report = check_region(sinc_spec(), EquationParams(), -2.0 + 0.1j, plugin=exp_sine_plugin())
    assert not report.pole_violations()
    assert report.notes


def test_check_region_bad_d0():
    with pytest.raises(OutOfRange):
        check_region(sinc_spec(), EquationParams(), 0.5, d0=1.5)


def test_asymptotic_ratio_stays_bounded(sinc_solution):
    ratios = asymptotic_ratio(sinc_solution, 0.5, [20.0, 40.0, 80.0])
    assert len(ratios) == 3
    assert all(math.isfinite(r) and r >= 0 for r in ratios)


def test_asymptotic_ratio_needs_large_imaginary_part(sinc_solution):
    with pytest.raises(OutOfRange):
        asymptotic_ratio(sinc_solution, 0.5, [5.0, 20.0])


def test_asymptotic_ratio_of_tan_product_does_not_grow(tan_omega):
    sol = build(tan_omega, EquationParams(a1=1.0, a2=0.5, nu=0.5), truncation=10_000)
    ratios = asymptotic_ratio(sol, 0.5, [10.0, 30.0, 100.0, 300.0, 1000.0])
    assert max(ratios) <= 1.5 * ratios[0]
    assert ratios[-1] < ratios[0]


def test_asymptotic_ratio_of_finite_product_tends_to_zero():
    # Omega(z) = z：比值约为 1/(|z| ln|z|)
    sol = build(gamma_spec(), EquationParams(a1=1.0, a2=0.5, nu=0.5), truncation=10)
    ratios = asymptotic_ratio(sol, 0.5, [10.0, 30.0, 100.0, 300.0, 1000.0])
    assert ratios[0] > 0.02
    assert ratios[-1] < 2e-4
    assert ratios == sorted(ratios, reverse=True)


SQUARES = SequenceFamily(FamilyKind.H, 1, AffinePowerGenerator(c1=1.0, p=2.0))


def test_appendix_bounds_start_index():
    report = appendix_bounds(SQUARES, 0.5, 3.0 + 4.0j)
    # first n with n^2 > 4 |Re z| = 12
    assert report.start_index == 4
    assert all(math.isfinite(v) and v >= 0 for v in report.sums.values())
    assert set(report.envelopes) == {"i", "ii", "iii", "iv"}


def test_appendix_bounds_small_z():
    with pytest.raises(OutOfRange):
        appendix_bounds(SQUARES, 0.5, 1.0)


def test_envelope_check_along_a_ray():
    reports = [appendix_bounds(SQUARES, 0.5, complex(0.5, y)) for y in (50.0, 100.0, 200.0)]
    check = envelope_check(reports, slack=1.5)
    assert "constants" in check.notes
    assert len(check.clauses) == 8
    assert check.passed, [c.clause for c in check.failed()]


def test_compose_multidimensional_residual(sinc_solution):
    multi = compose_multidimensional([sinc_solution, sinc_solution])
    assert multi.residual([0.3 + 0.2j, -0.2 + 0.5j], 1.0) < 1e-8


def test_compose_requires_shared_params(sinc_solution):
    other = build(sinc_spec(), EquationParams(a1=2.0), truncation=100)
    with pytest.raises(IncompatibleParams):
        compose_multidimensional([sinc_solution, other])
    with pytest.raises(IncompatibleParams):
        compose_multidimensional([])
