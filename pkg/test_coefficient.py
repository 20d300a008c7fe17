"""
测试 Omega 形式：假设校验、截断求值、步长归一化、仿射代换和 JSON 往返
"""
import cmath
import math

import pytest

from conftest import four_family_spec
from fde.coefficient import (AffinePowerGenerator, EquationParams, FamilyKind, FiniteFactorSpec,
                             OmegaSpec, SequenceFamily, evaluate_omega, omega_from_dict, omega_to_dict,
                             params_from_dict, rescale_to_unit_step, substitute_affine,
                             validate_hypotheses)
from fde.errors import InvalidSpec, PoleProximity, TruncationTooSmall


def sinc_spec(delta0=1.0):
    """sin(pi z)/(pi z) = prod (1 - z/n)(1 + z/n)"""
    unit = AffinePowerGenerator(c2=1.0)
    return OmegaSpec(FiniteFactorSpec(delta0=delta0),
                     (SequenceFamily(FamilyKind.H, 1, unit), SequenceFamily(FamilyKind.GAMMA, 1, unit)),
                     "sinc")


def test_equation_params_c():
    params = EquationParams(a1=1.0, a2=0.5, nu=0.5)
    assert params.c(4.0) == pytest.approx(5.0)
    assert params.c(0.0) == 0.0


def test_validate_sinc_product_passes():
    report = validate_hypotheses(sinc_spec(), EquationParams())
    assert report.passed, [c.clause for c in report.failed()]
    assert report.notes["mode"] == "real"
    assert report.clause("monotone[h#1]").passed


def test_validate_square_lattice_passes():
    spec = OmegaSpec(FiniteFactorSpec(),
                     (SequenceFamily(FamilyKind.H, 1, AffinePowerGenerator(c1=1.0, p=2.0)),))
    assert validate_hypotheses(spec, EquationParams()).passed


def test_validate_harmonic_reciprocals_diverge():
    spec = OmegaSpec(FiniteFactorSpec(),
                     (SequenceFamily(FamilyKind.H, 1, AffinePowerGenerator(c2=1.0)),))
    report = validate_hypotheses(spec, EquationParams())
    assert not report.clause("summability_reciprocals").passed
    assert report.clause("summability_squares").passed


def test_validate_decreasing_family_fails():
    spec = OmegaSpec(FiniteFactorSpec(),
                     (SequenceFamily(FamilyKind.H, 1, AffinePowerGenerator(c2=-1.0, c3=1e5)),))
    report = validate_hypotheses(spec, EquationParams(), scan_depth=64)
    assert "monotone[h#1]" in [c.clause for c in report.failed()]


def test_validate_bad_parameters_and_zero_delta():
    spec = OmegaSpec(FiniteFactorSpec(delta0=0.0, d1=(0.0,)))
    report = validate_hypotheses(spec, EquationParams(a1=0.0, a2=0.0))
    failed = {c.clause for c in report.failed()}
    assert {"parameters", "delta0_nonzero", "delta1_nonzero"} <= failed
    assert report.notes["finite_product"] is True


def test_validate_rejects_tiny_scan():
    with pytest.raises(InvalidSpec):
        validate_hypotheses(sinc_spec(), EquationParams(), scan_depth=5)


@pytest.mark.parametrize("z", [0.5, 0.25 + 0.3j, -1.7])
def test_evaluate_sinc(z):
    result = evaluate_omega(sinc_spec(), z, truncation=10_000)
    expected = cmath.sin(math.pi * z) / (math.pi * z)
    assert result.value == pytest.approx(expected, rel=1e-3)
    assert abs(result.value - expected) <= 2.0 * result.tail_estimate + 1e-12


def test_evaluate_tolerance_too_tight():
    with pytest.raises(TruncationTooSmall):
        evaluate_omega(sinc_spec(), 0.5, truncation=10, tol=1e-12)


def test_evaluate_finite_pole():
    spec = OmegaSpec(FiniteFactorSpec(d3=(1.5,)))
    with pytest.raises(PoleProximity):
        evaluate_omega(spec, 1.5, truncation=10)


def test_evaluate_family_pole():
    spec = OmegaSpec(FiniteFactorSpec(),
                     (SequenceFamily(FamilyKind.ZETA, 1, AffinePowerGenerator(c2=1.0)),
                      SequenceFamily(FamilyKind.ETA, 1, AffinePowerGenerator(c2=1.0))))
    with pytest.raises(PoleProximity):
        evaluate_omega(spec, 2.0, truncation=100)


def test_finite_product_has_no_tail():
    spec = OmegaSpec(FiniteFactorSpec(delta0=2.0, d1=(1.0,), d4=(3.0,)))
    result = evaluate_omega(spec, 0.5)
    assert result.value == pytest.approx(2.0 * 0.5 / 3.5)
    assert result.tail_estimate == 0.0


@pytest.mark.parametrize("beta", [2.0, -2.0])
def test_rescale_to_unit_step(beta):
    spec = OmegaSpec(FiniteFactorSpec(delta0=1.5, d1=(0.7,), d2=(0.4,)), sinc_spec().families)
    scaled, params = rescale_to_unit_step(spec, EquationParams(beta=beta))
    assert params.beta == 1.0
    y = 0.3 + 0.2j
    a = evaluate_omega(scaled, y, truncation=2000).value
    b = evaluate_omega(spec, beta * y, truncation=2000).value
    assert a == pytest.approx(b, rel=1e-9)
    if beta < 0:
        assert scaled.families[0].kind == FamilyKind.GAMMA


@pytest.mark.parametrize("scale", [2.0, -1.5])
def test_substitute_affine(scale):
    spec = OmegaSpec(FiniteFactorSpec(delta0=0.8, d1=(0.9,), d3=(2.5,)), sinc_spec().families)
    shift = 0.3
    moved = substitute_affine(spec, shift, scale, truncation=3000)
    r = 0.1 + 0.2j
    a = evaluate_omega(moved, r, truncation=3000).value
    b = evaluate_omega(spec, shift + scale * r, truncation=3000).value
    assert a == pytest.approx(b, rel=1e-9)


def test_substitute_affine_rejects_zero_scale():
    with pytest.raises(InvalidSpec):
        substitute_affine(sinc_spec(), 0.0, 0.0)


def test_omega_json_round_trip():
    spec = OmegaSpec(FiniteFactorSpec(delta0=2.0 + 1.0j, d2=(0.5,)), sinc_spec().families, "s")
    back = omega_from_dict(omega_to_dict(spec))
    z = 0.4 - 0.1j
    assert evaluate_omega(back, z, 500).value == pytest.approx(evaluate_omega(spec, z, 500).value)


def test_omega_from_dict_rejects_unknown_kind():
    with pytest.raises(InvalidSpec):
        omega_from_dict({"families": [{"kind": "theta", "count": 1}]})
    with pytest.raises(InvalidSpec):
        omega_from_dict({"families": [{"kind": "h", "generator": {"coeffs": {"c9": 1}}}]})


def test_params_from_dict_defaults():
    params = params_from_dict({"a2": 0.5})
    assert (params.a1, params.a2, params.nu, params.beta) == (1.0, 0.5, 0.5, 1.0)


@pytest.mark.parametrize("z, expected", [(math.pi / 4, 1.0), (1.0, math.tan(1.0)),
                                         (0.3 + 0.4j, cmath.tan(0.3 + 0.4j))])
def test_evaluate_tan_product(tan_omega, z, expected):
    result = evaluate_omega(tan_omega, z, truncation=10_000)
    assert result.value == pytest.approx(expected, rel=3e-4)


def test_four_family_example_passes(example_spec):
    report = validate_hypotheses(example_spec, EquationParams(a1=1.0, a2=0.5, nu=0.5))
    assert report.passed, [c.clause for c in report.failed()]


def test_four_family_example_with_zero_gamma_fails():
    # 按 i/M6 取偏移时 gamma_{M6,1} = 0
    report = validate_hypotheses(four_family_spec(literal=True), EquationParams(a1=1.0, a2=0.5, nu=0.5))
    assert "monotone[gamma#2]" in [c.clause for c in report.failed()]
    assert report.clause("monotone[gamma#1]").passed


def test_validate_reciprocal_gamma_fails():
    spec = OmegaSpec(FiniteFactorSpec(),
                     (SequenceFamily(FamilyKind.GAMMA, 1, AffinePowerGenerator(c1=1.0, p=-1.0)),))
    report = validate_hypotheses(spec, EquationParams())
    assert "monotone[gamma#1]" in [c.clause for c in report.failed()]


@pytest.mark.parametrize("which, z", [("sinc", 0.5), ("four-family", 0.3 + 0.2j)])
def test_doubling_truncation_stays_inside_tail(example_spec, which, z):
    spec = sinc_spec() if which == "sinc" else example_spec
    coarse = evaluate_omega(spec, z, truncation=1000)
    fine = evaluate_omega(spec, z, truncation=2000)
    assert abs(coarse.value - fine.value) <= coarse.tail_estimate
    assert 0.0 < fine.tail_estimate < coarse.tail_estimate
