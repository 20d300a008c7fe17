"""
测试三角系数的乘积分解：移位正弦/余弦/正切、S± 零点表、tan 组合、商、双曲形式和核目录
"""
import cmath
import math

import numpy as np
import pytest

from fde.errors import ExcludedAngle, InvalidSpec, KernelInvalid, OutOfRange, UnknownClass
from fde.factorization import (FORMS, ProblemClass, TrigCoefficientSpec, factorize, find_zeros,
                               hyperbolic, kernel_catalog, plugin_II, reflect_angles, to_omega)
from fde.specfun import angle_reduce

N = 20_000
POINTS = (0.4 + 0.2j, -0.3 + 0.1j, 0.15 - 0.25j)


def spec(**kwargs):
    return TrigCoefficientSpec(**kwargs)


def assert_matches_direct(form, points=POINTS):
    for z in points:
        cmp = form.compare(z)
        assert cmp["relative_error"] < 1e-3, (z, cmp)


# ---------------------------------------------------------------------------
# sin / cos / tan with a shift


@pytest.mark.parametrize("kwargs", [
    {"q0": 1.0, "theta": 0.3},
    {"q0": 1.0, "theta": 4.0, "sign": -1},
    {"q0": -2.0, "theta": 0.5},
    {"q0": 0.5, "theta": 0.0},
])
def test_sin_shift_product(kwargs):
    assert_matches_direct(factorize(spec(form="sin_shift", **kwargs), N))


@pytest.mark.parametrize("kwargs", [
    {"q0": 1.5, "theta": 0.7},
    {"q0": 1.0, "theta": 5.0, "sign": "-"},
])
def test_cos_shift_product(kwargs):
    assert_matches_direct(factorize(spec(form="cos_shift", **kwargs), N))


def test_tan_shift_product():
    form = factorize(spec(form="tan_shift", q0=1.0, theta=0.3), N)
    assert form.label == "tan(1z+0.3)"
    assert_matches_direct(form)


def test_excluded_angle():
    with pytest.raises(ExcludedAngle):
        factorize(spec(form="sin_shift", theta=0.5 * math.pi), N)


def test_theta_out_of_range():
    with pytest.raises(OutOfRange):
        spec(form="cos_shift", theta=7.0)


# ---------------------------------------------------------------------------
# S+- zero tables


def s_plus(**kwargs):
    base = {"form": "s_plus", "theta1": math.pi / 4, "theta2": 0.0, "p": 4, "q": 1, "q2": 2.0}
    base.update(kwargs)
    return spec(**base)


def test_s_plus_zero_table():
    table = find_zeros(s_plus())
    assert table.count == 8
    assert not table.complex_zeros
    assert table.notes["scan_unmatched"] == 0
    assert "degree_defect" not in table.notes
    assert table.notes["interval_localized"] is True
    assert all(0.0 <= x < table.period for x in table.locations)
    assert all(e.residual < 1e-10 for e in table.entries)
    assert len(table.csv_rows()) == len(table.entries)


@pytest.mark.parametrize("theta1", [math.pi / 4, math.pi / 3])
@pytest.mark.parametrize("q2, count", [(2.0, 8), (0.5, 8), (0.25, 4)])
def test_s_plus_zero_locations_with_double_angle(theta1, q2, count):
    # S+(z; t, 2t, 2, q2) = sin u (1 + 2 q2 cos u)，u = z - t
    table = find_zeros(s_plus(theta1=theta1, theta2=2.0 * theta1, q2=q2))
    assert table.count == count
    lattice = [theta1 + k * math.pi for k in range(4)]
    if q2 > 0.5:
        a = math.acos(1.0 / (2.0 * q2))
        expected = sorted(lattice + [theta1 + math.pi + s * a for s in (-1, 1)]
                          + [theta1 + 3 * math.pi + s * a for s in (-1, 1)])
        assert list(table.locations) == pytest.approx(expected, abs=1e-9)
    elif q2 == 0.5:
        assert [e.location for e in table.entries] == pytest.approx(lattice, abs=1e-7)
        assert [e.multiplicity for e in table.entries] == [1, 3, 1, 3]
    else:
        assert list(table.locations) == pytest.approx(lattice, abs=1e-9)
        assert table.count + len(table.complex_zeros) == 8


def test_s_plus_triple_zeros_at_quarter_angle():
    table = find_zeros(s_plus(theta2=math.pi / 2, q2=0.5))
    triple = [e.location for e in table.entries if e.multiplicity == 3]
    assert triple == pytest.approx([3.92699, 10.21018], abs=1e-5)


def test_s_plus_product():
    form = factorize(s_plus(), N)
    assert form.notes["display"] == "generic"
    assert_matches_direct(form)


def test_odd_lattice_rule_at_zero_angles():
    table = find_zeros(s_plus(theta1=0.0))
    assert table.lattice_rule == "odd"
    assert table.count == 8
    assert table.origin_multiplicity == 1
    form = factorize(s_plus(theta1=0.0), N)
    assert form.notes["display"] == "odd"
    assert_matches_direct(form)


def test_s_minus_small_amplitude_accounts_for_every_zero():
    table = find_zeros(s_plus(form="s_minus", q2=0.5))
    assert table.count + len(table.complex_zeros) == 8
    assert "interval_localized" not in table.notes


def test_reflected_angles_product():
    form = factorize(s_plus(theta1=4.0, theta2=0.2), N)
    assert form.notes["reflection"] == (-1, -1)
    assert_matches_direct(form)


def test_reflect_angles():
    outer, inner, t1, t2 = reflect_angles(1, 4.0, 0.2)
    assert (outer, inner) == (-1, -1)
    assert t1 == pytest.approx(4.0 - math.pi)
    assert t2 == 0.2


def test_find_zeros_needs_s_form():
    with pytest.raises(InvalidSpec):
        find_zeros(spec(form="sin_shift"))


@pytest.mark.parametrize("kwargs", [{"p": 4, "q": 2}, {"p": 6, "q": 2}, {"q2": 1.0}, {"q2": -2.0}])
def test_s_form_rejects_parameters(kwargs):
    with pytest.raises(InvalidSpec):
        s_plus(**kwargs)


# ---------------------------------------------------------------------------
# tan combinations and quotients


def test_tan_combo_equal_weights():
    form = factorize(spec(form="tan_combo", omega1=1.0, omega2=2.0, q3=1.0, theta1=0.3, theta2=0.5), N)
    assert form.notes["branch"] == "q3=1"
    assert_matches_direct(form)


def test_tan_combo_rejects_zero_rate():
    with pytest.raises(InvalidSpec):
        spec(form="tan_combo", omega1=0.0)


def test_quotient_of_forms():
    quotient = spec(form="quotient", numerator=spec(form="sin_shift", theta=0.3),
                    denominator=spec(form="cos_shift", theta=0.2))
    form = factorize(quotient, N)
    z = 0.2 + 0.1j
    expected = cmath.sin(z + 0.3) / cmath.cos(z + 0.2)
    assert form.evaluate(z) == pytest.approx(expected, rel=1e-3)


def test_quotient_needs_both_parts():
    with pytest.raises(InvalidSpec):
        spec(form="quotient", numerator=spec(form="sin_shift"))


# ---------------------------------------------------------------------------
# JSON


def test_from_dict_round_trip():
    original = s_plus(theta1=0.4)
    again = TrigCoefficientSpec.from_dict(original.to_dict())
    assert again == original


@pytest.mark.parametrize("data", [{"q0": 1.0}, {"form": "sec"}, {"form": "sin_shift", "colour": 1}])
def test_from_dict_errors(data):
    with pytest.raises(InvalidSpec):
        TrigCoefficientSpec.from_dict(data)


def test_forms_catalog():
    assert set(FORMS) == {"sin_shift", "cos_shift", "tan_shift", "s_plus", "s_minus", "tan_combo",
                          "quotient"}


# ---------------------------------------------------------------------------
# conversion, hyperbolic forms and the kernel catalog


def test_to_omega_scales_origin_zero():
    result = to_omega(factorize(spec(form="sin_shift", theta=0.0), N), beta=2.0)
    assert result.delta0_star == pytest.approx(0.5)
    assert result.notes["mu1"] == 1
    assert result.notes["class"] == "FFK"
    assert result.notes["sample_max_relative_error"] < 1e-3


def test_to_omega_quotient_class():
    quotient = spec(form="tan_shift", theta=0.3)
    assert to_omega(factorize(quotient, N)).notes["class"] == "FTK"


@pytest.mark.parametrize("kind, fn", [("sinh", cmath.sinh), ("cosh", cmath.cosh), ("tanh", cmath.tanh)])
def test_hyperbolic_forms(kind, fn):
    form = hyperbolic(kind, 1.0, N)
    z = 0.3 + 0.2j
    assert form.evaluate(z) == pytest.approx(fn(z), rel=1e-3)
    assert form.direct(z) == pytest.approx(fn(z))


def test_hyperbolic_unknown_kind():
    with pytest.raises(UnknownClass):
        hyperbolic("sech")


def test_catalog_bounded_plain_plugin():
    entry = kernel_catalog(ProblemClass("bounded", "I", d=0.9))
    assert entry.row == "bounded/P_I"
    assert entry.kernel.pole_order == 2
    assert entry.notes["strip_pole"] is True
    assert entry.plugin(0.3) == 1


def test_catalog_decaying_plain_plugin():
    entry = kernel_catalog(ProblemClass("decaying", "I", d=0.9))
    assert entry.kernel(0.37 + 2.0j) == 1
    assert entry.kernel.pole_order == 0
    assert entry.notes["strip_pole"] is False


@pytest.mark.parametrize("pc, error", [
    (ProblemClass("growing", "I", d=0.9), UnknownClass),
    (ProblemClass("bounded", "IV", d=0.9), UnknownClass),
    (ProblemClass("bounded", "II", d=0.9), UnknownClass),
    (ProblemClass("bounded", "I", d=1.6), KernelInvalid),
])
def test_catalog_rejects(pc, error):
    with pytest.raises(error):
        kernel_catalog(pc)


def test_catalog_with_zero_table():
    star = find_zeros(s_plus(theta1=0.0))
    entry = kernel_catalog(ProblemClass("bounded", "II", d=0.9, star_zeros=star))
    assert entry.notes["K_star"] == 8
    # margin pi(2.5 - 16) - eps < 0: the kernel power grows to 2K*
    assert entry.kernel.pole_order == 16


def test_plugin_II_is_periodic():
    plugin = plugin_II(find_zeros(s_plus(theta1=0.0)))
    assert plugin.periodicity_defect() < 1e-9
    assert len(plugin.zero_offsets) == 7


# ---------------------------------------------------------------------------
# leading constants and truncation error


@pytest.mark.parametrize("q0, theta", [(1.0, 0.3), (2.0, 4.0), (0.5, 0.0), (1.5, 2.5)])
def test_sin_leading_constant(q0, theta):
    form = factorize(spec(form="sin_shift", q0=q0, theta=theta), 2000)
    tp = theta % math.pi
    sinc = math.sin(tp) / tp if tp else 1.0
    expected = (-1) ** math.floor(theta / math.pi) * q0 * sinc
    assert complex(form.omega.finite.delta0) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("theta", [0.7, 2.0, 3.5, 5.0])
def test_cos_leading_constant(theta):
    form = factorize(spec(form="cos_shift", q0=1.5, theta=theta, sign=-1), 2000)
    expected = (-1) ** math.floor((2.0 * theta + math.pi) / (2.0 * math.pi)) * math.cos(
        angle_reduce(theta).theta_minus)
    assert complex(form.omega.finite.delta0) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(math.cos(theta), rel=1e-12)


@pytest.mark.parametrize("form_name, s", [("s_plus", 1), ("s_minus", -1)])
def test_s_leading_constant_at_zero_angles(form_name, s):
    form = factorize(s_plus(form=form_name, theta1=0.0, theta2=0.0), 2000)
    nonzero = form.zero_tables[0].nonzero()
    expected = (1.0 + s * 2.0 * 2.0) / np.prod([z * z for z in nonzero])
    assert complex(form.omega.finite.delta0) == pytest.approx(complex(expected), rel=1e-10)


@pytest.mark.parametrize("form_name, s", [("s_plus", 1), ("s_minus", -1)])
def test_s_leading_constant_generic(form_name, s):
    t1, t2, q2 = 0.5, 1.0, 2.0
    form = factorize(s_plus(form=form_name, theta1=t1, theta2=t2, q2=q2), 2000)
    nonzero = form.zero_tables[0].nonzero()
    expected = -(math.sin(t1) + s * q2 * math.sin(t2)) / np.prod(nonzero)
    assert complex(form.omega.finite.delta0) == pytest.approx(complex(expected), rel=1e-10)


def test_truncation_error_halves_when_terms_double():
    form = factorize(spec(form="sin_shift", q0=1.0, theta=0.3), 10_000)
    z = 0.4 + 0.2j
    e1 = form.compare(z, truncation=2500)["relative_error"]
    e2 = form.compare(z, truncation=5000)["relative_error"]
    assert 1.6 <= e1 / e2 <= 2.5


@pytest.mark.parametrize("name, kwargs", [("sin_shift", {"theta": 0.3}), ("cos_shift", {"theta": 0.7})])
def test_products_on_a_disc_of_radius_five(name, kwargs):
    form = factorize(spec(form=name, q0=1.0, **kwargs), 10_000)
    grid = [complex(x, y) for x in np.linspace(-4.5, 4.5, 7) for y in (-2.0, 0.0, 2.0)
            if abs(complex(x, y)) <= 5.0]
    assert max(form.compare(z)["relative_error"] for z in grid) < 1e-3
