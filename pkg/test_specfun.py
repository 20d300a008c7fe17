"""
测试特殊函数：log Gamma、digamma、trigamma、主值对数、角度约化和三参数 Mittag-Leffler 函数
"""
import cmath
import math

import mpmath
import pytest

from fde.errors import OutOfRange, PoleProximity, ZeroBase
from fde.specfun import (angle_reduce, digamma, log_gamma, log_sin, mittag_leffler3, polygamma1,
                         principal_log, principal_power)


def test_log_gamma_integer():
    assert log_gamma(5.0) == pytest.approx(math.log(24.0))


def test_log_gamma_recurrence():
    z = 0.3 + 2.0j
    assert cmath.exp(log_gamma(z + 1) - log_gamma(z)) == pytest.approx(z, rel=1e-12)


def test_log_gamma_reflection():
    z = 0.3 + 0.4j
    lhs = cmath.exp(log_gamma(z) + log_gamma(1 - z))
    assert lhs == pytest.approx(cmath.pi / cmath.sin(cmath.pi * z), rel=1e-12)


def test_log_gamma_vectorized():
    values = log_gamma([1.0, 2.0, 3.0])
    assert values.shape == (3,)
    assert abs(values[2] - math.log(2.0)) < 1e-14


def test_gamma_pole_raises():
    with pytest.raises(PoleProximity):
        log_gamma(-2.0)
    with pytest.raises(PoleProximity):
        digamma(complex(-3.0, 1e-15))


def test_digamma_matches_mpmath():
    z = 0.7 + 1.2j
    assert digamma(z) == pytest.approx(complex(mpmath.digamma(z)), rel=1e-12)


@pytest.mark.parametrize("z", [3 + 4j, 20.0, -2.3 + 0.5j, 0.2 - 0.1j])
def test_trigamma_matches_mpmath(z):
    assert polygamma1(z) == pytest.approx(complex(mpmath.psi(1, z)), rel=1e-10)


@pytest.mark.parametrize("z", [0.49 + 0.3j, 0.51 + 0.3j, 14.9 - 2.0j, 15.1 - 2.0j])
def test_trigamma_across_reflection_and_shift_thresholds(z):
    # Re z = 1/2 切换到反射公式，Re z = 15 以上不再平移
    assert polygamma1(z) == pytest.approx(complex(mpmath.psi(1, z)), rel=1e-10)


def test_principal_log_negative_real():
    assert principal_log(-1.0) == pytest.approx(1j * math.pi)
    # 负零虚部也取 +pi
    assert principal_log(complex(-1.0, -0.0)) == pytest.approx(1j * math.pi)


def test_principal_log_zero():
    with pytest.raises(ZeroBase):
        principal_log(0.0)
    with pytest.raises(ZeroBase):
        principal_power(0.0, 0.5)


def test_principal_power_square_root_of_minus_one():
    assert principal_power(-1.0, 0.5) == pytest.approx(1j)


@pytest.mark.parametrize("w", [0.7 + 0.3j, 1.0 - 2.0j, 2.5 + 0.0j])
def test_log_sin_matches_sin(w):
    assert cmath.exp(log_sin(w)) == pytest.approx(cmath.sin(w), rel=1e-12)


def test_log_sin_large_imaginary_part():
    value = log_sin(1.0 + 400.0j)
    assert math.isfinite(value.real)
    assert value.real == pytest.approx(400.0 - math.log(2.0), rel=1e-12)


def test_angle_reduce_first_quadrant():
    red = angle_reduce(0.3)
    assert red.theta_plus == 0.3 and red.theta_minus == 0.3
    assert (red.k_plus, red.k_minus) == (0, 0)
    assert red.sinc_plus == pytest.approx(math.sin(0.3) / 0.3)


def test_angle_reduce_third_quadrant():
    red = angle_reduce(4.0)
    assert red.theta_plus == pytest.approx(4.0 - math.pi)
    assert red.theta_minus == pytest.approx(4.0 - math.pi)
    assert (red.k_plus, red.k_minus) == (1, 1)


def test_angle_reduce_fourth_quadrant():
    red = angle_reduce(5.0)
    assert red.theta_minus == pytest.approx(5.0 - 2.0 * math.pi)
    assert red.k_minus == 2


def test_angle_reduce_zero_uses_unit_sinc():
    red = angle_reduce(0.0)
    assert red.unit_sinc
    assert red.sinc_plus == 1.0


@pytest.mark.parametrize("theta", [2.0 * math.pi, -0.1, float("nan")])
def test_angle_reduce_out_of_range(theta):
    with pytest.raises(OutOfRange):
        angle_reduce(theta)


def test_mittag_leffler_exponential():
    assert mittag_leffler3(1.0, 1.0, 1.0, 2.0) == pytest.approx(math.exp(2.0), rel=1e-12)


def test_mittag_leffler_cosine():
    assert mittag_leffler3(2.0, 1.0, 1.0, -9.0) == pytest.approx(math.cos(3.0), rel=1e-10)


def test_mittag_leffler_cancellation_uses_high_precision():
    # cosh(20)/|cos(20)| 量级的抵消
    assert mittag_leffler3(2.0, 1.0, 1.0, -400.0) == pytest.approx(math.cos(20.0), rel=1e-8)


def test_mittag_leffler_finite_sum_for_negative_integer_gamma():
    # (-2)_k 在 k > 2 时为零：1 - 2x + x^2/2
    assert mittag_leffler3(1.0, 1.0, -2.0, 3.0) == pytest.approx(-0.5, abs=1e-14)


def test_mittag_leffler_at_zero():
    assert mittag_leffler3(0.5, 3.0, 1.0, 0.0) == pytest.approx(0.5)
    assert mittag_leffler3(0.5, 3.0, 0.0, 7.0) == pytest.approx(0.5)


def test_mittag_leffler_rejects_nonpositive_alpha():
    with pytest.raises(OutOfRange):
        mittag_leffler3(0.0, 1.0, 1.0, 1.0)
