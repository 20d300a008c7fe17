"""
Complex special functions used by every other module.

All functions accept scalars or numpy arrays and return complex values;
scalars in, scalars out.
"""

import math
import logging
from dataclasses import dataclass

import numpy as np
import mpmath
from scipy import special

from fde.config import get_settings
from fde.errors import PoleProximity, ZeroBase, OutOfRange, NonConvergence

logger = logging.getLogger(__name__)

# B_2k for the polygamma asymptotic series
_BERNOULLI_EVEN = special.bernoulli(20)[2::2]
_SHIFT_THRESHOLD = 15.0


def _as_complex(z):
    arr = np.asarray(z, dtype=complex)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return complex(arr) if scalar else arr


def _check_poles(z: np.ndarray, tol: float | None = None) -> None:
    tol = get_settings().tol_pole if tol is None else tol
    nearest = np.round(z.real)
    hit = (nearest <= 0) & (np.abs(z - nearest) < tol)
    if np.any(hit):
        bad = complex(np.ravel(z)[np.argmax(np.ravel(hit))])
        raise PoleProximity(f"argument {bad} lies within {tol:g} of a Gamma pole", z=str(bad))


def log_gamma(z, tol_pole: float | None = None):
    """Principal branch of ln Gamma(z), continuous off the negative real axis."""
    arr, scalar = _as_complex(z)
    _check_poles(arr, tol_pole)
    return _out(special.loggamma(arr), scalar)


def digamma(z, tol_pole: float | None = None):
    arr, scalar = _as_complex(z)
    _check_poles(arr, tol_pole)
    return _out(special.psi(arr), scalar)


def _polygamma1_right(w: np.ndarray) -> np.ndarray:
    # shift until Re w > threshold, then the Bernoulli series
    acc = np.zeros_like(w)
    shift = np.maximum(0, np.ceil(_SHIFT_THRESHOLD - w.real)).astype(int)
    steps = int(shift.max()) if shift.size else 0
    cur = w.copy()
    for _ in range(steps):
        active = shift > 0
        acc = acc + np.where(active, 1.0 / cur ** 2, 0.0)
        cur = np.where(active, cur + 1.0, cur)
        shift = shift - 1
    inv = 1.0 / cur
    inv2 = inv * inv
    series = inv + 0.5 * inv2
    power = inv * inv2
    for b2k in _BERNOULLI_EVEN:
        series = series + b2k * power
        power = power * inv2
    return acc + series


def polygamma1(z, tol_pole: float | None = None):
    """Trigamma psi'(z) for complex z."""
    arr, scalar = _as_complex(z)
    _check_poles(arr, tol_pole)
    left = arr.real < 0.5
    result = np.empty_like(arr)
    if np.any(~left):
        result[~left] = _polygamma1_right(arr[~left])
    if np.any(left):
        w = arr[left]
        result[left] = (np.pi / np.sin(np.pi * w)) ** 2 - _polygamma1_right(1.0 - w)
    return _out(result, scalar)


def principal_log(base):
    """Log base with arg in (-pi, pi]; negative reals take arg = +pi."""
    b, scalar = _as_complex(base)
    if np.any(b == 0):
        raise ZeroBase("logarithm of zero")
    # drop signed zeros
    b = b.real + 1j * np.where(b.imag == 0, 0.0, b.imag)
    return _out(np.log(b), scalar)


def principal_power(base, exponent):
    """exp(exponent * Log base) with arg(base) in (-pi, pi]."""
    b, b_scalar = _as_complex(base)
    e, e_scalar = _as_complex(exponent)
    if np.any(b == 0):
        raise ZeroBase("principal_power needs a nonzero base")
    return _out(np.exp(e * principal_log(b)), b_scalar and e_scalar)


def log_sin(w):
    """
    A continuous logarithm of sin(w) that never overflows for large |Im w|.

    For Im w >= 0 it uses sin w = e^{-iw}(e^{2iw}-1)/(2i), otherwise
    sin w = e^{iw}(1-e^{-2iw})/(2i).
    """
    arr, scalar = _as_complex(w)
    upper = arr.imag >= 0
    with np.errstate(over="ignore", invalid="ignore"):
        up = -1j * arr + np.log((np.exp(2j * arr) - 1.0) / 2j)
        down = 1j * arr + np.log((1.0 - np.exp(-2j * arr)) / 2j)
    return _out(np.where(upper, up, down), scalar)


@dataclass(frozen=True)
class AngleReduction:
    theta: float
    theta_plus: float
    theta_minus: float
    unit_sinc: bool
    k_plus: int
    k_minus: int

    @property
    def sinc_plus(self) -> float:
        """sin(theta_plus)/theta_plus with the unit convention at 0 and pi."""
        if self.unit_sinc:
            return 1.0
        return math.sin(self.theta_plus) / self.theta_plus


def angle_reduce(theta: float) -> AngleReduction:
    if not (0.0 <= theta < 2.0 * math.pi) or not math.isfinite(theta):
        raise OutOfRange(f"theta={theta} must lie in [0, 2pi)")
    theta_plus = theta if theta < math.pi else theta - math.pi
    if theta < math.pi / 2:
        theta_minus = theta
    elif theta < 1.5 * math.pi:
        theta_minus = theta - math.pi
    else:
        theta_minus = theta - 2.0 * math.pi
    unit = theta_plus == 0.0 or theta_plus == math.pi
    return AngleReduction(
        theta=theta,
        theta_plus=theta_plus,
        theta_minus=theta_minus,
        unit_sinc=unit,
        k_plus=math.floor(theta / math.pi),
        k_minus=math.floor(theta / math.pi + 0.5),
    )


def _nonpositive_integer(value: complex, tol: float = 1e-14) -> int | None:
    if abs(value.imag) > tol:
        return None
    r = round(value.real)
    if r <= 0 and abs(value.real - r) < tol:
        return int(-r)
    return None


def _ml_log_terms(alpha, beta, gamma, x, k):
    log_poch = special.loggamma(gamma + k) - special.loggamma(gamma)
    arg = alpha * k + beta
    with np.errstate(divide="ignore", invalid="ignore"):
        pole = (np.round(arg.real) <= 0) & (np.abs(arg - np.round(arg.real)) < 1e-14)
        log_rgamma = np.where(pole, -np.inf, -special.loggamma(np.where(pole, 1.0, arg)))
    return log_poch - special.gammaln(k + 1.0) + log_rgamma + k * np.log(x)


def _ml_mpmath(alpha, beta, gamma, x, n_terms, cancellation):
    digits = 20 + int(math.ceil(math.log10(max(cancellation, 10.0))))
    with mpmath.workdps(digits):
        a = mpmath.mpf(alpha)
        b = mpmath.mpc(beta)
        g = mpmath.mpc(gamma)
        xm = mpmath.mpc(x)
        total = mpmath.mpc(0)
        ratio = mpmath.mpc(1)
        for k in range(n_terms):
            total += ratio * mpmath.rgamma(a * k + b)
            ratio *= (g + k) * xm / (k + 1)
        return complex(total)


def mittag_leffler3(alpha: float, beta, gamma, x, max_terms: int = 100_000,
                    chunk: int = 256) -> complex:
    """
    Three-parameter Mittag-Leffler function E^gamma_{alpha,beta}(x).

    The series is summed in log space chunk by chunk; when the terms cancel
    by more than four digits the same number of terms is re-summed in
    mpmath at raised precision.
    """
    if alpha <= 0:
        raise OutOfRange(f"alpha={alpha} must be positive")
    beta = complex(beta)
    gamma = complex(gamma)
    x = complex(x)
    if x == 0:
        return complex(special.rgamma(beta))
    if gamma == 0:
        return complex(special.rgamma(beta))

    degree = _nonpositive_integer(gamma)
    if degree is not None:
        # (gamma)_k vanishes for k > degree: finite sum
        return _ml_mpmath(alpha, beta, gamma, x, degree + 1, 1.0)

    log_terms = []
    peak = -np.inf
    n_terms = 0
    converged = False
    while n_terms < max_terms:
        k = np.arange(n_terms, min(n_terms + chunk, max_terms), dtype=float)
        lt = _ml_log_terms(alpha, beta, gamma, x, k)
        log_terms.append(lt)
        n_terms += k.size
        finite = lt.real[np.isfinite(lt.real)]
        if finite.size:
            peak = max(peak, float(finite.max()))
        tail = lt.real[-8:]
        if peak > -np.inf and np.all(np.diff(tail) <= 0) and tail[-1] < peak - 42.0:
            converged = True
            break
    if not converged:
        raise NonConvergence(f"Mittag-Leffler series did not decay within {max_terms} terms",
                             alpha=alpha, x=str(x))

    lt = np.concatenate(log_terms)
    if peak == -np.inf:
        return 0j
    terms = np.exp(lt - peak)
    total = terms.sum()
    cancellation = float(np.abs(terms).sum() / max(abs(total), 1e-300))
    if cancellation > 1e4:
        logger.debug(f"Mittag-Leffler cancellation {cancellation:.2e}, switching to mpmath")
        return _ml_mpmath(alpha, beta, gamma, x, n_terms, cancellation)
    return complex(total * np.exp(peak))
