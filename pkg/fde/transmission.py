"""
Transmission problem for two harmonic fields in adjacent plane corners

    G1 = {-pi/2 < x2 < omega0},  G2 = {omega0 < x2 < pi/2},  omega0 = q pi / p,

in the log-polar variables (x1, x2), coupled on the ray x2 = omega0 by a
fractional dynamic jump condition (coefficients a1, a2, nu, a3) and a flux
condition (jump coefficient kappa, a4).

After u = exp(s x1) U and the Fourier/Laplace transforms, the jump
calU = M2 * N1 satisfies

    c(sigma) calU(lambda + i s*) - x G(lambda) calU(lambda) = f*(lambda + i(1-s), sigma),

x = i lambda + s, s* = s0 + 1. With lambda = i s* rho this is the difference
equation of the homogeneous/particular modules with Omega(rho) = x G and
beta = 1. G is a quotient of two S+- coefficients in w = 2 omega0 x, so its
product form comes from the factorization module and an exact affine
substitution w = 2 omega0 s - 2 omega0 s* rho.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy import special

from fde.coefficient import (EquationParams, FiniteFactorSpec, OmegaSpec, evaluate_omega,
                             substitute_affine)
from fde.config import get_settings
from fde.errors import (BudgetExceeded, DegenerateCoefficients, DenominatorZero, IncompatibleParams,
                        InsufficientZeros, InvalidSpec, InvalidWeight, OutOfRange, WindowViolation, ZeroBase)
from fde.factorization import ProductForm, TrigCoefficientSpec, ZeroTable, factorize_s, find_zeros
from fde.homogeneous import HomogeneousSolution, PeriodicPlugin, build
from fde.particular import (ContourSpec, ForcingSpec, KernelSpec, ParticularValue, constant_kernel, log_cot_kernel,
                            residual_inhomogeneous, solve_particular)
from fde.reports import ValidationReport
from fde.specfun import log_sin, mittag_leffler3, principal_log

logger = logging.getLogger(__name__)

HALF_PI = 0.5 * math.pi
_IDENTITY_TOL = 1e-12
_DENOMINATOR_TOL = 1e-13
_LATTICE_TOL = 1e-9
_EXCLUSION_RANGE = range(1, 65)
_BUMP_SPAN = 6.0


# ---------------------------------------------------------------------------
# problem data


@dataclass(frozen=True)
class GaussianBump:
    """
    f(x1, t) = exp(-((x1 - ln r0)/width)^2) * tau(t), tau(t) = min(t/t_ramp, 1).
    Treated as supported on |x1 - ln r0| <= 6 width; t_ramp = 0 is a step.
    """
    r0: float = 1.0
    width: float = 0.5
    t_ramp: float = 1.0

    def __post_init__(self):
        if not (self.r0 > 0 and math.isfinite(self.r0)):
            raise OutOfRange(f"r0={self.r0} must be positive")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise OutOfRange(f"width={self.width} must be positive")
        if not (self.t_ramp >= 0 and math.isfinite(self.t_ramp)):
            raise OutOfRange(f"t_ramp={self.t_ramp} must be nonnegative")

    @property
    def x0(self) -> float:
        return math.log(self.r0)

    def profile(self, x1):
        return np.exp(-((np.asarray(x1, dtype=float) - self.x0) / self.width) ** 2)

    def ramp(self, t):
        t = np.asarray(t, dtype=float)
        if self.t_ramp == 0:
            return np.where(t >= 0, 1.0, 0.0)
        return np.clip(t / self.t_ramp, 0.0, 1.0)

    def log_ramp_transform(self, sigma) -> complex:
        """log of int_0^inf e^{-sigma t} tau(t) dt = (1 - e^{-sigma t_ramp}) / (t_ramp sigma^2)."""
        sigma = complex(sigma)
        if sigma == 0:
            raise OutOfRange("the Laplace variable must be nonzero")
        if self.t_ramp == 0:
            return complex(-np.log(sigma))
        return complex(np.log(-np.expm1(-sigma * self.t_ramp)) - np.log(self.t_ramp) - 2.0 * np.log(sigma))

    def log_transform(self, mu):
        """log of int e^{-i mu x} exp(-((x - x0)/w)^2) dx = w sqrt(pi) exp(-i mu x0 - mu^2 w^2 / 4)."""
        mu = np.asarray(mu, dtype=complex)
        w = self.width
        value = math.log(w * math.sqrt(math.pi)) - 1j * mu * self.x0 - mu * mu * w * w / 4.0
        return complex(value) if value.ndim == 0 else value

    def transform(self, mu, sigma) -> complex:
        return complex(np.exp(self.log_transform(mu) + self.log_ramp_transform(sigma)))

    def nodes(self, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes and weights (profile folded in) over the support."""
        x, w = np.polynomial.legendre.leggauss(count)
        half = _BUMP_SPAN * self.width
        points = self.x0 + half * x
        return points, half * w * self.profile(points)

    def to_dict(self) -> dict:
        return {"type": "gaussian_bump", "r0": self.r0, "width": self.width, "t_ramp": self.t_ramp}


@dataclass(frozen=True)
class TransmissionProblem:
    p: int
    q: int
    a1: float
    a2: float
    a3: float
    a4: float
    kappa_jump: float
    s0: float
    nu: float
    weight_s: float
    forcing: Optional[GaussianBump] = None

    def __post_init__(self):
        if int(self.p) != self.p or int(self.q) != self.q:
            raise InvalidSpec("omega0 needs integers p and q")
        if not (self.q >= 1 and self.p > 2 * self.q):
            raise InvalidSpec(f"need p > 2q >= 2, got p={self.p}, q={self.q}")
        if math.gcd(int(self.p), int(self.q)) != 1:
            raise InvalidSpec(f"q/p={self.q}/{self.p} must be irreducible")
        if self.a1 < 0 or self.a2 < 0 or self.a1 + self.a2 <= 0:
            raise OutOfRange(f"need a1, a2 >= 0 with a1 + a2 > 0, got a1={self.a1}, a2={self.a2}")
        if not (self.a3 > 0 and self.a4 > 0):
            raise OutOfRange(f"need a3, a4 > 0, got a3={self.a3}, a4={self.a4}")
        if not (self.kappa_jump > 0):
            raise OutOfRange(f"kappa={self.kappa_jump} must be positive")
        if not (0.0 < self.nu < 1.0):
            raise OutOfRange(f"nu={self.nu} must lie in (0, 1)")
        if not math.isfinite(self.weight_s) or not math.isfinite(self.s0):
            raise InvalidSpec("s and s0 must be finite")

    @property
    def omega0(self) -> float:
        return self.q * math.pi / self.p

    @property
    def q1(self) -> float:
        return self.p / (2.0 * self.q)

    @property
    def period(self) -> float:
        return 4.0 * math.pi * self.q

    @property
    def s_star(self) -> float:
        return self.s0 + 1.0

    @property
    def params(self) -> EquationParams:
        return EquationParams(a1=self.a1, a2=self.a2, nu=self.nu, beta=1.0)

    def x(self, lam) -> complex:
        return 1j * lam + self.weight_s

    @classmethod
    def from_dict(cls, data: dict) -> "TransmissionProblem":
        try:
            corner = data["omega0"]
            forcing = data.get("forcing")
            bump = None
            if forcing is not None:
                if forcing.get("type", "gaussian_bump") != "gaussian_bump":
                    raise InvalidSpec(f"unknown forcing type {forcing.get('type')!r}")
                bump = GaussianBump(r0=float(forcing.get("r0", 1.0)), width=float(forcing.get("width", 0.5)),
                                    t_ramp=float(forcing.get("t_ramp", 1.0)))
            return cls(p=int(corner["p"]), q=int(corner["q"]), a1=float(data["a1"]), a2=float(data["a2"]),
                       a3=float(data["a3"]), a4=float(data["a4"]), kappa_jump=float(data["kappa"]),
                       s0=float(data["s0"]), nu=float(data["nu"]), weight_s=float(data["s"]), forcing=bump)
        except KeyError as e:
            raise InvalidSpec(f"transmission problem is missing {e.args[0]!r}") from e
        except (TypeError, ValueError) as e:
            raise InvalidSpec(f"malformed transmission problem: {e}") from e

    def to_dict(self) -> dict:
        return {"omega0": {"q": self.q, "p": self.p}, "a1": self.a1, "a2": self.a2, "a3": self.a3,
                "a4": self.a4, "kappa": self.kappa_jump, "s0": self.s0, "nu": self.nu,
                "s": self.weight_s, "forcing": None if self.forcing is None else self.forcing.to_dict()}


def _sign(problem: TransmissionProblem) -> int:
    if problem.kappa_jump == 1.0:
        raise DegenerateCoefficients("kappa = 1 makes G degenerate", kappa=1.0)
    return 1 if problem.kappa_jump > 1.0 else -1


def _big_m(problem: TransmissionProblem) -> float:
    k = problem.kappa_jump
    return (problem.a3 * (k + 1.0) + 2.0 * k * problem.a4) / (k - 1.0)


# ---------------------------------------------------------------------------
# angles and zeros


@dataclass(frozen=True)
class TransmissionFactorization:
    """
    G(lambda) = -sqrt(1+a3^2) S+(w; theta1, theta2, q1, q2) / S^sign(w; 0, 0, q1, q2*)
    with w = 2 omega0 x. g_form is that quotient in w; omega_rho is x G as a
    function of rho.
    """
    theta1: float
    theta2: float
    q2: float
    q2_star: float
    sign: int
    big_m: float
    identity_defect: float
    numerator: Optional[ZeroTable] = None
    denominator: Optional[ZeroTable] = None
    g_form: Optional[ProductForm] = None
    omega_rho: Optional[OmegaSpec] = None
    truncation: int = 0
    notes: Dict[str, object] = field(default_factory=dict)

    @property
    def has_tables(self) -> bool:
        return self.numerator is not None and self.denominator is not None

    @property
    def delta0_kappa(self) -> complex:
        if self.omega_rho is None:
            raise InvalidWeight("no rho-form: factorize_G was not run or s* = 0")
        return complex(self.omega_rho.finite.delta0)

    def to_dict(self) -> dict:
        out = {"theta1": self.theta1, "theta2": self.theta2, "q2": self.q2, "q2_star": self.q2_star,
               "sign": self.sign, "M": self.big_m, "identity_defect": self.identity_defect,
               "notes": self.notes}
        if self.has_tables:
            out["numerator_zeros"] = self.numerator.to_dict()
            out["denominator_zeros"] = self.denominator.to_dict()
        if self.omega_rho is not None:
            d = self.delta0_kappa
            out["delta0_kappa"] = [d.real, d.imag]
            out["truncation"] = self.truncation
        return out


def derive_angles(problem: TransmissionProblem) -> TransmissionFactorization:
    sign = _sign(problem)
    k, a3 = problem.kappa_jump, problem.a3
    big_m = _big_m(problem)
    r1 = math.hypot(1.0, a3)
    theta1 = math.atan2(1.0, a3)
    theta2 = math.atan2(1.0, big_m)
    q2 = math.hypot(1.0, big_m) / r1
    q2_star = (k + 1.0) / abs(k - 1.0)
    defect = abs(math.sin(theta1) + q2 * math.sin(theta2) - 2.0 / r1)
    if defect > _IDENTITY_TOL:
        logger.warning(f"angle identity off by {defect:.3g}")
    logger.info(f"angles: theta1={theta1:.12g}, theta2={theta2:.12g}, q2={q2:.12g}, "
                f"q2*={q2_star:.12g}, sign={sign:+d}")
    return TransmissionFactorization(theta1, theta2, q2, q2_star, sign, big_m, defect)


def numerator_spec(problem: TransmissionProblem, fact: TransmissionFactorization) -> TrigCoefficientSpec:
    return TrigCoefficientSpec(form="s_plus", theta1=fact.theta1, theta2=fact.theta2,
                               p=problem.p, q=problem.q, q2=fact.q2)


def denominator_spec(problem: TransmissionProblem, fact: TransmissionFactorization) -> TrigCoefficientSpec:
    return TrigCoefficientSpec(form="s_plus" if fact.sign > 0 else "s_minus", theta1=0.0, theta2=0.0,
                               p=problem.p, q=problem.q, q2=fact.q2_star)


def locate_zeros(problem: TransmissionProblem,
                 fact: Optional[TransmissionFactorization] = None) -> TransmissionFactorization:
    """Angles plus the zero tables of both S coefficients; these do not depend on s."""
    fact = fact or derive_angles(problem)
    if fact.has_tables:
        return fact
    num = find_zeros(numerator_spec(problem, fact))
    den = find_zeros(denominator_spec(problem, fact))
    if num.complex_zeros:
        logger.warning(f"{len(num.complex_zeros)} complex numerator zeros are left out of the Z sequences")
    return replace(fact, numerator=num, denominator=den)


# ---------------------------------------------------------------------------
# G in three forms


def build_G(problem: TransmissionProblem, lam) -> complex:
    """Closed form of G(lambda)."""
    k = problem.kappa_jump
    _sign(problem)
    x = problem.x(complex(lam))
    w = 2.0 * problem.omega0 * x
    big_m = _big_m(problem)
    lead, tail = np.sin(w), (k + 1.0) / (k - 1.0) * np.sin(math.pi * x)
    den = lead + tail
    if abs(den) <= _DENOMINATOR_TOL * (abs(lead) + abs(tail) + 1.0):
        raise DenominatorZero(f"G has a pole at lambda={lam}", lam=str(lam))
    num = np.cos(math.pi * x) - big_m * np.sin(math.pi * x) + np.cos(w) - problem.a3 * np.sin(w)
    return complex(num / den)


def _n_terms(problem: TransmissionProblem, x):
    """N, N1 and the two corner angles alpha = x(omega0 - pi/2), beta = x(omega0 + pi/2)."""
    k, a4 = problem.kappa_jump, problem.a4
    alpha = x * (problem.omega0 - HALF_PI)
    beta = x * (problem.omega0 + HALF_PI)
    n = (np.cos(alpha) + a4 * np.sin(alpha)) / (np.cos(beta) + k * a4 * np.sin(beta))
    n1 = k * n * np.sin(beta) - np.sin(alpha)
    return n, n1, alpha, beta


def G_composition(problem: TransmissionProblem, lam) -> complex:
    """G from N and N1 before any simplification."""
    x = problem.x(complex(lam))
    n, n1, alpha, beta = _n_terms(problem, x)
    return complex((problem.kappa_jump * n * np.cos(beta) - np.cos(alpha)) / n1 - problem.a3)


def G_at_zero(problem: TransmissionProblem, fact: TransmissionFactorization) -> complex:
    s = problem.weight_s
    r1 = math.hypot(1.0, problem.a3)
    num = math.sin(2.0 * problem.omega0 * s - fact.theta1) + fact.q2 * math.sin(math.pi * s - fact.theta2)
    den = math.sin(2.0 * problem.omega0 * s) + fact.sign * fact.q2_star * math.sin(math.pi * s)
    if den == 0.0:
        raise DenominatorZero(f"G(0) has a zero denominator at s={s}")
    return complex(-r1 * num / den)


def factorize_G(problem: TransmissionProblem, truncation: Optional[int] = None,
                fact: Optional[TransmissionFactorization] = None) -> TransmissionFactorization:
    """Product forms of G in w and of Omega(rho) = x G(i s* rho)."""
    n = get_settings().truncation if truncation is None else int(truncation)
    fact = locate_zeros(problem, fact)
    w0 = 2.0 * problem.omega0
    num = factorize_s(numerator_spec(problem, fact), n).scaled(-math.hypot(1.0, problem.a3))
    den = factorize_s(denominator_spec(problem, fact), n)
    g_form = num.over(den, label="G(w)")
    linear = ProductForm(OmegaSpec(FiniteFactorSpec(delta0=1.0 / w0, d2=(0.0,)), label="x"),
                         lambda w: w / w0, n, "x")
    xg = g_form.times(linear, label="xG(w)")
    notes = dict(fact.notes)
    notes.update(numerator_K=fact.numerator.count, denominator_K=fact.denominator.count)
    if problem.s_star == 0.0:
        notes["shortcut"] = "s* = 0: calU = f*/(c - x G), no difference equation"
        logger.info("s* = 0, skipping the rho-form")
        return replace(fact, g_form=g_form, truncation=n, notes=notes)
    try:
        omega = substitute_affine(xg.omega, w0 * problem.weight_s, -w0 * problem.s_star, n)
    except ZeroBase as e:
        raise InvalidWeight(f"s={problem.weight_s} sits on a zero of G's product", s=problem.weight_s) from e
    if not np.isfinite(complex(omega.finite.delta0)) or complex(omega.finite.delta0) == 0:
        raise InvalidWeight(f"s={problem.weight_s} sits on a zero of G's product", s=problem.weight_s)
    omega = replace(omega, label="x G(i s* rho)")
    logger.info(f"factorized G: delta0(kappa)={complex(omega.finite.delta0):.8g}, "
                f"{len(omega.families)} families, truncation {n}")
    return replace(fact, g_form=g_form, omega_rho=omega, truncation=n, notes=notes)


def G_factorized(problem: TransmissionProblem, fact: TransmissionFactorization, lam,
                 truncation: Optional[int] = None, extrapolate: bool = False) -> complex:
    if fact.g_form is None:
        raise InvalidSpec("factorize_G must run before G_factorized")
    w = 2.0 * problem.omega0 * problem.x(complex(lam))
    return fact.g_form.evaluate(w, truncation, extrapolate)


def omega_rho_value(fact: TransmissionFactorization, rho) -> complex:
    """Omega(rho) at the factorization's own truncation."""
    if fact.omega_rho is None:
        raise InvalidWeight("no rho-form: factorize_G was not run or s* = 0")
    return evaluate_omega(fact.omega_rho, complex(rho), fact.truncation).value


# ---------------------------------------------------------------------------
# shifted zero sequences and the admissible weights


@dataclass(frozen=True)
class ShiftedZeros:
    """
    Zbar+_{i,+-n} from the numerator zeros zbar_i and Z_{i,+-n} from the
    denominator zeros z_i (z_0 = 0), scaled by |s*| 2 omega0.
    """
    zbar: np.ndarray
    z: np.ndarray
    shift: float
    scale: float
    period: float
    s_star_sign: int

    def zbar_plus(self, i: int, n: int = 0) -> float:
        return float((self.zbar[i] + n * self.period - self.shift) / self.scale)

    def zbar_minus(self, i: int, n: int = 0) -> float:
        return float((n * self.period - self.zbar[i] + self.shift) / self.scale)

    def z_plus(self, i: int, n: int = 0) -> float:
        return float((self.z[i] + n * self.period - self.shift) / self.scale)

    def z_minus(self, i: int, n: int = 0) -> float:
        return float((self.z[i] + n * self.period + self.shift) / self.scale)

    def need(self, numerator: int, denominator: int, what: str) -> None:
        if self.zbar.size < numerator or self.z.size < denominator:
            raise InsufficientZeros(
                f"{what} needs {numerator} numerator and {denominator} denominator zeros, "
                f"found {self.zbar.size} and {self.z.size}",
                numerator=int(self.zbar.size), denominator=int(self.z.size))

    def correction(self, n: int) -> float:
        """R(n): the x(ln x - 1) correction of the n-th Gamma factor group."""
        if n < 1:
            raise OutOfRange("the correction is defined for n >= 1")

        def xlx(v):
            return v * (math.log(v) - 1.0)

        top = sum(xlx(self.zbar_minus(i, n)) - xlx(self.zbar_plus(i, n)) for i in range(self.zbar.size))
        bottom = sum(xlx(self.z_minus(i, n)) - xlx(self.z_plus(i, n)) for i in range(self.z.size))
        return float(top - bottom if self.s_star_sign > 0 else top + bottom)


def shifted_zeros(problem: TransmissionProblem, fact: TransmissionFactorization) -> ShiftedZeros:
    if problem.s_star == 0.0:
        raise InvalidWeight("s* = 0 has no shifted sequences")
    fact = locate_zeros(problem, fact)
    w0 = 2.0 * problem.omega0
    return ShiftedZeros(np.array(fact.numerator.locations, dtype=float),
                        np.array(fact.denominator.locations, dtype=float),
                        w0 * problem.weight_s, abs(problem.s_star) * w0, fact.numerator.period,
                        1 if problem.s_star > 0 else -1)


def rho_window(problem: TransmissionProblem, fact: TransmissionFactorization) -> Tuple[float, float]:
    """Open interval for Re rho where the particular solution is built."""
    sz = shifted_zeros(problem, fact)
    if problem.s_star < 0:
        sz.need(4, 2, "the rho window")
        return -sz.z_minus(1), sz.zbar_plus(3)
    sz.need(0, 5, "the rho window")
    return -sz.z_plus(4), 1.0 + sz.z_minus(1)


def rho_exclusions(problem: TransmissionProblem, fact: TransmissionFactorization,
                   d0: float = 0.5) -> List[Tuple[str, float]]:
    """Isolated values of Re rho where V_h vanishes on the contour or the plug-in has a pole."""
    sz = shifted_zeros(problem, fact)
    points = []
    if problem.s_star < 0:
        sz.need(3, 6, "the rho exclusions")
        for m in _EXCLUSION_RANGE:
            points += [(f"contour_zero[{i}]", d0 + sz.z_minus(i) - m) for i in range(1, 6)]
            points += [(f"plugin_pole[{j}]", 1.0 - m + sz.zbar_plus(j)) for j in range(3)]
    else:
        sz.need(5, 4, "the rho exclusions")
        for m in _EXCLUSION_RANGE:
            points += [(f"contour_zero[{i}]", d0 - 1.0 - sz.z_plus(i) + m) for i in range(5)]
            points += [(f"plugin_pole[{j}]", m - sz.z_plus(j)) for j in range(1, 4)]
    return points


def weight_window(problem: TransmissionProblem, fact: TransmissionFactorization) -> Dict[str, Tuple[float, float]]:
    """
    The s-interval for which Re rho = 0 lies in the rho window, next to the
    interval as usually displayed (-1 instead of -|s*| on the lower end when s* > 0).
    """
    fact = locate_zeros(problem, fact)
    w0 = 2.0 * problem.omega0
    z, zbar = fact.denominator.locations, fact.numerator.locations
    if problem.s_star < 0:
        if len(z) < 2 or len(zbar) < 4:
            raise InsufficientZeros("the weight window needs z_1 and zbar_3")
        window = (-z[1] / w0, zbar[3] / w0)
        return {"window": window, "as_displayed": window}
    if len(z) < 5:
        raise InsufficientZeros("the weight window needs z_4")
    return {"window": (-z[1] / w0 - abs(problem.s_star), z[4] / w0),
            "as_displayed": (-z[1] / w0 - 1.0, z[4] / w0)}


def _lattice_distance(value: float, points: Iterable[float], period: float) -> float:
    best = math.inf
    for p in points:
        r = (value - p) % period
        best = min(best, r, period - r)
    return best


def admissible_weight(problem: TransmissionProblem, fact: Optional[TransmissionFactorization] = None,
                      d0: float = 0.5) -> ValidationReport:
    """Every restriction on the weight s, as report clauses."""
    report = ValidationReport(subject=f"s={problem.weight_s:g}")
    s = problem.weight_s
    fact = locate_zeros(problem, fact)
    w0 = 2.0 * problem.omega0
    period = fact.numerator.period
    shift = w0 * s

    report.add("s_nonzero", s != 0.0, "s must be nonzero", s)
    report.add("s_bound", abs(s) < period, f"|s| < 4 pi q = {period:.12g}", abs(s))
    lead, tail = math.sin(shift), fact.sign * fact.q2_star * math.sin(math.pi * s)
    den = lead + tail
    report.add("denominator", abs(den) > _LATTICE_TOL * (1.0 + abs(lead) + abs(tail)),
               "sin 2 omega0 s + sgn(kappa-1) q2* sin pi s != 0", den)
    num_dist = _lattice_distance(shift, [-z for z in fact.numerator.locations], period)
    num_dist = min(num_dist, _lattice_distance(shift, fact.numerator.locations, period))
    report.add("numerator_lattice", num_dist > _LATTICE_TOL * period,
               "2 omega0 s avoids +-zbar_{i,n}", num_dist)
    z = fact.denominator.locations
    den_dist = min(_lattice_distance(shift, z, period), _lattice_distance(shift, [-v for v in z], period))
    report.add("denominator_lattice", den_dist > _LATTICE_TOL * period,
               "2 omega0 s avoids +-z_{i,n}", den_dist)

    if problem.s_star == 0.0:
        report.notes["shortcut"] = "s* = 0: no rho windows apply"
        return report

    sz = shifted_zeros(problem, fact)
    first = [sz.zbar_plus(i, 1) for i in range(sz.zbar.size)] + [sz.zbar_minus(i, 1) for i in range(sz.zbar.size)]
    first += [sz.z_plus(i, 1) for i in range(sz.z.size)] + [sz.z_minus(i, 1) for i in range(sz.z.size)]
    low = min(first) if first else math.inf
    report.add("shifted_positive", low > 0, "Z and Zbar+ positive for n >= 1", low)

    try:
        windows = weight_window(problem, fact)
        lo, hi = rho_window(problem, fact)
        exclusions = rho_exclusions(problem, fact, d0)
    except InsufficientZeros as e:
        report.add("window", False, e.message)
        return report
    w_lo, w_hi = windows["window"]
    report.notes["window"] = [w_lo, w_hi]
    report.notes["window_as_displayed"] = list(windows["as_displayed"])
    report.notes["rho_window"] = [lo, hi]
    report.add("window", w_lo < s < w_hi, f"{w_lo:.12g} < s < {w_hi:.12g}", s)
    report.add("rho_window", lo < 0.0 < hi, f"{lo:.12g} < Re rho = 0 < {hi:.12g}", min(-lo, hi))
    gap = min(abs(v) for _, v in exclusions)
    hit = min(exclusions, key=lambda e: abs(e[1]))[0]
    report.add("exclusions", gap > get_settings().tol_region,
               f"Re rho = 0 is {gap:.3g} from {hit}", gap, borderline=gap < 1e-6)
    if not report.passed:
        logger.warning(f"weight s={s} fails {', '.join(c.clause for c in report.failed())}")
    return report


def check_lambda(problem: TransmissionProblem, fact: TransmissionFactorization, lam, d0: float = 0.5) -> complex:
    """rho = -i lambda / s*, after checking Re rho = Im lambda / s* against the windows."""
    lam = complex(lam)
    rho = -1j * lam / problem.s_star
    lo, hi = rho_window(problem, fact)
    if not lo < rho.real < hi:
        raise WindowViolation(f"Im lambda={lam.imag:g} gives Re rho={rho.real:.6g} outside ({lo:.6g}, {hi:.6g})",
                              window=[lo, hi])
    tol = get_settings().tol_region
    for name, point in rho_exclusions(problem, fact, d0):
        if abs(rho.real - point) < tol:
            raise WindowViolation(f"Re rho={rho.real:.12g} hits {name}", clause=name)
    return rho


# ---------------------------------------------------------------------------
# homogeneous solution in rho


def build_P1(problem: TransmissionProblem, fact: TransmissionFactorization) -> PeriodicPlugin:
    """Periodic plug-in that clears the Gamma poles inside the rho window."""
    sz = shifted_zeros(problem, fact)
    if problem.s_star < 0:
        sz.need(3, 6, "P1")
        zeros = np.array([1.0 + sz.z_plus(i) for i in range(1, 6)])
        poles = np.array([1.0 + sz.zbar_plus(i) for i in range(3)])

        def log_p(w):
            return complex(np.sum(log_sin(math.pi * (zeros - w))) - np.sum(log_sin(math.pi * (poles - w))))

        offsets = (tuple(float(v % 1.0) for v in zeros), tuple(float(v % 1.0) for v in poles))
    else:
        sz.need(5, 4, "P1")
        zeros = np.array([sz.zbar_plus(i) for i in range(5)])
        poles = np.array([sz.z_plus(i) for i in range(1, 4)])

        def log_p(w):
            return complex(np.sum(log_sin(math.pi * (zeros + w))) - np.sum(log_sin(math.pi * (poles + w))))

        offsets = (tuple(float(-v % 1.0) for v in zeros), tuple(float(-v % 1.0) for v in poles))
    label = "P1(s*<0)" if problem.s_star < 0 else "P1(s*>0)"
    return PeriodicPlugin(lambda w: np.exp(log_p(w)), label, log_p,
                          zero_offsets=offsets[0], pole_offsets=offsets[1])


def build_Vh(problem: TransmissionProblem, fact: TransmissionFactorization,
             truncation: Optional[int] = None, d0: float = 0.5) -> HomogeneousSolution:
    if problem.s_star == 0.0:
        raise InvalidWeight("s* = 0: the jump is given in closed form, there is no V_h")
    report = admissible_weight(problem, fact, d0)
    if not report.passed:
        names = [c.clause for c in report.failed()]
        raise InvalidWeight(f"weight s={problem.weight_s} fails {', '.join(names)}",
                            clauses=names, window=report.notes.get("window"))
    if fact.omega_rho is None or (truncation is not None and int(truncation) != fact.truncation):
        fact = factorize_G(problem, truncation, fact)
    plugin = build_P1(problem, fact)
    return build(fact.omega_rho, problem.params, plugin, fact.truncation)


def _log_vh_core(sol: HomogeneousSolution, points) -> np.ndarray:
    """log V_h without the (delta0/c)^(rho-1/2) power and without region checks."""
    ys = np.asarray(points, dtype=complex) / sol.beta
    flat = ys.ravel()
    plugin = np.array([sol.plugin.log(y) for y in flat], dtype=complex).reshape(ys.shape)
    return sol._prefactor(ys) + plugin + sol.log_core(ys)


def vh_asymptotics(problem: TransmissionProblem, fact: TransmissionFactorization, sol: HomogeneousSolution,
                   re_rho: float = 0.0, im_range: Tuple[float, float] = (10.0, 200.0),
                   samples: int = 12, eps: float = 0.05) -> ValidationReport:
    """
    Slopes of log|V_h/P1| and log|V_h| against |Im rho| at sigma = 1, set
    against the envelope [-pi/2 sgn(Re rho) + theta2 sgn s*] and the decay
    rate pi/2 - eps + theta2 sgn s*.
    """
    report = ValidationReport(subject=f"V_h at Re rho={re_rho:g}")
    ys = np.linspace(im_range[0], im_range[1], samples)
    sgn_star = 1.0 if problem.s_star > 0 else -1.0
    sgn_re = 0.0 if re_rho == 0 else math.copysign(1.0, re_rho)
    envelope = -HALF_PI * sgn_re + fact.theta2 * sgn_star
    decay = HALF_PI - eps + fact.theta2 * sgn_star
    power = sol.power_log(1.0)
    for side, sign in (("upper", 1.0), ("lower", -1.0)):
        rho = re_rho + 1j * sign * ys
        full = _log_vh_core(sol, rho) + (rho - 0.5) * power
        plugin = np.array([sol.plugin.log(r) for r in rho], dtype=complex)
        reduced = full - plugin
        # C1 ln|rho| + Re rho ln|rho| is taken out before fitting
        logs = reduced.real - (re_rho - 0.5) * np.log(np.abs(rho))
        slope_env = float(np.polyfit(ys, logs, 1)[0])
        slope_full = float(np.polyfit(ys, full.real, 1)[0])
        report.notes[f"envelope_slope_{side}"] = slope_env
        report.notes[f"growth_slope_{side}"] = slope_full
        report.add(f"envelope_{side}", slope_env <= envelope + 0.1 * abs(envelope) + 0.05,
                   f"slope {slope_env:.4g} vs envelope {envelope:.4g}", slope_env)
        report.add(f"decay_{side}", slope_full >= decay - 0.1 * abs(decay),
                   f"slope {slope_full:.4g} vs rate {decay:.4g}", slope_full)
    return report


# ---------------------------------------------------------------------------
# particular solution


def forcing_transform(problem: TransmissionProblem, mu, sigma) -> complex:
    """f*(mu, sigma): Fourier in x1 and Laplace in t of the forcing; zero when there is none."""
    if problem.forcing is None:
        return 0j
    return problem.forcing.transform(mu, sigma)


def rho_forcing(problem: TransmissionProblem) -> ForcingSpec:
    """F(rho, sigma) = f*(i s* rho + i(1 - s), sigma)."""
    bump = problem.forcing
    if bump is None:
        return ForcingSpec.zero()
    s_star, s = problem.s_star, problem.weight_s

    def log_f(rho, sigma):
        mu = 1j * s_star * rho + 1j * (1.0 - s)
        return bump.log_transform(mu) + bump.log_ramp_transform(sigma)

    return ForcingSpec(lambda rho, sigma: np.exp(log_f(rho, sigma)), "f*(i s* rho + i(1-s))", log_f,
                       decay_class="superexponential", decay_rate=None)


def transmission_kernel() -> KernelSpec:
    """
    K1 = 1. The transformed bump decays like exp(-(s* w Im rho)^2 / 4), which
    the cotangent factor alone carries; a periodic K1 with poles would leave
    its residue inside every unit strip.
    """
    return constant_kernel(1.0)


def solve_V(problem: TransmissionProblem, fact: TransmissionFactorization, sigma, rho,
            d0: float = 0.5, contour: Optional[ContourSpec] = None,
            sol_h: Optional[HomogeneousSolution] = None) -> ParticularValue:
    contour = contour or ContourSpec(d0=d0)
    sol_h = sol_h or build_Vh(problem, fact, d0=contour.d0)
    return solve_particular(sol_h, rho_forcing(problem), transmission_kernel(), contour, rho, sigma)


def residual_V(problem: TransmissionProblem, sol_h: HomogeneousSolution, sigma, rho,
               contour: Optional[ContourSpec] = None) -> float:
    """Relative residual of c V(rho+1) - Omega_rho V(rho) = F(rho)."""
    contour = contour or ContourSpec()
    return residual_inhomogeneous(sol_h, rho_forcing(problem), transmission_kernel(), contour, rho, sigma)


# ---------------------------------------------------------------------------
# fields in the transform domain


@dataclass(frozen=True)
class TransformValue:
    lam: complex
    x2: float
    U1: complex
    U2: complex
    jump: complex
    M1: complex
    M2: complex


def _amplitudes(problem: TransmissionProblem, lam, x2: float):
    """A1, A2 with U1* = A1 calU and U2* = A2 calU."""
    x = problem.x(np.asarray(lam, dtype=complex))
    n, n1, _, _ = _n_terms(problem, x)
    a1 = problem.kappa_jump * n * np.sin(x * (x2 + HALF_PI)) / n1
    a2 = np.sin(x * (x2 - HALF_PI)) / n1
    return a1, a2


def evaluate_U_transform(problem: TransmissionProblem, fact: TransmissionFactorization, lam, x2: float,
                         sigma, d0: float = 0.5, contour: Optional[ContourSpec] = None,
                         sol_h: Optional[HomogeneousSolution] = None) -> TransformValue:
    """U1*(lambda, x2, sigma), U2*(lambda, x2, sigma) from the jump calU = M2 N1."""
    if abs(x2) > HALF_PI:
        raise OutOfRange(f"x2={x2} must lie in [-pi/2, pi/2]")
    lam, sigma = complex(lam), complex(sigma)
    x = problem.x(lam)
    if problem.forcing is None:
        jump = 0j
    elif problem.s_star == 0.0:
        den = problem.params.c(sigma) - x * build_G(problem, lam)
        if den == 0:
            raise DenominatorZero(f"c - x G vanishes at lambda={lam}")
        jump = forcing_transform(problem, lam + 1j * (1.0 - problem.weight_s), sigma) / den
    else:
        rho = check_lambda(problem, fact, lam, d0)
        jump = solve_V(problem, fact, sigma, rho, d0, contour, sol_h).value
    n, n1, _, _ = _n_terms(problem, x)
    m2 = jump / n1
    m1 = problem.kappa_jump * n * m2
    return TransformValue(lam, float(x2), complex(m1 * np.sin(x * (x2 + HALF_PI))),
                          complex(m2 * np.sin(x * (x2 - HALF_PI))), complex(jump), complex(m1), complex(m2))


def flux_residual(problem: TransmissionProblem, lam, m2: complex = 1.0) -> float:
    """Relative defect of the flux condition on x2 = omega0 for M1 = kappa N M2."""
    x = problem.x(complex(lam))
    n, _, alpha, beta = _n_terms(problem, x)
    k = problem.kappa_jump
    m1 = k * n * m2
    value = x * (m1 * np.cos(beta) - k * m2 * np.cos(alpha)
                 + k * problem.a4 * (m1 * np.sin(beta) - m2 * np.sin(alpha)))
    scale = abs(x) * (abs(m1) * (abs(np.cos(beta)) + k * problem.a4 * abs(np.sin(beta)))
                      + k * abs(m2) * (abs(np.cos(alpha)) + problem.a4 * abs(np.sin(alpha))))
    return float(abs(value) / max(scale, 1e-300))


def jump_residual(problem: TransmissionProblem, value: TransformValue) -> float:
    """|U1*(omega0) - U2*(omega0) - calU| relative to |calU|."""
    x = problem.x(value.lam)
    n, n1, alpha, beta = _n_terms(problem, x)
    diff = value.M1 * np.sin(beta) - value.M2 * np.sin(alpha)
    return float(abs(diff - value.jump) / max(abs(value.jump), 1e-300))


# ---------------------------------------------------------------------------
# inverse transforms


def laplace_kernel(t: float, y: float, a1: float, a2: float, nu: float, d0: float) -> complex:
    """
    Inverse Laplace transform of (a1 sigma + a2 sigma^nu)^{-(d0 - i y)} at t,
    in closed form when a1 or a2 vanishes and through E^g_{1-nu, g} otherwise.
    """
    if t <= 0:
        return 0j
    xi = complex(d0, -y)
    log_t = math.log(t)
    if a1 == 0 or a2 == 0:
        kappa = (a1 + a2 * nu) / (a1 + a2)
        return complex(np.exp((kappa * xi - 1.0) * log_t - xi * math.log(a1 + a2)) * special.rgamma(kappa * xi))
    arg = -(a2 / a1) * t ** (1.0 - nu)
    ml = mittag_leffler3(1.0 - nu, xi, xi, arg)
    return complex(np.exp(-xi * math.log(a1) + (xi - 1.0) * log_t) * ml)


@dataclass(frozen=True)
class QuadConfig:
    """Trapezoid grids in lambda and y, Gauss-Legendre in time and in x1."""
    n_lambda: int = 33
    lambda_max: float = 8.0
    im_lambda: float = 0.0
    n_y: int = 33
    y_max: float = 6.0
    n_tau: int = 24
    n_rho: int = 48
    max_evaluations: int = 2_000_000

    def __post_init__(self):
        for name in ("n_lambda", "n_y"):
            if getattr(self, name) < 3:
                raise OutOfRange(f"{name} must be at least 3")
        for name in ("n_tau", "n_rho"):
            if getattr(self, name) < 2:
                raise OutOfRange(f"{name} must be at least 2")
        if not (self.lambda_max > 0 and self.y_max > 0):
            raise OutOfRange("lambda_max and y_max must be positive")

    @property
    def evaluations(self) -> int:
        return self.n_lambda * self.n_y * (self.n_tau + self.n_rho)

    @classmethod
    def from_dict(cls, data: dict) -> "QuadConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidSpec(f"unknown quadrature fields {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class InverseValue:
    x1: float
    x2: float
    t: float
    U1: complex
    U2: complex
    err_est: float


def _trapezoid(n: int, half_width: float) -> Tuple[np.ndarray, np.ndarray]:
    nodes = np.linspace(-half_width, half_width, n)
    weights = np.full(n, nodes[1] - nodes[0])
    weights[[0, -1]] *= 0.5
    return nodes, weights


def _coarse(nodes: np.ndarray) -> np.ndarray:
    sub = nodes[::2]
    weights = np.full(sub.size, sub[1] - sub[0])
    weights[[0, -1]] *= 0.5
    return weights


def time_factor(problem: TransmissionProblem, t: float, ys: np.ndarray, d0: float, n_tau: int) -> np.ndarray:
    """
    Phi(t, y) = int_0^t tau(t - s) L(s, y) ds with s = t u^{1/e}, which takes
    the s^{e-1} singularity of L out of the Gauss-Legendre sum.
    """
    bump = problem.forcing
    a1, a2, nu = problem.a1, problem.a2, problem.nu
    e = d0 if (a1 > 0 and a2 > 0) else (a1 + a2 * nu) / (a1 + a2) * d0
    u, wu = np.polynomial.legendre.leggauss(n_tau)
    u, wu = 0.5 * (u + 1.0), 0.5 * wu
    s = t * u ** (1.0 / e)
    jac = wu * t / e * u ** (1.0 / e - 1.0) * bump.ramp(t - s)
    out = np.empty(ys.size, dtype=complex)
    for k, y in enumerate(ys):
        out[k] = sum(j * laplace_kernel(sj, y, a1, a2, nu, d0) for j, sj in zip(jac, s))
    return out


def inverse_transforms(problem: TransmissionProblem, fact: TransmissionFactorization, x1: float, x2: float,
                       t: float, quad: Optional[QuadConfig] = None, sol_h: Optional[HomogeneousSolution] = None,
                       d0: float = 0.5) -> InverseValue:
    """
    U_k(x1, x2, t) = 1/(2 pi) int dlambda e^{i lambda x1} A_k(lambda, x2)
        * 1/2 int dy [cot pi xi + i] K1(xi) V_h(rho)/(V_h(rho+1+xi) c) phi^(mu) Phi(t, y)

    with xi = -d0 + i y, rho = -i lambda / s*, mu = lambda + i s* xi + i(1 - s);
    the sigma-dependence c^{-(d0 - i y)} is inverted by Phi.
    """
    quad = quad or QuadConfig()
    if quad.evaluations > quad.max_evaluations:
        raise BudgetExceeded(f"{quad.evaluations} integrand evaluations exceed {quad.max_evaluations}",
                             evaluations=quad.evaluations)
    if abs(x2) > HALF_PI:
        raise OutOfRange(f"x2={x2} must lie in [-pi/2, pi/2]")
    if problem.forcing is None or t <= 0:
        return InverseValue(float(x1), float(x2), float(t), 0j, 0j, 0.0)
    if problem.s_star == 0.0:
        raise IncompatibleParams("inverse transforms need s* != 0; use evaluate_U_transform for s* = 0")

    lam_re, w_lam = _trapezoid(quad.n_lambda, quad.lambda_max)
    lam = lam_re + 1j * quad.im_lambda
    check_lambda(problem, fact, lam[0], d0)
    sol_h = sol_h or build_Vh(problem, fact, d0=d0)

    ys, w_y = _trapezoid(quad.n_y, quad.y_max)
    xi = -d0 + 1j * ys
    kernel = transmission_kernel()
    log_k = log_cot_kernel(xi) + np.array([kernel.log(v) for v in xi], dtype=complex)
    phi_t = time_factor(problem, t, ys, d0, quad.n_tau)
    log_delta0 = complex(principal_log(complex(sol_h.spec.finite.delta0)))
    nodes, w_nodes = problem.forcing.nodes(quad.n_rho)
    s_star, s = problem.s_star, problem.weight_s

    def row(l):
        rho = -1j * l / s_star
        core0 = _log_vh_core(sol_h, np.array([rho]))[0]
        core1 = _log_vh_core(sol_h, rho + 1.0 + xi)
        mu = l + 1j * s_star * xi + 1j * (1.0 - s)
        phi_hat = np.exp(-1j * np.outer(mu, nodes)) @ w_nodes
        with np.errstate(under="ignore", over="ignore"):
            ratio = np.exp(log_k + core0 - core1 - (1.0 + xi) * log_delta0)
        # d xi = i dy
        return 1j * ratio * phi_hat * phi_t

    threads = get_settings().threads
    if threads > 1 and lam.size > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = np.array(list(pool.map(row, lam)))
    else:
        rows = np.array([row(l) for l in lam])

    amp1, amp2 = _amplitudes(problem, lam, x2)
    phase = np.exp(1j * lam * x1) / (2.0 * math.pi)
    jump = rows @ w_y
    jump_coarse = rows[::2][:, ::2] @ _coarse(ys)
    w_coarse = _coarse(lam_re)
    u1 = complex(np.sum(w_lam * phase * amp1 * jump))
    u2 = complex(np.sum(w_lam * phase * amp2 * jump))
    u1c = complex(np.sum(w_coarse * phase[::2] * amp1[::2] * jump_coarse))
    u2c = complex(np.sum(w_coarse * phase[::2] * amp2[::2] * jump_coarse))
    err = max(abs(u1 - u1c), abs(u2 - u2c))
    logger.debug(f"U({x1:g}, {x2:g}, {t:g}) = ({u1:.6g}, {u2:.6g}), err {err:.3g}")
    return InverseValue(float(x1), float(x2), float(t), u1, u2, float(err))


def field_grid(problem: TransmissionProblem, fact: TransmissionFactorization,
               points: Iterable[Tuple[float, float, float]], quad: Optional[QuadConfig] = None,
               d0: float = 0.5, sol_h: Optional[HomogeneousSolution] = None) -> List[InverseValue]:
    """inverse_transforms over (x1, x2, t) points with one V_h shared by all of them."""
    points = [tuple(float(v) for v in p) for p in points]
    if sol_h is None and problem.forcing is not None and problem.s_star != 0.0 and any(p[2] > 0 for p in points):
        sol_h = build_Vh(problem, fact, d0=d0)
    logger.info(f"evaluating the field at {len(points)} points")
    return [inverse_transforms(problem, fact, x1, x2, t, quad, sol_h, d0) for x1, x2, t in points]
