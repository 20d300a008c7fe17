"""
Zeros and infinite-product factorizations of the trigonometric coefficients

    sin(q0 z +- theta), cos(q0 z +- theta), tan(q0 z +- theta),
    S+-(z; theta1, theta2, q1, q2) = sin(z - theta1) +- q2 sin(q1 z - theta2),
    tan(w1 z - theta1) +- q3 tan(w2 z - theta2)

and their conversion into the Omega form of the coefficient module.

S+- has period 4 pi q when q1 = p/(2q). With u = exp(i z/(2q)), u^p S+-(z)
is a polynomial of degree 2p in u, so all zeros on one period come from its
roots; real ones are polished with brentq on the derivative matching the
cluster size. Every product is exact (no exponential factor): the lattice
translates z_i + n 4 pi q become the h/gamma families.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import partial
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from fde.coefficient import (AffinePowerGenerator, EquationParams, FamilyKind, FiniteFactorSpec,
                             OmegaSpec, SequenceFamily, evaluate_omega, log_omega1,
                             substitute_affine, validate_hypotheses)
from fde.config import get_settings
from fde.errors import (BracketFailure, ExcludedAngle, IncompatibleParams, InvalidSpec,
                        KernelInvalid, OutOfRange, SummabilityFailure, UnknownClass)
from fde.homogeneous import PeriodicPlugin
from fde.particular import KernelSpec, constant_kernel, sin_power_kernel
from fde.reports import ValidationReport
from fde.specfun import angle_reduce, log_sin

logger = logging.getLogger(__name__)

FORMS = ("sin_shift", "cos_shift", "tan_shift", "s_plus", "s_minus", "tan_combo", "quotient")
TWO_PI = 2.0 * math.pi

_ANGLE_TOL = 1e-12
_CLUSTER_TOL = 1e-4        # fraction of the period
_REAL_TOL = 1e-7           # fraction of the period
_TOL_VALUE = 1e-10
_TOL_LOW = 1e-6
_TOL_HIGH = 1e-3
_SNAP_TOL = 1e-9
_SCAN_POINTS = 10_000
_BRACKET_WIDTHS = (1e-10, 1e-8, 1e-6, 1e-4, 1e-3, 1e-2)
_SPLIT_WIDTHS = (1e-10, 1e-8, 1e-6)
_MAX_DENOMINATOR = 256


def _parse_sign(value) -> int:
    if value in (1, "+", "plus", 1.0):
        return 1
    if value in (-1, "-", "minus", -1.0):
        return -1
    raise InvalidSpec(f"sign must be + or -, got {value!r}")


def _check_range(name: str, theta: float) -> None:
    if not math.isfinite(theta) or not (0.0 <= theta < TWO_PI):
        raise OutOfRange(f"{name}={theta} must lie in [0, 2pi)")


@dataclass(frozen=True)
class TrigCoefficientSpec:
    """
    One coefficient of the catalog. Only the fields of the chosen form are
    read: q0/theta/sign for the shifted sin/cos/tan, theta1/theta2/p/q/q2 for
    S+-, omega1/omega2/q3/theta1/theta2/sign for tan combinations and
    numerator/denominator for quotients.
    """
    form: str
    q0: float = 1.0
    theta: float = 0.0
    sign: int = 1
    theta1: float = 0.0
    theta2: float = 0.0
    p: int = 4
    q: int = 1
    q2: float = 2.0
    omega1: float = 1.0
    omega2: float = 2.0
    q3: float = 1.0
    numerator: Optional["TrigCoefficientSpec"] = None
    denominator: Optional["TrigCoefficientSpec"] = None

    def __post_init__(self):
        if self.form not in FORMS:
            raise InvalidSpec(f"unknown coefficient form {self.form!r}; expected one of {FORMS}")
        object.__setattr__(self, "sign", _parse_sign(self.sign))
        if self.form in ("sin_shift", "cos_shift", "tan_shift"):
            if self.q0 == 0 or not math.isfinite(self.q0):
                raise InvalidSpec("q0 must be finite and nonzero")
            _check_range("theta", self.theta)
        elif self.is_s_form:
            if int(self.p) != self.p or int(self.q) != self.q:
                raise InvalidSpec("p and q must be integers")
            if not (self.q >= 1 and self.p > 2 * self.q):
                raise InvalidSpec(f"need p > 2q >= 2, got p={self.p}, q={self.q}")
            if math.gcd(int(self.p), int(self.q)) != 1:
                raise InvalidSpec(f"q/p={self.q}/{self.p} must be irreducible")
            if not (self.q2 > 0) or self.q2 == 1.0:
                raise InvalidSpec(f"q2={self.q2} must be positive and different from 1")
            _check_range("theta1", self.theta1)
            _check_range("theta2", self.theta2)
        elif self.form == "tan_combo":
            if self.omega1 == 0 or self.omega2 == 0:
                raise InvalidSpec("omega1 and omega2 must be nonzero")
            if not (self.q3 > 0):
                raise InvalidSpec("q3 must be positive")
            _check_range("theta1", self.theta1)
            _check_range("theta2", self.theta2)
        elif self.numerator is None or self.denominator is None:
            raise InvalidSpec("quotient needs both numerator and denominator")

    @property
    def is_s_form(self) -> bool:
        return self.form in ("s_plus", "s_minus")

    @property
    def s_sign(self) -> int:
        return 1 if self.form == "s_plus" else -1

    @property
    def q1(self) -> float:
        return self.p / (2.0 * self.q)

    @property
    def period(self) -> float:
        return 4.0 * math.pi * self.q

    @property
    def label(self) -> str:
        pm = "+" if self.sign > 0 else "-"
        if self.form in ("sin_shift", "cos_shift", "tan_shift"):
            return f"{self.form[:3]}({self.q0:g}z{pm}{self.theta:g})"
        if self.is_s_form:
            s = "+" if self.s_sign > 0 else "-"
            return f"S{s}(z;{self.theta1:g},{self.theta2:g},{self.p}/{2 * self.q},{self.q2:g})"
        if self.form == "tan_combo":
            return (f"tan({self.omega1:g}z-{self.theta1:g}){pm}{self.q3:g}"
                    f"tan({self.omega2:g}z-{self.theta2:g})")
        return f"[{self.numerator.label}]/[{self.denominator.label}]"

    def direct(self, z):
        """Closed-form value; accepts numpy arrays."""
        z = np.asarray(z, dtype=complex) if np.ndim(z) else complex(z)
        if self.form == "sin_shift":
            return np.sin(self.q0 * z + self.sign * self.theta)
        if self.form == "cos_shift":
            return np.cos(self.q0 * z + self.sign * self.theta)
        if self.form == "tan_shift":
            return np.tan(self.q0 * z + self.sign * self.theta)
        if self.is_s_form:
            return self.derivative(z, 0)
        if self.form == "tan_combo":
            return (np.tan(self.omega1 * z - self.theta1)
                    + self.sign * self.q3 * np.tan(self.omega2 * z - self.theta2))
        return self.numerator.direct(z) / self.denominator.direct(z)

    def derivative(self, z, order: int):
        """k-th derivative of S+-; real in, real out."""
        shift = order * math.pi / 2.0
        return (np.sin(z - self.theta1 + shift)
                + self.s_sign * self.q2 * self.q1 ** order * np.sin(self.q1 * z - self.theta2 + shift))

    def to_dict(self) -> dict:
        if self.form in ("sin_shift", "cos_shift", "tan_shift"):
            return {"form": self.form, "q0": self.q0, "theta": self.theta, "sign": self.sign}
        if self.is_s_form:
            return {"form": self.form, "theta1": self.theta1, "theta2": self.theta2,
                    "p": self.p, "q": self.q, "q2": self.q2}
        if self.form == "tan_combo":
            return {"form": self.form, "omega1": self.omega1, "omega2": self.omega2, "q3": self.q3,
                    "theta1": self.theta1, "theta2": self.theta2, "sign": self.sign}
        return {"form": self.form, "numerator": self.numerator.to_dict(),
                "denominator": self.denominator.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "TrigCoefficientSpec":
        if "form" not in data:
            raise InvalidSpec("coefficient spec needs a 'form'")
        known = {"form", "q0", "theta", "sign", "theta1", "theta2", "p", "q", "q2",
                 "omega1", "omega2", "q3", "numerator", "denominator"}
        unknown = set(data) - known
        if unknown:
            raise InvalidSpec(f"unknown coefficient fields {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("numerator", "denominator"):
            if kwargs.get(key) is not None:
                kwargs[key] = cls.from_dict(kwargs[key])
        for key in ("p", "q"):
            if key in kwargs:
                kwargs[key] = int(kwargs[key])
        return cls(**kwargs)


# ---------------------------------------------------------------------------
# zeros of S+-


@dataclass(frozen=True)
class ZeroEntry:
    index: int
    location: float
    multiplicity: int
    residual: float
    bracket_lo: float
    bracket_hi: float


@dataclass(frozen=True)
class ZeroTable:
    """Real zeros of S+- on [0, period), plus the complex ones when q2 is small."""
    label: str
    period: float
    entries: Tuple[ZeroEntry, ...]
    complex_zeros: Tuple[complex, ...] = ()
    lattice_rule: str = "generic"
    notes: Dict[str, object] = field(default_factory=dict)

    @property
    def count(self) -> int:
        """K: real zeros counted with multiplicity."""
        return sum(e.multiplicity for e in self.entries)

    @property
    def locations(self) -> Tuple[float, ...]:
        """Real zeros repeated by multiplicity, in increasing order."""
        return tuple(e.location for e in self.entries for _ in range(e.multiplicity))

    @property
    def origin_multiplicity(self) -> int:
        return sum(e.multiplicity for e in self.entries if e.location == 0.0)

    def nonzero(self) -> List[complex]:
        """Nonzero real zeros (with multiplicity) followed by the complex ones."""
        return ([complex(x) for x in self.locations if x != 0.0]
                + [complex(z) for z in self.complex_zeros])

    def csv_rows(self) -> List[Tuple]:
        return [(e.index, e.location, e.multiplicity, e.residual, e.bracket_lo, e.bracket_hi)
                for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "period": self.period,
            "K": self.count,
            "lattice_rule": self.lattice_rule,
            "zeros": [{"index": e.index, "location": e.location, "multiplicity": e.multiplicity,
                       "residual": e.residual, "bracket": [e.bracket_lo, e.bracket_hi]}
                      for e in self.entries],
            "complex_zeros": [[z.real, z.imag] for z in self.complex_zeros],
            "notes": self.notes,
        }


def _poly_coefficients(spec: TrigCoefficientSpec) -> np.ndarray:
    """u^p S(z), u = exp(iz/2q), as numpy.roots coefficients (highest power first)."""
    p, q, s = spec.p, spec.q, spec.s_sign
    c = np.zeros(2 * p + 1, dtype=complex)
    c[2 * p] += s * spec.q2 * np.exp(-1j * spec.theta2) / 2j
    c[0] += -s * spec.q2 * np.exp(1j * spec.theta2) / 2j
    c[p + 2 * q] += np.exp(-1j * spec.theta1) / 2j
    c[p - 2 * q] += -np.exp(1j * spec.theta1) / 2j
    return c[::-1]


def _candidates(spec: TrigCoefficientSpec) -> np.ndarray:
    u = np.roots(_poly_coefficients(spec))
    z = -2j * spec.q * np.log(u)
    return np.mod(z.real, spec.period) + 1j * z.imag


def _clusters(z: np.ndarray, period: float) -> List[np.ndarray]:
    z = z[np.argsort(z.real)]
    tol = _CLUSTER_TOL * period
    groups = [[z[0]]]
    for v in z[1:]:
        if abs(v - groups[-1][-1]) < tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    # a cluster straddling 0 ~ period
    if len(groups) > 1 and abs(groups[0][0] + period - groups[-1][-1]) < tol:
        groups[0] = [v - period for v in groups.pop()] + groups[0]
    return [np.array(g) for g in groups]


def _refine(spec: TrigCoefficientSpec, center: float, multiplicity: int,
            widths: Tuple[float, ...] = _BRACKET_WIDTHS) -> Tuple[float, Tuple[float, float]]:
    order = multiplicity - 1

    def g(x):
        return float(spec.derivative(x, order))

    scale = 1.0 + abs(center)
    for width in widths:
        lo, hi = center - width * scale, center + width * scale
        glo, ghi = g(lo), g(hi)
        if glo == 0.0:
            return lo, (lo, hi)
        if ghi == 0.0:
            return hi, (lo, hi)
        if glo * ghi < 0.0:
            return brentq(g, lo, hi, xtol=1e-15, maxiter=200), (lo, hi)
    lo, hi = center - widths[-1] * scale, center + widths[-1] * scale
    raise BracketFailure(f"no sign change of derivative {order} of {spec.label} in [{lo:.12g}, {hi:.12g}]",
                         interval=[lo, hi], multiplicity=multiplicity)


def _multiplicity_ok(spec: TrigCoefficientSpec, x: float, m: int) -> bool:
    scale = 1.0 + spec.q2
    if abs(spec.derivative(x, 0)) >= _TOL_VALUE * scale:
        return False
    if any(abs(spec.derivative(x, k)) >= _TOL_LOW * scale for k in range(1, m)):
        return False
    return abs(spec.derivative(x, m)) > _TOL_HIGH


def _resolve_cluster(spec: TrigCoefficientSpec, members: np.ndarray):
    """Split one root cluster into real zeros (location, multiplicity, bracket) and complex ones."""
    m = members.size
    tol = _REAL_TOL * spec.period
    center = complex(members.mean())
    if abs(center.imag) > tol:
        return [], [complex(v) for v in members]
    try:
        x, bracket = _refine(spec, center.real, m)
        if _multiplicity_ok(spec, x, m):
            return [(x, m, bracket)], []
    except BracketFailure:
        if m == 1:
            raise

    found, rest = [], []
    for v in members:
        if abs(v.imag) <= tol:
            try:
                x, bracket = _refine(spec, v.real, 1, _SPLIT_WIDTHS)
                if _multiplicity_ok(spec, x, 1) and all(abs(x - y) > 1e-12 for y, _, _ in found):
                    found.append((x, 1, bracket))
                    continue
            except BracketFailure:
                pass
        rest.append(complex(v))
    if m % 2 == 1 and not found:
        # an odd cluster always holds a real crossing
        x, bracket = _refine(spec, center.real, 1)
        found.append((x, 1, bracket))
        rest.sort(key=lambda v: abs(v.imag))
        rest = rest[1:]
    return found, rest


def _scan_check(spec: TrigCoefficientSpec, entries: List[ZeroEntry]) -> int:
    """Sign changes on a uniform grid that no odd-multiplicity table entry explains."""
    period = spec.period
    x = np.linspace(0.0, period, _SCAN_POINTS, endpoint=False)
    step = period / _SCAN_POINTS
    sgn = np.sign(spec.derivative(x, 0))
    changes = np.nonzero(sgn * np.roll(sgn, -1) < 0)[0]
    odd = np.array([e.location for e in entries if e.multiplicity % 2 == 1])
    missing = 0
    for k in changes:
        mid = x[k] + 0.5 * step
        if odd.size == 0:
            missing += 1
            continue
        gap = np.abs((odd - mid + 0.5 * period) % period - 0.5 * period)
        if gap.min() > 2.0 * step:
            missing += 1
    return missing


def _interval_localized(spec: TrigCoefficientSpec, locations: Tuple[float, ...]) -> bool:
    """S+ with q2 > 1: the k-th zero sits in [(pi k + theta2 -+ pi/2)/q1] for consecutive k."""
    ks = [round((spec.q1 * z - spec.theta2) / math.pi) for z in locations]
    return all(b == a + 1 for a, b in zip(ks, ks[1:]))


def find_zeros(spec: TrigCoefficientSpec) -> ZeroTable:
    if not spec.is_s_form:
        raise InvalidSpec(f"find_zeros needs an S+- form, got {spec.form}")
    period = spec.period
    groups = _clusters(_candidates(spec), period)
    threads = get_settings().threads
    if threads > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            resolved = list(pool.map(partial(_resolve_cluster, spec), groups))
    else:
        resolved = [_resolve_cluster(spec, g) for g in groups]

    real, cplx = [], []
    for found, rest in resolved:
        real.extend(found)
        cplx.extend(rest)

    origin = abs(math.sin(spec.theta1) + spec.s_sign * spec.q2 * math.sin(spec.theta2)) < 1e-12 * (1.0 + spec.q2)
    located = []
    for x, m, (lo, hi) in real:
        x = x % period
        if origin and (x < _SNAP_TOL * period or period - x < _SNAP_TOL * period):
            x = 0.0
        located.append((x, m, lo, hi))
    located.sort(key=lambda r: r[0])

    entries = [ZeroEntry(k, x, m, float(abs(spec.derivative(x, 0))), lo, hi)
               for k, (x, m, lo, hi) in enumerate(located)]
    cplx = tuple(sorted((complex(v.real % period, v.imag) for v in cplx), key=lambda v: (v.real, v.imag)))
    rule = "odd" if all(t in (0.0, math.pi) for t in (spec.theta1, spec.theta2)) else "generic"

    notes: Dict[str, object] = {"scan_unmatched": _scan_check(spec, entries)}
    total = sum(e.multiplicity for e in entries) + len(cplx)
    if total != 2 * spec.p:
        notes["degree_defect"] = 2 * spec.p - total
        logger.warning(f"{spec.label}: accounted for {total} of {2 * spec.p} zeros")
    if notes["scan_unmatched"]:
        logger.warning(f"{spec.label}: {notes['scan_unmatched']} sign changes not in the zero table")
    if spec.form == "s_plus" and spec.q2 > 1:
        notes["interval_localized"] = _interval_localized(spec, tuple(e.location for e in entries))
    table = ZeroTable(spec.label, period, tuple(entries), cplx, rule, notes)
    logger.info(f"{spec.label}: K={table.count} real zeros ({len(entries)} distinct), "
                f"{len(cplx)} complex on [0, {period:.6g})")
    return table


# ---------------------------------------------------------------------------
# Omega-form algebra

_INVERSE_KIND = {FamilyKind.H: FamilyKind.ZETA, FamilyKind.GAMMA: FamilyKind.ETA,
                 FamilyKind.ZETA: FamilyKind.H, FamilyKind.ETA: FamilyKind.GAMMA}


def _drop_common(top: Tuple, bottom: Tuple) -> Tuple[Tuple, Tuple]:
    bottom = list(bottom)
    kept = []
    for d in top:
        for k, e in enumerate(bottom):
            if complex(d) == complex(e):
                bottom.pop(k)
                break
        else:
            kept.append(d)
    return tuple(kept), tuple(bottom)


def _cancel(spec: OmegaSpec) -> OmegaSpec:
    f = spec.finite
    d1, d3 = _drop_common(f.d1, f.d3)
    d2, d4 = _drop_common(f.d2, f.d4)
    return OmegaSpec(replace(f, d1=d1, d2=d2, d3=d3, d4=d4), spec.families, spec.label)


def omega_product(a: OmegaSpec, b: OmegaSpec, label: str = "") -> OmegaSpec:
    fa, fb = a.finite, b.finite
    finite = FiniteFactorSpec(complex(fa.delta0) * complex(fb.delta0), fa.A + fb.A, fa.B + fb.B,
                              fa.d1 + fb.d1, fa.d2 + fb.d2, fa.d3 + fb.d3, fa.d4 + fb.d4)
    return _cancel(OmegaSpec(finite, a.families + b.families, label))


def omega_inverse(a: OmegaSpec, label: str = "") -> OmegaSpec:
    f = a.finite
    finite = FiniteFactorSpec(1.0 / complex(f.delta0), -f.A, -f.B, f.d3, f.d4, f.d1, f.d2)
    families = tuple(SequenceFamily(_INVERSE_KIND[fam.kind], fam.count, fam.generator)
                     for fam in a.families)
    return OmegaSpec(finite, families, label or a.label)


def _scale_omega(a: OmegaSpec, factor: complex) -> OmegaSpec:
    return OmegaSpec(replace(a.finite, delta0=complex(a.finite.delta0) * factor), a.families, a.label)


@dataclass(frozen=True)
class ProductForm:
    """A coefficient as an exact Omega-form product next to its closed form."""
    omega: OmegaSpec
    direct: Callable
    truncation: int
    label: str = ""
    zero_tables: Tuple[ZeroTable, ...] = ()
    notes: Dict[str, object] = field(default_factory=dict)

    def evaluate(self, z, truncation: Optional[int] = None, extrapolate: bool = False) -> complex:
        """
        Truncated product. With extrapolate=True one Richardson step on the
        log-error, which behaves like C/N, is applied (N and N//2 terms).
        """
        n = self.truncation if truncation is None else int(truncation)
        z = complex(z)
        value = evaluate_omega(self.omega, z, n).value
        if extrapolate and not self.omega.is_finite_product and n >= 2:
            value *= np.exp(log_omega1(self.omega, z, n) - log_omega1(self.omega, z, n // 2))
        return complex(value)

    def compare(self, z, truncation: Optional[int] = None, extrapolate: bool = False) -> Dict[str, complex]:
        product = self.evaluate(z, truncation, extrapolate)
        exact = complex(self.direct(complex(z)))
        return {"z": complex(z), "product": product, "direct": exact,
                "relative_error": abs(product - exact) / max(abs(exact), 1e-300)}

    def scaled(self, factor: complex, label: Optional[str] = None) -> "ProductForm":
        base = self.direct
        return replace(self, omega=_scale_omega(self.omega, factor),
                       direct=lambda z: factor * base(z), label=label or self.label)

    def times(self, other: "ProductForm", label: str = "") -> "ProductForm":
        a, b = self.direct, other.direct
        label = label or f"({self.label})*({other.label})"
        return ProductForm(omega_product(self.omega, other.omega, label), lambda z: a(z) * b(z),
                           max(self.truncation, other.truncation), label,
                           self.zero_tables + other.zero_tables)

    def over(self, other: "ProductForm", label: str = "") -> "ProductForm":
        a, b = self.direct, other.direct
        label = label or f"({self.label})/({other.label})"
        return ProductForm(omega_product(self.omega, omega_inverse(other.omega), label),
                           lambda z: a(z) / b(z), max(self.truncation, other.truncation), label,
                           self.zero_tables + other.zero_tables)

    def relabel(self, label: str, direct: Callable) -> "ProductForm":
        return replace(self, omega=replace(self.omega, label=label), label=label, direct=direct)


def _truncation(truncation: Optional[int]) -> int:
    n = get_settings().truncation if truncation is None else int(truncation)
    if n < 1:
        raise InvalidSpec("truncation must be positive")
    return n


def _check_shift(q0: float, theta: float) -> None:
    if q0 == 0 or not math.isfinite(q0):
        raise InvalidSpec("q0 must be finite and nonzero")
    _check_range("theta", theta)
    for bad in (0.5 * math.pi, 1.5 * math.pi):
        if abs(theta - bad) < _ANGLE_TOL:
            raise ExcludedAngle(f"theta={theta} is excluded (pi/2 and 3pi/2)", theta=theta)


def _lattice(kind: FamilyKind, offsets: List[complex], step: float) -> SequenceFamily:
    offsets = [complex(o) for o in offsets]
    gen = AffinePowerGenerator(c2=step, c3=tuple(o.real for o in offsets),
                               c4=tuple(o.imag for o in offsets))
    return SequenceFamily(kind, len(offsets), gen)


# ---------------------------------------------------------------------------
# sin / cos / tan with a shift


def factorize_sin(q0: float, theta: float, sign: int = 1, truncation: Optional[int] = None) -> ProductForm:
    """sin(q0 z + sign*theta) with the (-1)^floor(theta/pi) q0 sin(theta+)/theta+ leading factor."""
    n = _truncation(truncation)
    sign = _parse_sign(sign)
    _check_shift(q0, theta)
    label = f"sin({q0:g}z{'+' if sign > 0 else '-'}{theta:g})"
    direct = partial(_sin_direct, q0, sign * theta)
    if q0 < 0:
        return factorize_sin(-q0, theta, -sign, n).scaled(-1.0).relabel(label, direct)

    red = angle_reduce(theta)
    tp = red.theta_plus
    lead = (-1) ** red.k_plus * q0 * red.sinc_plus
    step = math.pi / q0
    if sign > 0 or tp == 0.0:
        finite = FiniteFactorSpec(delta0=lead, d2=(tp / q0,))
        offsets = (-tp / q0, tp / q0)
    else:
        finite = FiniteFactorSpec(delta0=-lead, d1=(tp / q0,))
        offsets = (tp / q0, -tp / q0)
    families = (SequenceFamily(FamilyKind.H, 1, AffinePowerGenerator(c2=step, c3=offsets[0])),
                SequenceFamily(FamilyKind.GAMMA, 1, AffinePowerGenerator(c2=step, c3=offsets[1])))
    return ProductForm(OmegaSpec(finite, families, label), direct, n, label,
                       notes={"theta_plus": tp, "k_plus": red.k_plus})


def factorize_cos(q0: float, theta: float, sign: int = 1, truncation: Optional[int] = None) -> ProductForm:
    """cos(q0 z + sign*theta), zeros on the (2n-1)pi/2 lattice shifted by -+2 theta-."""
    n = _truncation(truncation)
    sign = _parse_sign(sign)
    _check_shift(q0, theta)
    label = f"cos({q0:g}z{'+' if sign > 0 else '-'}{theta:g})"
    direct = partial(_cos_direct, q0, sign * theta)
    if q0 < 0:
        return factorize_cos(-q0, theta, -sign, n).relabel(label, direct)

    red = angle_reduce(theta)
    tm = red.theta_minus
    lead = (-1) ** red.k_minus * math.cos(tm)
    step = math.pi / q0
    c_h = (-math.pi - 2.0 * sign * tm) / (2.0 * q0)
    c_g = (-math.pi + 2.0 * sign * tm) / (2.0 * q0)
    families = (SequenceFamily(FamilyKind.H, 1, AffinePowerGenerator(c2=step, c3=c_h)),
                SequenceFamily(FamilyKind.GAMMA, 1, AffinePowerGenerator(c2=step, c3=c_g)))
    return ProductForm(OmegaSpec(FiniteFactorSpec(delta0=lead), families, label), direct, n, label,
                       notes={"theta_minus": tm, "k_minus": red.k_minus})


def factorize_tan(q0: float, theta: float, sign: int = 1, truncation: Optional[int] = None) -> ProductForm:
    n = _truncation(truncation)
    sign = _parse_sign(sign)
    _check_shift(q0, theta)
    label = f"tan({q0:g}z{'+' if sign > 0 else '-'}{theta:g})"
    direct = partial(_tan_direct, q0, sign * theta)
    if q0 < 0:
        return factorize_tan(-q0, theta, -sign, n).scaled(-1.0).relabel(label, direct)
    form = factorize_sin(q0, theta, sign, n).over(factorize_cos(q0, theta, sign, n))
    return form.relabel(label, direct)


def _sin_direct(q0, shift, z):
    return np.sin(q0 * z + shift)


def _cos_direct(q0, shift, z):
    return np.cos(q0 * z + shift)


def _tan_direct(q0, shift, z):
    return np.tan(q0 * z + shift)


def _sin_any(q0: float, theta: float, sign: int, truncation: int) -> ProductForm:
    """sin(q0 z + sign*theta) for any theta in [0, 2pi); pi/2 and 3pi/2 go through cos."""
    theta = theta % TWO_PI
    for bad, flip in ((0.5 * math.pi, 1.0), (1.5 * math.pi, -1.0)):
        if abs(theta - bad) < _ANGLE_TOL:
            return factorize_cos(q0, 0.0, 1, truncation).scaled(flip * sign).relabel(
                f"sin({q0:g}z{'+' if sign > 0 else '-'}{theta:g})", partial(_sin_direct, q0, sign * theta))
    return factorize_sin(q0, theta, sign, truncation)


# ---------------------------------------------------------------------------
# S+- and tan combinations


def reflect_angles(sign: int, theta1: float, theta2: float) -> Tuple[int, int, float, float]:
    """
    S^sign(z; theta1, theta2) = outer * S^inner(z; theta1', theta2') with both
    angles in [0, pi), from sin(x - theta) = -sin(x - (theta - pi)).
    Returns (outer, inner, theta1', theta2').
    """
    s1 = -1 if theta1 >= math.pi else 1
    s2 = -1 if theta2 >= math.pi else 1
    t1 = theta1 - math.pi if s1 < 0 else theta1
    t2 = theta2 - math.pi if s2 < 0 else theta2
    return s1, sign * s1 * s2, t1, t2


def _s_omega(spec: TrigCoefficientSpec, table: ZeroTable) -> Tuple[OmegaSpec, Dict[str, object]]:
    period = table.period
    mu = table.origin_multiplicity
    nonzero = table.nonzero()
    lead = float(spec.derivative(0.0, mu)) / math.factorial(mu)
    origin = [0j] * mu
    if table.lattice_rule == "odd":
        # z_i and period - z_i pair up: h = gamma = z_i + n period
        delta0 = lead / complex(np.prod([z * z for z in nonzero]))
        finite = FiniteFactorSpec(delta0=delta0, d1=tuple(nonzero), d2=tuple(nonzero) + tuple(origin))
        h = _lattice(FamilyKind.H, nonzero + origin, period)
        g = _lattice(FamilyKind.GAMMA, nonzero + origin, period)
    else:
        delta0 = lead / complex(np.prod(nonzero))
        finite = FiniteFactorSpec(delta0=delta0, d1=tuple(nonzero), d2=tuple(origin))
        h = _lattice(FamilyKind.H, nonzero + origin, period)
        g = _lattice(FamilyKind.GAMMA, [-z for z in nonzero] + origin, period)
    families = tuple(f for f in (h, g) if f.count > 0)
    return OmegaSpec(finite, families, spec.label), {"leading": lead, "origin_multiplicity": mu}


def factorize_s(spec: TrigCoefficientSpec, truncation: Optional[int] = None) -> ProductForm:
    if not spec.is_s_form:
        raise InvalidSpec(f"factorize_s needs an S+- form, got {spec.form}")
    n = _truncation(truncation)
    outer, inner, t1, t2 = reflect_angles(spec.s_sign, spec.theta1, spec.theta2)
    reduced = replace(spec, form="s_plus" if inner > 0 else "s_minus", theta1=t1, theta2=t2)
    table = find_zeros(reduced)
    omega, notes = _s_omega(reduced, table)
    if table.lattice_rule == "odd":
        display = "odd"
    elif table.origin_multiplicity:
        display = "origin"
    else:
        display = "generic"
    notes.update(display=display, reflection=(outer, inner))
    if table.complex_zeros:
        logger.warning(f"{spec.label}: {len(table.complex_zeros)} complex zeros enter the product")
    form = ProductForm(omega, reduced.direct, n, reduced.label, (table,), notes)
    if outer < 0:
        form = form.scaled(-1.0)
    return form.relabel(spec.label, spec.direct)


def factorize_tan_combo(spec: TrigCoefficientSpec, truncation: Optional[int] = None) -> ProductForm:
    """
    tan a + s q3 tan b = N / (cos a cos b), a = w1 z - theta1, b = w2 z - theta2,
    N = [(1 + s q3) sin(a + b) + (1 - s q3) sin(a - b)] / 2.
    """
    if spec.form != "tan_combo":
        raise InvalidSpec(f"factorize_tan_combo needs a tan_combo form, got {spec.form}")
    n = _truncation(truncation)
    s, q3 = spec.sign, spec.q3
    w1, w2, t1, t2 = spec.omega1, spec.omega2, spec.theta1, spec.theta2
    den = factorize_cos(w1, t1, -1, n).times(factorize_cos(w2, t2, -1, n))

    if q3 == 1.0:
        if s < 0:
            rate, angle = w2 - w1, (t2 - t1) % TWO_PI
            if rate == 0.0:
                if angle == 0.0:
                    raise InvalidSpec(f"{spec.label} vanishes identically")
                value = math.sin(t2 - t1)
                num = ProductForm(OmegaSpec(FiniteFactorSpec(delta0=value)), lambda z: value, n, "const")
            else:
                num = _sin_any(rate, angle, -1, n).scaled(-1.0)
        else:
            rate, angle = w1 + w2, (t1 + t2) % TWO_PI
            if rate == 0.0:
                raise InvalidSpec("omega1 + omega2 must be nonzero")
            num = _sin_any(rate, angle, -1, n)
        notes: Dict[str, object] = {"branch": "q3=1"}
    else:
        if not (w1 > 0 and w2 > w1):
            raise InvalidSpec("q3 != 1 needs 0 < omega1 < omega2")
        q1 = (w1 + w2) / (w2 - w1)
        frac = Fraction(q1).limit_denominator(_MAX_DENOMINATOR)
        if abs(float(frac) - q1) > 1e-12 * q1:
            raise InvalidSpec(f"(omega1+omega2)/(omega2-omega1)={q1:.15g} is not a rational p/(2q)")
        a, b = frac.numerator, frac.denominator
        p, q = (a, b // 2) if b % 2 == 0 else (2 * a, b)
        r = (1.0 + s * q3) / (1.0 - s * q3)
        inner = TrigCoefficientSpec(form="s_minus" if r > 0 else "s_plus",
                                    theta1=(t2 - t1) % TWO_PI, theta2=(t1 + t2) % TWO_PI,
                                    p=p, q=q, q2=abs(r))
        core = factorize_s(inner, n).scaled(-0.5 * (1.0 - s * q3))
        rate = w2 - w1
        omega = substitute_affine(core.omega, 0.0, rate, n)
        inner_direct = core.direct
        num = ProductForm(omega, lambda z: inner_direct(rate * z), n, core.label, core.zero_tables,
                          dict(core.notes))
        notes = {"branch": inner.form, "q1": q1, "q2": abs(r), "p": p, "q": q}

    form = num.over(den).relabel(spec.label, spec.direct)
    form.notes.update(notes)
    return form


def quotient(numerator: ProductForm, denominator: ProductForm) -> ProductForm:
    return numerator.over(denominator)


def factorize(spec: TrigCoefficientSpec, truncation: Optional[int] = None) -> ProductForm:
    """Dispatch on the coefficient form."""
    if spec.form == "sin_shift":
        return factorize_sin(spec.q0, spec.theta, spec.sign, truncation)
    if spec.form == "cos_shift":
        return factorize_cos(spec.q0, spec.theta, spec.sign, truncation)
    if spec.form == "tan_shift":
        return factorize_tan(spec.q0, spec.theta, spec.sign, truncation)
    if spec.is_s_form:
        return factorize_s(spec, truncation)
    if spec.form == "tan_combo":
        return factorize_tan_combo(spec, truncation)
    form = quotient(factorize(spec.numerator, truncation), factorize(spec.denominator, truncation))
    return form.relabel(spec.label, spec.direct)


# ---------------------------------------------------------------------------
# conversion for the solver


@dataclass(frozen=True)
class ConversionResult:
    omega: OmegaSpec
    delta0_star: complex
    B_star: complex
    report: ValidationReport
    notes: Dict[str, object]

    def to_dict(self) -> dict:
        return {"delta0_star": [self.delta0_star.real, self.delta0_star.imag],
                "B_star": [self.B_star.real, self.B_star.imag],
                "report": self.report.to_dict(), "notes": self.notes}


def _coefficient_class(omega: OmegaSpec) -> str:
    f = omega.finite
    top = bool(f.d1 or f.d2 or omega.family(FamilyKind.H) or omega.family(FamilyKind.GAMMA))
    bottom = bool(f.d3 or f.d4 or omega.family(FamilyKind.ZETA) or omega.family(FamilyKind.ETA))
    if top and bottom:
        return "FTK"
    return "FSK" if bottom else "FFK"


def to_omega(product: ProductForm, beta: float = 1.0, samples: int = 20) -> ConversionResult:
    """
    The Omega form of a factorized coefficient for the step-beta equation.
    delta0_star carries the beta^(mu2 - mu1) of the origin zeros (mu1) and
    origin poles (mu2); the products here carry no exponential factor.
    """
    if beta == 0:
        raise IncompatibleParams("beta must be nonzero")
    omega = product.omega
    f = omega.finite
    mu1 = sum(1 for d in f.d2 if complex(d) == 0)
    mu2 = sum(1 for d in f.d4 if complex(d) == 0)
    delta0_star = complex(f.delta0) * beta ** (mu2 - mu1)

    report = validate_hypotheses(omega, EquationParams(beta=beta))
    summability = [c.clause for c in report.failed() if c.clause.startswith("summability")]
    if summability:
        raise SummabilityFailure(f"{product.label}: {', '.join(summability)} failed", clauses=summability)
    if not report.passed:
        failed = [c.clause for c in report.failed()]
        logger.warning(f"{product.label}: Omega form fails {', '.join(failed)}")

    phi = TWO_PI * np.arange(samples) / samples
    worst = 0.0
    for z in 0.05 + 0.05j + 0.3 * np.exp(1j * phi):
        exact = complex(product.direct(complex(z)))
        if abs(exact) < 1e-8:
            continue
        worst = max(worst, abs(product.evaluate(z) - exact) / abs(exact))
    notes = {"mu1": mu1, "mu2": mu2, "class": _coefficient_class(omega),
             "families": len(omega.families), "hypotheses_passed": report.passed,
             "sample_max_relative_error": worst}
    logger.info(f"{product.label}: delta0*={delta0_star:.6g}, class {notes['class']}, "
                f"sample error {worst:.2e}")
    return ConversionResult(omega, delta0_star, complex(f.B), report, notes)


# ---------------------------------------------------------------------------
# kernel / plug-in catalog


@dataclass(frozen=True)
class ProblemClass:
    """
    forcing: "bounded" (F tends to a constant) or "decaying" (exponentially).
    star_zeros: zeros of S+(z; 0, 0, q1, q2*), zeros: zeros of S+(z; theta1, theta2, q1, q2).
    """
    forcing: str
    plugin: str
    d: float
    d0: float = 0.5
    star_zeros: Optional[ZeroTable] = None
    zeros: Optional[ZeroTable] = None
    theta2: float = 0.0
    eps: float = math.pi / 200.0


@dataclass(frozen=True)
class CatalogEntry:
    kernel: KernelSpec
    plugin: PeriodicPlugin
    row: str
    notes: Dict[str, object]


def plugin_II(star_zeros: ZeroTable) -> PeriodicPlugin:
    """prod_{i=1}^{K*-1} sin pi(z*_i - w + 1) exp(i pi (z*_i - w + 1))."""
    roots = np.array(star_zeros.locations[1:], dtype=float)

    def log_p(w):
        arg = roots - w + 1.0
        return complex(np.sum(log_sin(math.pi * arg) + 1j * math.pi * arg))

    return PeriodicPlugin(lambda w: np.exp(log_p(w)), "P_II", log_p,
                          zero_offsets=tuple(float(r % 1.0) for r in roots))


def plugin_III(star_zeros: ZeroTable, zeros: ZeroTable) -> PeriodicPlugin:
    """P_II over prod_{i=1}^{K-1} sin pi(z_i - w + 1) exp(i pi (z_i + 1)) * sin(pi w)."""
    upper = plugin_II(star_zeros)
    poles = np.array(zeros.locations[1:], dtype=float)
    if zeros.count % 2:
        logger.warning(f"P_III with odd K={zeros.count} is not 1-periodic")

    def log_p(w):
        arg = poles - w + 1.0
        below = np.sum(log_sin(math.pi * arg) + 1j * math.pi * (poles + 1.0)) + log_sin(math.pi * w)
        return upper.log(w) - complex(below)

    return PeriodicPlugin(lambda w: np.exp(log_p(w)), "P_III", log_p,
                          zero_offsets=upper.zero_offsets,
                          pole_offsets=tuple(float(r % 1.0) for r in poles) + (0.0,))


def kernel_catalog(pc: ProblemClass) -> CatalogEntry:
    """Matched (K1, P) pair for a forcing class and plug-in kind."""
    if pc.forcing not in ("bounded", "decaying"):
        raise UnknownClass(f"unknown forcing class {pc.forcing!r}")
    if pc.plugin not in ("I", "II", "III"):
        raise UnknownClass(f"unknown plug-in kind {pc.plugin!r}")
    if not 0.0 < pc.d - pc.d0 < 1.0:
        raise KernelInvalid(f"need 0 < d - d0 < 1, got d={pc.d}, d0={pc.d0}")
    notes: Dict[str, object] = {"d_minus_d0": pc.d - pc.d0}

    if pc.plugin == "I":
        plugin = PeriodicPlugin.constant(1.0)
        k_star = None
    else:
        if pc.star_zeros is None or (pc.plugin == "III" and pc.zeros is None):
            raise UnknownClass(f"plug-in {pc.plugin} needs its zero tables")
        k_star = pc.star_zeros.count
        notes["K_star"] = k_star
        plugin = plugin_II(pc.star_zeros) if pc.plugin == "II" else plugin_III(pc.star_zeros, pc.zeros)

    if pc.forcing == "bounded":
        if pc.plugin == "I":
            kernel = sin_power_kernel(pc.d, 2)
        elif pc.plugin == "II":
            margin = math.pi * (2.5 - 2 * k_star) - pc.theta2 - pc.eps
            notes["margin"] = margin
            kernel = sin_power_kernel(pc.d, 2 if margin > 0 else 2 * k_star)
        else:
            kernel = sin_power_kernel(pc.d, 4)
    else:
        kernel = constant_kernel(1.0) if pc.plugin in ("I", "II") else sin_power_kernel(pc.d, 2)
    # solve_particular refuses these: the residue at the strip pole adds to F
    notes["strip_pole"] = bool(kernel.poles_between(-pc.d0, 1.0 - pc.d0))
    row = f"{pc.forcing}/P_{pc.plugin}"
    logger.info(f"kernel catalog {row}: {kernel.label}, plug-in {plugin.label}")
    return CatalogEntry(kernel, plugin, row, notes)


# ---------------------------------------------------------------------------
# hyperbolic forms by rotation


@dataclass(frozen=True)
class HyperbolicForm:
    kind: str
    q0: float
    base: ProductForm

    def evaluate(self, z, truncation: Optional[int] = None) -> complex:
        v = self.base.evaluate(1j * complex(z), truncation)
        return {"sinh": -1j * v, "cosh": v, "tanh": -1j * v, "coth": 1j * v}[self.kind]

    def direct(self, z) -> complex:
        x = self.q0 * complex(z)
        if self.kind == "coth":
            return complex(1.0 / np.tanh(x))
        return complex(getattr(np, self.kind)(x))


def hyperbolic(kind: str, q0: float = 1.0, truncation: Optional[int] = None) -> HyperbolicForm:
    """sinh(x) = -i sin(ix), cosh(x) = cos(ix), tanh(x) = -i tan(ix), coth(x) = i cot(ix)."""
    if kind == "sinh":
        base = factorize_sin(q0, 0.0, 1, truncation)
    elif kind == "cosh":
        base = factorize_cos(q0, 0.0, 1, truncation)
    elif kind == "tanh":
        base = factorize_tan(q0, 0.0, 1, truncation)
    elif kind == "coth":
        base = factorize_cos(q0, 0.0, 1, truncation).over(factorize_sin(q0, 0.0, 1, truncation))
    else:
        raise UnknownClass(f"unknown hyperbolic form {kind!r}")
    return HyperbolicForm(kind, q0, base)
