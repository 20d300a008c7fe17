"""
The coefficient Omega(z) of the difference equation

    (a1*sigma + a2*sigma**nu) Y(z+beta) - Omega(z) Y(z) = F(z, sigma)

with Omega(z) = delta0 * exp(A z^2 + B z) * finite rational factor * Omega1(z),
where Omega1 is a normalized infinite product over four sequence families:

    h     (h_n - z)/h_n        numerator
    gamma (gamma_n + z)/gamma_n numerator
    zeta  zeta_n/(zeta_n - z)   denominator
    eta   eta_n/(eta_n + z)     denominator
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np

from fde.config import get_settings
from fde.errors import InvalidSpec, PoleProximity, TruncationTooSmall
from fde.reports import ValidationReport
from fde.specfun import principal_power

logger = logging.getLogger(__name__)

CHUNK = 4096
BORDERLINE_RATIO = 0.9
DIVERGENT_RATIO = 0.97


class FamilyKind(str, Enum):
    H = "h"
    GAMMA = "gamma"
    ZETA = "zeta"
    ETA = "eta"

    @property
    def in_numerator(self) -> bool:
        return self in (FamilyKind.H, FamilyKind.GAMMA)

    @property
    def reflected(self) -> bool:
        """True when the factor vanishes at z = +a (h, zeta), False for z = -a."""
        return self in (FamilyKind.H, FamilyKind.ZETA)

    def swapped(self) -> "FamilyKind":
        return {FamilyKind.H: FamilyKind.GAMMA, FamilyKind.GAMMA: FamilyKind.H,
                FamilyKind.ZETA: FamilyKind.ETA, FamilyKind.ETA: FamilyKind.ZETA}[self]


def _per_index(value, count: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(count, float(arr[0]))
    if arr.size != count:
        raise InvalidSpec(f"coefficient list has {arr.size} entries, family count is {count}")
    return arr


@dataclass(frozen=True)
class AffinePowerGenerator:
    """
    a_{i,n} = c1*n**p + c2*n + c3 + 1j*c4, coefficients given per index i
    (a scalar applies to every i).
    """
    c1: Union[float, Tuple[float, ...]] = 0.0
    p: Union[float, Tuple[float, ...]] = 1.0
    c2: Union[float, Tuple[float, ...]] = 0.0
    c3: Union[float, Tuple[float, ...]] = 0.0
    c4: Union[float, Tuple[float, ...]] = 0.0

    def coefficients(self, count: int) -> dict:
        return {name: _per_index(getattr(self, name), count)
                for name in ("c1", "p", "c2", "c3", "c4")}

    def __call__(self, i: int, n: np.ndarray) -> np.ndarray:
        k = i - 1
        c = {name: np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
             for name in ("c1", "p", "c2", "c3", "c4")}
        pick = {name: (v[0] if v.size == 1 else v[k]) for name, v in c.items()}
        n = np.asarray(n, dtype=float)
        return (pick["c1"] * n ** pick["p"] + pick["c2"] * n + pick["c3"]
                + 1j * pick["c4"]).astype(complex)

    def affine_parts(self, i: int) -> Optional[Tuple[float, complex]]:
        """(slope, intercept) when a_{i,n} is affine in n, else None."""
        k = i - 1
        c = {name: np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
             for name in ("c1", "p", "c2", "c3", "c4")}
        pick = {name: float(v[0] if v.size == 1 else v[k]) for name, v in c.items()}
        if pick["c1"] == 0.0 or pick["p"] == 0.0:
            return pick["c2"], complex(pick["c3"] + pick["c1"] * (pick["p"] == 0.0), pick["c4"])
        if pick["p"] == 1.0:
            return pick["c1"] + pick["c2"], complex(pick["c3"], pick["c4"])
        return None

    def scaled(self, factor: float) -> "AffinePowerGenerator":
        def mul(v):
            if isinstance(v, tuple):
                return tuple(x * factor for x in v)
            return v * factor
        return AffinePowerGenerator(mul(self.c1), self.p, mul(self.c2), mul(self.c3), mul(self.c4))

    def shifted(self, offset: complex, factor: float) -> "AffinePowerGenerator":
        """Generator of (a_{i,n} + offset) * factor."""
        offset = complex(offset)

        def mul(v):
            if isinstance(v, tuple):
                return tuple(x * factor for x in v)
            return v * factor

        def move(v, by):
            if isinstance(v, tuple):
                return tuple((x + by) * factor for x in v)
            return (v + by) * factor
        return AffinePowerGenerator(mul(self.c1), self.p, mul(self.c2),
                                    move(self.c3, offset.real), move(self.c4, offset.imag))

    def to_dict(self) -> dict:
        def plain(v):
            return list(v) if isinstance(v, tuple) else v
        return {"form": "affine-power",
                "coeffs": {name: plain(getattr(self, name)) for name in ("c1", "p", "c2", "c3", "c4")}}

    @classmethod
    def from_dict(cls, data: dict) -> "AffinePowerGenerator":
        if data.get("form", "affine-power") != "affine-power":
            raise InvalidSpec(f"unsupported generator form {data.get('form')!r}")
        coeffs = data.get("coeffs", {})
        unknown = set(coeffs) - {"c1", "p", "c2", "c3", "c4"}
        if unknown:
            raise InvalidSpec(f"unknown generator coefficients {sorted(unknown)}")

        def norm(v, default):
            if v is None:
                return default
            return tuple(float(x) for x in v) if isinstance(v, (list, tuple)) else float(v)
        return cls(norm(coeffs.get("c1"), 0.0), norm(coeffs.get("p"), 1.0),
                   norm(coeffs.get("c2"), 0.0), norm(coeffs.get("c3"), 0.0),
                   norm(coeffs.get("c4"), 0.0))


@dataclass(frozen=True)
class ScaledGenerator:
    base: Callable
    factor: float

    def __call__(self, i: int, n: np.ndarray) -> np.ndarray:
        return np.asarray(self.base(i, n), dtype=complex) * self.factor

    def affine_parts(self, i: int):
        parts = getattr(self.base, "affine_parts", lambda _i: None)(i)
        if parts is None:
            return None
        return parts[0] * self.factor, parts[1] * self.factor


@dataclass(frozen=True)
class ShiftedGenerator:
    base: Callable
    offset: complex
    factor: float

    def __call__(self, i: int, n: np.ndarray) -> np.ndarray:
        return (np.asarray(self.base(i, n), dtype=complex) + self.offset) * self.factor

    def affine_parts(self, i: int):
        parts = getattr(self.base, "affine_parts", lambda _i: None)(i)
        if parts is None:
            return None
        return parts[0] * self.factor, (parts[1] + self.offset) * self.factor


@dataclass(frozen=True)
class SequenceFamily:
    kind: FamilyKind
    count: int
    generator: Callable

    def values(self, n) -> np.ndarray:
        """Array of shape (count, len(n))."""
        n = np.atleast_1d(np.asarray(n, dtype=float))
        if self.count == 0:
            return np.zeros((0, n.size), dtype=complex)
        return np.vstack([np.asarray(self.generator(i, n), dtype=complex).reshape(-1)
                          for i in range(1, self.count + 1)])

    def affine_parts(self, i: int):
        fn = getattr(self.generator, "affine_parts", None)
        return fn(i) if fn else None

    def to_dict(self) -> dict:
        gen = self.generator.to_dict() if hasattr(self.generator, "to_dict") else {"form": "callable"}
        return {"kind": self.kind.value, "count": self.count, "generator": gen}


@dataclass(frozen=True)
class FiniteFactorSpec:
    delta0: complex = 1.0
    A: complex = 0.0
    B: complex = 0.0
    d1: Tuple[complex, ...] = ()
    d2: Tuple[complex, ...] = ()
    d3: Tuple[complex, ...] = ()
    d4: Tuple[complex, ...] = ()

    @property
    def degree(self) -> int:
        """M1 + M2 - M3 - M4."""
        return len(self.d1) + len(self.d2) - len(self.d3) - len(self.d4)

    def value(self, z: complex) -> complex:
        z = complex(z)
        num = np.prod([d - z for d in self.d1]) * np.prod([d + z for d in self.d2])
        den = np.prod([d - z for d in self.d3]) * np.prod([d + z for d in self.d4])
        return complex(self.delta0 * np.exp(self.A * z * z + self.B * z) * num / den)


@dataclass(frozen=True)
class OmegaSpec:
    finite: FiniteFactorSpec
    families: Tuple[SequenceFamily, ...] = ()
    label: str = ""

    @property
    def is_finite_product(self) -> bool:
        return all(f.count == 0 for f in self.families)

    def family(self, kind: FamilyKind) -> Tuple[SequenceFamily, ...]:
        return tuple(f for f in self.families if f.kind == kind and f.count > 0)

    @property
    def is_complex(self) -> bool:
        deltas = self.finite.d1 + self.finite.d2 + self.finite.d3 + self.finite.d4
        if any(complex(d).imag != 0 for d in deltas):
            return True
        head = np.arange(1, 33)
        return any(np.any(f.values(head).imag != 0) for f in self.families)


@dataclass(frozen=True)
class EquationParams:
    a1: float = 1.0
    a2: float = 0.0
    nu: float = 0.5
    beta: float = 1.0

    def c(self, sigma) -> complex:
        """a1*sigma + a2*sigma**nu with the principal power."""
        sigma = complex(sigma)
        value = self.a1 * sigma
        if self.a2 != 0:
            if sigma == 0:
                return complex(value)
            value = value + self.a2 * principal_power(sigma, self.nu)
        return complex(value)


@dataclass(frozen=True)
class OmegaValue:
    value: complex
    tail_estimate: float


def _block_tail(terms: np.ndarray) -> Tuple[float, float, float]:
    """Partial sum, dyadic block ratio and geometric tail estimate of a positive series."""
    total = float(terms.sum())
    n = terms.size
    q, h = n // 4, n // 2
    b1 = float(terms[q:h].sum())
    b2 = float(terms[h:].sum())
    if b2 == 0.0:
        return total, 0.0, 0.0
    if b1 == 0.0:
        return total, np.inf, np.inf
    r = b2 / b1
    if r >= 1.0:
        return total, r, np.inf
    return total, r, b2 * r / (1.0 - r)


def _hat(values: np.ndarray) -> np.ndarray:
    """Comparison quantity of the complex-sequence summability test."""
    im = values.imag
    constant = np.all(np.isclose(im, im[:, :1]), axis=1, keepdims=True)
    hatted = np.where(im > 0, np.minimum(values.real, im), values.real)
    return np.where(constant, values.real, hatted)


def _series_terms(spec: OmegaSpec, n: np.ndarray, complex_mode: bool):
    squares = np.zeros(n.size)
    signed = np.zeros(n.size, dtype=complex)
    for fam in spec.families:
        if fam.count == 0:
            continue
        vals = fam.values(n)
        base = _hat(vals) if complex_mode else vals.real
        with np.errstate(divide="ignore"):
            squares += np.sum(1.0 / np.abs(base) ** 2, axis=0)
        sign = 1.0 if fam.kind in (FamilyKind.H, FamilyKind.ETA) else -1.0
        signed += sign * np.sum(1.0 / vals, axis=0)
    return squares, np.abs(signed)


def validate_hypotheses(spec: OmegaSpec, params: EquationParams, scan_depth: int = 4096,
                        sigma: complex = 1.0, ceiling: Optional[float] = None) -> ValidationReport:
    if scan_depth < 10:
        raise InvalidSpec("scan_depth must be at least 10")
    ceiling = get_settings().h2_ceiling if ceiling is None else ceiling
    report = ValidationReport(subject=spec.label or "omega")
    complex_mode = spec.is_complex
    report.notes["mode"] = "complex" if complex_mode else "real"

    ok = (params.a1 >= 0 and params.a2 >= 0 and params.a1 + params.a2 > 0
          and 0 < params.nu < 1 and params.beta != 0 and complex(sigma).real >= 0)
    report.add("parameters", ok,
               f"a1={params.a1}, a2={params.a2}, nu={params.nu}, beta={params.beta}, sigma={sigma}")
    report.add("delta0_nonzero", complex(spec.finite.delta0) != 0, f"delta0={spec.finite.delta0}")
    report.add("delta1_nonzero", all(complex(d) != 0 for d in spec.finite.d1), "H3: delta1_i != 0")
    report.add("delta3_nonzero", all(complex(d) != 0 for d in spec.finite.d3), "H3: delta3_i != 0")
    if not complex_mode:
        deltas = spec.finite.d1 + spec.finite.d2 + spec.finite.d3 + spec.finite.d4
        report.add("deltas_real", all(complex(d).imag == 0 for d in deltas), "H3 real mode")

    if spec.is_finite_product:
        report.notes["finite_product"] = True
        return report

    n = np.arange(1, scan_depth + 1, dtype=float)
    for fam in spec.families:
        vals = fam.values(n)
        for i in range(fam.count):
            row = vals[i]
            if complex_mode:
                good = bool(np.all(row.real > 0) and np.all(np.diff(row.real) > 0)
                            and np.all(row.imag >= 0) and np.all(np.diff(row.imag) >= 0))
                detail = "Re positive increasing, Im nonnegative nondecreasing"
            else:
                good = bool(np.all(row.real > 0) and np.all(np.diff(row.real) > 0)
                            and np.all(row.imag == 0))
                detail = "positive and strictly increasing"
            report.add(f"monotone[{fam.kind.value}#{i + 1}]", good, detail, row.real[0])

    squares, reciprocals = _series_terms(spec, n, complex_mode)
    for name, terms in (("summability_squares", squares), ("summability_reciprocals", reciprocals)):
        if not np.all(np.isfinite(terms)):
            report.add(name, False, "non-finite series term (zero sequence value)")
            continue
        partial, ratio, tail = _block_tail(terms)
        total = partial + tail
        diverging = ratio >= DIVERGENT_RATIO or not np.isfinite(total) or total > ceiling
        borderline = not diverging and ratio > BORDERLINE_RATIO
        if borderline:
            logger.warning(f"{name}: block ratio {ratio:.3f} is close to divergence")
        report.add(name, not diverging,
                   f"partial={partial:.6g}, block_ratio={ratio:.4f}, tail={tail:.3g}",
                   total if np.isfinite(total) else None, borderline=borderline)
        report.notes[f"{name}_tail"] = float(tail) if np.isfinite(tail) else None
    return report


def _family_tails(spec: OmegaSpec, truncation: int) -> Tuple[float, float]:
    lo = max(1, truncation // 4)
    n = np.arange(lo, truncation + 1, dtype=float)
    squares, reciprocals = _series_terms(spec, n, spec.is_complex)
    # re-index so the dyadic blocks line up with (N/4, N/2] and (N/2, N]
    pad = np.concatenate([np.zeros(lo - 1), squares])
    pad_r = np.concatenate([np.zeros(lo - 1), reciprocals])
    _, _, t1 = _block_tail(pad)
    _, _, t2 = _block_tail(pad_r)
    return t1, t2


def _check_denominator(spec: OmegaSpec, z: complex, truncation: int, tol: float) -> None:
    f = spec.finite
    for d in f.d3:
        if abs(z - d) < tol:
            raise PoleProximity(f"z={z} hits the finite pole delta3={d}")
    for d in f.d4:
        if abs(z + d) < tol:
            raise PoleProximity(f"z={z} hits the finite pole -delta4={-d}")
    for fam in spec.family(FamilyKind.ZETA) + spec.family(FamilyKind.ETA):
        sign = 1.0 if fam.kind == FamilyKind.ZETA else -1.0
        # increasing sequences: only values up to |z|+1 can collide
        for start in range(1, truncation + 1, CHUNK):
            n = np.arange(start, min(start + CHUNK, truncation + 1), dtype=float)
            vals = fam.values(n)
            if np.any(np.abs(sign * vals - z) < tol):
                raise PoleProximity(f"z={z} hits a {fam.kind.value} pole of Omega")
            if np.all(vals.real > abs(z) + 1.0):
                break


def log_omega1(spec: OmegaSpec, z: complex, truncation: int) -> complex:
    """Sum of log-factors of the first `truncation` normalized factors of Omega1."""
    total = 0j
    for start in range(1, truncation + 1, CHUNK):
        n = np.arange(start, min(start + CHUNK, truncation + 1), dtype=float)
        for fam in spec.families:
            if fam.count == 0:
                continue
            a = fam.values(n)
            if fam.kind == FamilyKind.H:
                total += np.sum(np.log1p(-z / a))
            elif fam.kind == FamilyKind.GAMMA:
                total += np.sum(np.log1p(z / a))
            elif fam.kind == FamilyKind.ZETA:
                total -= np.sum(np.log1p(-z / a))
            else:
                total -= np.sum(np.log1p(z / a))
    return complex(total)


def evaluate_omega(spec: OmegaSpec, z, truncation: Optional[int] = None,
                   tol: Optional[float] = None) -> OmegaValue:
    settings = get_settings()
    truncation = settings.truncation if truncation is None else int(truncation)
    z = complex(z)
    _check_denominator(spec, z, truncation, settings.tol_pole)
    finite = spec.finite.value(z)
    if spec.is_finite_product:
        return OmegaValue(finite, 0.0)
    value = finite * np.exp(log_omega1(spec, z, truncation))
    t1, t2 = _family_tails(spec, truncation)
    log_tail = abs(z) * t2 + 1.5 * abs(z) ** 2 * t1
    error = abs(value) * float(np.expm1(log_tail)) if np.isfinite(log_tail) else np.inf
    if tol is not None and error > tol * abs(value):
        raise TruncationTooSmall(
            f"truncation {truncation} leaves error {error:.3g} above {tol:g}*|Omega|",
            truncation=truncation)
    return OmegaValue(complex(value), float(error))


def rescale_to_unit_step(spec: OmegaSpec, params: EquationParams) -> Tuple[OmegaSpec, EquationParams]:
    """
    Change of variable y = z/beta. With beta < 0 a factor (h - z) becomes
    |beta|(h/|beta| + y), so h and gamma (and zeta and eta) trade places.
    """
    beta = params.beta
    if beta == 1.0:
        return spec, params
    f = spec.finite
    finite = FiniteFactorSpec(
        delta0=complex(f.delta0) * complex(beta) ** f.degree,
        A=f.A * beta ** 2,
        B=f.B * beta,
        d1=tuple(d / beta for d in f.d1),
        d2=tuple(d / beta for d in f.d2),
        d3=tuple(d / beta for d in f.d3),
        d4=tuple(d / beta for d in f.d4),
    )
    scale = 1.0 / abs(beta)
    families = []
    for fam in spec.families:
        gen = fam.generator
        gen = gen.scaled(scale) if isinstance(gen, AffinePowerGenerator) else ScaledGenerator(gen, scale)
        kind = fam.kind.swapped() if beta < 0 else fam.kind
        families.append(SequenceFamily(kind, fam.count, gen))
    return (OmegaSpec(finite, tuple(families), spec.label),
            replace(params, beta=1.0))


def substitute_affine(spec: OmegaSpec, shift: complex, scale: float,
                      truncation: Optional[int] = None) -> OmegaSpec:
    """
    Omega'(r) = Omega(shift + scale*r) as a new Omega form.

    Each normalized family factor picks up the constant (h - shift)/h (or
    its gamma/zeta/eta analogue); the product of those constants is
    Omega1(shift), folded into delta0 at the given truncation. scale < 0
    trades h with gamma and zeta with eta.
    """
    if scale == 0 or not np.isfinite(scale):
        raise InvalidSpec(f"scale={scale} must be finite and nonzero")
    truncation = get_settings().truncation if truncation is None else int(truncation)
    shift = complex(shift)
    k = float(scale)
    f = spec.finite
    delta0 = complex(f.delta0) * k ** f.degree * np.exp(f.A * shift ** 2 + f.B * shift)
    if shift != 0 and not spec.is_finite_product:
        delta0 *= np.exp(log_omega1(spec, shift, truncation))
    finite = FiniteFactorSpec(
        delta0=complex(delta0),
        A=f.A * k * k,
        B=(2.0 * f.A * shift + f.B) * k,
        d1=tuple((complex(d) - shift) / k for d in f.d1),
        d2=tuple((complex(d) + shift) / k for d in f.d2),
        d3=tuple((complex(d) - shift) / k for d in f.d3),
        d4=tuple((complex(d) + shift) / k for d in f.d4),
    )
    factor = 1.0 / abs(k)
    families = []
    for fam in spec.families:
        offset = -shift if fam.kind.reflected else shift
        gen = fam.generator
        if isinstance(gen, AffinePowerGenerator):
            gen = gen.shifted(offset, factor)
        else:
            gen = ShiftedGenerator(gen, offset, factor)
        kind = fam.kind.swapped() if k < 0 else fam.kind
        families.append(SequenceFamily(kind, fam.count, gen))
    return OmegaSpec(finite, tuple(families), spec.label)


def omega_from_dict(data: dict) -> OmegaSpec:
    """Build an OmegaSpec from its JSON form."""
    def cplx(v, default=0.0):
        if v is None:
            return complex(default)
        if isinstance(v, (list, tuple)):
            if len(v) != 2:
                raise InvalidSpec(f"complex value must be [re, im], got {v!r}")
            return complex(float(v[0]), float(v[1]))
        return complex(float(v))

    deltas = data.get("deltas", {}) or {}
    finite = FiniteFactorSpec(
        delta0=cplx(data.get("delta0"), 1.0),
        A=cplx(data.get("A")),
        B=cplx(data.get("B")),
        d1=tuple(cplx(v) for v in deltas.get("d1", [])),
        d2=tuple(cplx(v) for v in deltas.get("d2", [])),
        d3=tuple(cplx(v) for v in deltas.get("d3", [])),
        d4=tuple(cplx(v) for v in deltas.get("d4", [])),
    )
    families = []
    if not data.get("finite", False):
        for entry in data.get("families", []) or []:
            try:
                kind = FamilyKind(entry["kind"])
            except (KeyError, ValueError) as e:
                raise InvalidSpec(f"bad family kind in {entry!r}") from e
            count = int(entry.get("count", 1))
            if count < 0:
                raise InvalidSpec("family count must be nonnegative")
            families.append(SequenceFamily(kind, count,
                                           AffinePowerGenerator.from_dict(entry.get("generator", {}))))
    return OmegaSpec(finite, tuple(families), data.get("label", ""))


def omega_to_dict(spec: OmegaSpec) -> dict:
    def pair(v):
        v = complex(v)
        return [v.real, v.imag]
    f = spec.finite
    return {
        "delta0": pair(f.delta0), "A": pair(f.A), "B": pair(f.B),
        "deltas": {k: [pair(v) for v in getattr(f, k)] for k in ("d1", "d2", "d3", "d4")},
        "families": [fam.to_dict() for fam in spec.families],
        "finite": spec.is_finite_product,
    }


def params_from_dict(data: dict) -> EquationParams:
    return EquationParams(a1=float(data.get("a1", 1.0)), a2=float(data.get("a2", 0.0)),
                          nu=float(data.get("nu", 0.5)), beta=float(data.get("beta", 1.0)))
