"""
General solution of the homogeneous equation

    c(sigma) Y(z+beta) - Omega(z) Y(z) = 0,   c(sigma) = a1*sigma + a2*sigma**nu

Every quantity is computed on the rescaled problem y = z/beta (unit step), in
log space. The solution is

    Y_h(y) = exp{E(y)} * (delta0/c)^(y-1/2) * P(y) * L(y)

with E(y) = A y^3/3 + (B-A) y^2/2 + (A-3B) y/6, P a 1-periodic plug-in and
L(y) a finite Gamma ratio times a regularized infinite Gamma product whose
n-th factor is normalized by the Stirling leading term, so the partial
products converge and telescope against Omega truncated at the same depth.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from fde.coefficient import (CHUNK, EquationParams, FamilyKind, OmegaSpec, SequenceFamily,
                             _block_tail, evaluate_omega, log_omega1, rescale_to_unit_step,
                             validate_hypotheses)
from fde.config import get_settings
from fde.errors import (IncompatibleParams, InvalidHypotheses, OutOfRange, PoleProximity,
                        RegionViolation, SummabilityFailure)
from fde.reports import ValidationReport
from fde.specfun import log_gamma, principal_log

logger = logging.getLogger(__name__)

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_SERIES_TERMS = 30
_SERIES_RATIO = 4.0
_SERIES_MIN = 20.0
_BERNOULLI = special.bernoulli(_SERIES_TERMS + 1)


# ---------------------------------------------------------------------------
# periodic plug-ins


@dataclass(frozen=True)
class PeriodicPlugin:
    """
    An analytic function of period 1 in w = z/beta.

    zero_offsets / pole_offsets list the real parts (mod 1) of its zero and
    pole lines; the region checks use them.
    """
    evaluator: Callable[[complex], complex]
    label: str = "P"
    log_evaluator: Optional[Callable[[complex], complex]] = None
    zero_offsets: Tuple[float, ...] = ()
    pole_offsets: Tuple[float, ...] = ()
    is_zero: bool = False

    @classmethod
    def constant(cls, value: complex = 1.0) -> "PeriodicPlugin":
        value = complex(value)
        if value == 0:
            return cls.zero()
        log_value = complex(np.log(value))
        return cls(lambda w: value, label=f"const({value.real:g}{value.imag:+g}j)",
                   log_evaluator=lambda w: log_value)

    @classmethod
    def zero(cls) -> "PeriodicPlugin":
        return cls(lambda w: 0j, label="zero", log_evaluator=lambda w: complex(-np.inf), is_zero=True)

    def __call__(self, w):
        return complex(self.evaluator(complex(w)))

    def log(self, w) -> complex:
        if self.log_evaluator is not None:
            return complex(self.log_evaluator(complex(w)))
        value = self(w)
        if value == 0:
            return complex(-np.inf)
        return complex(np.log(value))

    def periodicity_defect(self, re_values: Sequence[float] = (-0.7, -0.2, 0.3, 0.8),
                           im_values: Sequence[float] = (-3.0, -1.0, 0.0, 1.0, 3.0)) -> float:
        worst = 0.0
        for x in re_values:
            for y in im_values:
                w = complex(x, y)
                a, b = self(w), self(w + 1.0)
                worst = max(worst, abs(b - a) / (1.0 + abs(a)))
        return worst

    def growth_exponent(self, re_w: float = 0.3, im_range: Tuple[float, float] = (5.0, 50.0),
                        samples: int = 24) -> Tuple[float, float]:
        """Least-squares slopes of log|P| against |Im w| in the upper and lower half-planes."""
        ys = np.linspace(im_range[0], im_range[1], samples)
        slopes = []
        for sign in (1.0, -1.0):
            logs = np.array([self.log(complex(re_w, sign * y)).real for y in ys])
            slopes.append(float(np.polyfit(ys, logs, 1)[0]))
        return slopes[0], slopes[1]


# ---------------------------------------------------------------------------
# regularized Gamma factor


def _bernoulli_poly(m: int, w):
    return sum(special.comb(m, j) * _BERNOULLI[j] * w ** (m - j) for j in range(m + 1))


def _series_coefficients(w) -> np.ndarray:
    """(-1)^(k+1) B_{k+1}(w) / (k(k+1)) for k = 1..K, shape (K,) + w.shape."""
    w = np.asarray(w, dtype=complex)
    return np.array([(-1) ** (k + 1) * _bernoulli_poly(k + 1, w) / (k * (k + 1))
                     for k in range(1, _SERIES_TERMS + 1)])


def _series_threshold(w_abs) -> np.ndarray:
    return np.maximum(_SERIES_RATIO * (np.asarray(w_abs) + 1.0), _SERIES_MIN)


def lgn(a, w) -> np.ndarray:
    """
    log Gamma(a+w) - (a+w-1/2) log a + a - log(2 pi)/2, the Gamma factor of
    one sequence value with its Stirling normalization removed. a and w
    broadcast against each other.
    """
    a, w = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(w, dtype=complex))
    out = np.empty(a.shape, dtype=complex)
    large = np.abs(a) >= _series_threshold(np.abs(w))
    if np.any(large):
        wl = w[large]
        inv = 1.0 / a[large]
        power = inv.copy()
        acc = np.zeros_like(inv)
        for coef in _series_coefficients(wl):
            acc = acc + coef * power
            power = power * inv
        out[large] = acc
    small = ~large
    if np.any(small):
        s = a[small]
        arg = s + w[small]
        value = special.loggamma(arg) - (arg - 0.5) * np.log(s) + s - _HALF_LOG_2PI
        if not np.all(np.isfinite(value)):
            raise PoleProximity("argument hits a Gamma pole of the infinite product")
        out[small] = value
    return out


def _gamma_terms(spec: OmegaSpec, y):
    f = spec.finite
    total = np.zeros(np.shape(y), dtype=complex)
    for d in f.d2:
        total = total + log_gamma(y + d)
    for d in f.d3:
        total = total + log_gamma(d - y + 1.0)
    for d in f.d4:
        total = total - log_gamma(d + y)
    for d in f.d1:
        total = total - log_gamma(d - y + 1.0)
    return complex(total) if np.ndim(y) == 0 else total


def _family_log_sum(fam: SequenceFamily, w: np.ndarray, truncation: int) -> np.ndarray:
    """
    sum_{n <= N} lgn(a_n, w) over every row of the family. Sequence values
    beyond the series threshold of max |w| enter only through the power sums
    sum a_n^-k, which are shared by all w.
    """
    cutoff = float(_series_threshold(np.abs(w).max()))
    row = w.reshape(1, -1)
    head = np.zeros(w.size, dtype=complex)
    power_sums = np.zeros(_SERIES_TERMS, dtype=complex)
    step = max(16, min(CHUNK, 200_000 // (w.size * fam.count)))
    for start in range(1, truncation + 1, step):
        n = np.arange(start, min(start + step, truncation + 1), dtype=float)
        a = fam.values(n).reshape(-1)
        near = np.abs(a) < cutoff
        if np.any(near):
            head += lgn(a[near].reshape(-1, 1), row).sum(axis=0)
        far = a[~near]
        if far.size:
            inv = 1.0 / far
            power = inv.copy()
            for k in range(_SERIES_TERMS):
                power_sums[k] += power.sum()
                power = power * inv
    if np.any(power_sums != 0):
        head += np.tensordot(power_sums, _series_coefficients(w), axes=1)
    return head


def log_l1(spec: OmegaSpec, y, truncation: int):
    """Log of the infinite Gamma product truncated after `truncation` factors; y may be an array."""
    y = np.asarray(y, dtype=complex)
    flat = y.reshape(-1)
    total = np.zeros(flat.size, dtype=complex)
    if not spec.is_finite_product:
        arguments = {FamilyKind.GAMMA: (flat, 1.0), FamilyKind.ZETA: (1.0 - flat, 1.0),
                     FamilyKind.ETA: (flat, -1.0), FamilyKind.H: (1.0 - flat, -1.0)}
        for fam in spec.families:
            if fam.count == 0:
                continue
            w, sign = arguments[fam.kind]
            total += sign * _family_log_sum(fam, w, truncation)
    return complex(total[0]) if y.ndim == 0 else total.reshape(y.shape)


def log_rational(spec: OmegaSpec, y: complex) -> complex:
    """Sum of principal logs of the finite linear factors of Omega."""
    f = spec.finite
    total = 0j
    for d in f.d1:
        total += np.log(complex(d - y))
    for d in f.d2:
        total += np.log(complex(d + y))
    for d in f.d3:
        total -= np.log(complex(d - y))
    for d in f.d4:
        total -= np.log(complex(d + y))
    return complex(total)


# ---------------------------------------------------------------------------
# region of analyticity


@dataclass
class RegionReport:
    violated_clauses: List[Tuple[str, Tuple[int, int]]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return not self.violated_clauses

    def pole_violations(self) -> List[Tuple[str, Tuple[int, int]]]:
        return [v for v in self.violated_clauses if v[0].startswith("pole:")]

    def clause_ids(self) -> List[str]:
        return sorted({v[0] for v in self.violated_clauses})

    def to_dict(self) -> dict:
        return {"admissible": self.admissible,
                "violated_clauses": [{"clause": c, "index": list(ix)} for c, ix in self.violated_clauses],
                "notes": self.notes}


def _lattice_hit(value: float, tol: float, nonpositive: bool) -> bool:
    """value == -m (nonpositive) or value == 1+m (otherwise) for some integer m >= 0."""
    r = round(value)
    if abs(value - r) >= tol:
        return False
    return r <= 0 if nonpositive else r >= 1


def _family_candidates(fam: SequenceFamily, i: int, bound: float, depth: int) -> np.ndarray:
    """Indices n with Re a_{i,n} <= bound, solved in closed form for affine generators."""
    parts = fam.affine_parts(i)
    if parts is not None and parts[0] > 0:
        slope, intercept = parts
        n_max = int(math.floor((bound - complex(intercept).real) / slope))
        n_max = min(max(n_max, 0), 10_000_000)
        return np.arange(1, n_max + 1, dtype=float)
    found = []
    for start in range(1, depth + 1, 256):
        n = np.arange(start, min(start + 256, depth + 1), dtype=float)
        vals = np.asarray(fam.generator(i, n), dtype=complex).real
        found.append(n[vals <= bound])
        if vals[-1] > bound:
            break
    return np.concatenate(found) if found else np.zeros(0)


def _scan_region(spec: OmegaSpec, y: complex, d0: Optional[float], depth: int,
                 plugin: Optional[PeriodicPlugin], tol: float) -> RegionReport:
    report = RegionReport()
    f = spec.finite
    x = complex(y).real

    def finite_clause(clause, deltas, sign, nonpositive, at):
        for i, d in enumerate(deltas, start=1):
            if _lattice_hit(at + sign * complex(d).real, tol, nonpositive):
                report.violated_clauses.append((clause, (i, 0)))

    def family_clause(clause, kind, sign, nonpositive, at):
        bound = abs(at) + 2.0
        for fam in spec.family(kind):
            for i in range(1, fam.count + 1):
                n = _family_candidates(fam, i, bound, depth)
                if n.size == 0:
                    continue
                vals = np.asarray(fam.generator(i, n), dtype=complex).real
                for n_k, a in zip(n, vals):
                    if _lattice_hit(at + sign * a, tol, nonpositive):
                        report.violated_clauses.append((clause, (i, int(n_k))))

    def zero_clauses(prefix, at):
        finite_clause(f"{prefix}:delta4", f.d4, 1.0, True, at)
        finite_clause(f"{prefix}:delta1", f.d1, -1.0, False, at)
        family_clause(f"{prefix}:eta", FamilyKind.ETA, 1.0, True, at)
        family_clause(f"{prefix}:h", FamilyKind.H, -1.0, False, at)

    def plugin_hit(offsets, at):
        return [k for k, off in enumerate(offsets, start=1)
                if abs((at - off) - round(at - off)) < tol]

    # poles of Y_h
    finite_clause("pole:delta2", f.d2, 1.0, True, x)
    finite_clause("pole:delta3", f.d3, -1.0, False, x)
    family_clause("pole:gamma", FamilyKind.GAMMA, 1.0, True, x)
    family_clause("pole:zeta", FamilyKind.ZETA, -1.0, False, x)
    if plugin is not None:
        for k in plugin_hit(plugin.pole_offsets, x):
            report.violated_clauses.append(("pole:plugin", (k, 0)))
        cancelling = plugin_hit(plugin.zero_offsets, x)
        if cancelling:
            kept = [v for v in report.violated_clauses if not v[0].startswith("pole:")
                    or v[0] == "pole:plugin"]
            dropped = len(report.violated_clauses) - len(kept)
            if dropped:
                report.notes.append(f"{dropped} pole line(s) at Re y={x:g} cancelled by zeros of {plugin.label}")
            report.violated_clauses = kept

    # zeros of Y_h
    zero_clauses("zero", x)

    # zeros of Y_h(z + beta*xi + beta) on the contour Re xi = -d0
    if d0 is not None:
        shifted = x + 1.0 - d0
        zero_clauses("shifted", shifted)
        if plugin is not None:
            for k in plugin_hit(plugin.zero_offsets, shifted):
                report.violated_clauses.append(("shifted:plugin_zero", (k, 0)))
    return report


def check_region(spec: OmegaSpec, params: EquationParams, z, d0: Optional[float] = None,
                 depth: int = 64, plugin: Optional[PeriodicPlugin] = None) -> RegionReport:
    if d0 is not None and not (0.0 <= d0 <= 1.0):
        raise OutOfRange(f"d0={d0} must lie in [0, 1]")
    if depth < 1:
        raise OutOfRange("depth must be at least 1")
    barred, _ = rescale_to_unit_step(spec, params)
    return _scan_region(barred, complex(z) / params.beta, d0, depth, plugin, get_settings().tol_region)


# ---------------------------------------------------------------------------
# the solution handle


@dataclass(frozen=True)
class HomogeneousSolution:
    spec: OmegaSpec
    params: EquationParams
    plugin: PeriodicPlugin
    truncation: int
    beta: float
    sign_beta: int

    def _c(self, sigma) -> complex:
        c = self.params.c(sigma)
        if c == 0:
            raise InvalidHypotheses(f"a1*sigma + a2*sigma**nu vanishes at sigma={sigma}")
        return c

    def _prefactor(self, y: complex) -> complex:
        A, B = complex(self.spec.finite.A), complex(self.spec.finite.B)
        return A * y ** 3 / 3.0 + (B - A) * y ** 2 / 2.0 + (A - 3.0 * B) * y / 6.0

    def power_log(self, sigma) -> complex:
        """Principal Log(delta0/c), shared by every evaluation."""
        base = complex(self.spec.finite.delta0) / self._c(sigma)
        return complex(principal_log(base))

    def region(self, z, d0: Optional[float] = None, depth: int = 64) -> RegionReport:
        return _scan_region(self.spec, complex(z) / self.beta, d0, depth, self.plugin,
                            get_settings().tol_region)

    def log_core(self, y: complex) -> complex:
        """log L(y): finite Gamma ratio plus the truncated infinite product."""
        return _gamma_terms(self.spec, y) + log_l1(self.spec, y, self.truncation)

    def log_evaluate(self, z, sigma, include_power: bool = True, check: bool = True) -> complex:
        z = complex(z)
        y = z / self.beta
        if check:
            report = self.region(z)
            poles = report.pole_violations()
            if poles:
                raise RegionViolation(f"z={z} lies on a pole line of Y_h: {poles[0][0]} {poles[0][1]}",
                                      clauses=[c for c, _ in poles])
        value = self._prefactor(y) + self.plugin.log(y) + self.log_core(y)
        if include_power:
            value += (y - 0.5) * self.power_log(sigma)
        return complex(value)

    def log_evaluate_many(self, zs, sigma) -> np.ndarray:
        """log Y_h on an array of points, without region checks."""
        ys = np.asarray(zs, dtype=complex).ravel() / self.beta
        plugin = np.array([self.plugin.log(y) for y in ys], dtype=complex)
        value = (self._prefactor(ys) + plugin + self.log_core(ys)
                 + (ys - 0.5) * self.power_log(sigma))
        return value.reshape(np.shape(zs))

    def evaluate(self, z, sigma):
        """Y_h(z, sigma; P); arrays of z are evaluated point by point."""
        if np.ndim(z) == 0:
            return complex(np.exp(self.log_evaluate(z, sigma)))
        points = np.asarray(z, dtype=complex)
        return np.array(evaluate_grid(self, points.ravel(), sigma)).reshape(points.shape)

    def components(self, z, sigma) -> Dict[str, complex]:
        y = complex(z) / self.beta
        return {
            "prefactor": complex(np.exp(self._prefactor(y))),
            "power": complex(np.exp((y - 0.5) * self.power_log(sigma))),
            "plugin": self.plugin(y),
            "gamma_ratio": complex(np.exp(_gamma_terms(self.spec, y))),
            "product": complex(np.exp(log_l1(self.spec, y, self.truncation))),
        }

    def omega(self, z) -> complex:
        """Omega(z) truncated at the same depth as the Gamma product."""
        return evaluate_omega(self.spec, complex(z) / self.beta, self.truncation).value

    def residual(self, z, sigma) -> float:
        z = complex(z)
        if self.plugin.is_zero:
            return 0.0
        c = self._c(sigma)
        l0 = self.log_evaluate(z, sigma)
        l1 = self.log_evaluate(z + self.beta, sigma)
        omega = self.omega(z)
        diff = abs(c * np.exp(l1 - l0) - omega)
        return float(diff / (math.exp(-l0.real) + abs(omega)))

    def with_plugin(self, plugin: PeriodicPlugin) -> "HomogeneousSolution":
        return replace(self, plugin=plugin)


def build(spec: OmegaSpec, params: EquationParams, plugin: Optional[PeriodicPlugin] = None,
          truncation: Optional[int] = None, sigma: complex = 1.0) -> HomogeneousSolution:
    truncation = get_settings().truncation if truncation is None else int(truncation)
    if truncation < 1:
        raise InvalidHypotheses("truncation must be positive")
    report = validate_hypotheses(spec, params, scan_depth=max(10, min(truncation, 4096)), sigma=sigma)
    if not report.passed:
        names = [c.clause for c in report.failed()]
        raise InvalidHypotheses(f"hypotheses failed: {', '.join(names)}", clauses=names)
    barred, barred_params = rescale_to_unit_step(spec, params)
    plugin = plugin or PeriodicPlugin.constant(1.0)
    logger.info(f"built homogeneous solution for {spec.label or 'omega'}: "
                f"beta={params.beta}, truncation={truncation}, plugin={plugin.label}")
    return HomogeneousSolution(barred, barred_params, plugin, truncation,
                               float(params.beta), 1 if params.beta > 0 else -1)


def evaluate_grid(sol: HomogeneousSolution, points, sigma) -> List[complex]:
    """Evaluate at many points; results keep the input order."""
    points = [complex(p) for p in points]
    threads = get_settings().threads
    if threads <= 1 or len(points) < 2:
        return [complex(np.exp(sol.log_evaluate(p, sigma))) for p in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda p: complex(np.exp(sol.log_evaluate(p, sigma))), points))


# ---------------------------------------------------------------------------
# asymptotics


def _log_reduced_omega(spec: OmegaSpec, y: complex, truncation: int) -> complex:
    """Log of Omega(y) / (delta0 exp(A y^2 + B y))."""
    value = log_rational(spec, y)
    if not spec.is_finite_product:
        value += log_omega1(spec, y, truncation)
    return value


def asymptotic_ratio(sol: HomogeneousSolution, re_z: float, im_grid: Sequence[float]) -> List[float]:
    """
    |Phi(z)| / (|z|^2 ln|z|) along the vertical line Re z = re_z, where

        Phi = log L(y) - (y - 1/2) Log[Omega(y) / (delta0 exp(A y^2 + B y))].

    The logarithm of the reduced coefficient is continued along a tracking
    grid of step at most 2 starting at the first grid point.
    """
    grid = np.asarray(im_grid, dtype=float)
    if grid.size == 0:
        return []
    if np.any(np.abs(grid) < 10.0):
        raise OutOfRange("asymptotic_ratio needs |Im z| >= 10 on the grid")
    track = [grid[0]]
    marks = [0]
    for a, b in zip(grid[:-1], grid[1:]):
        steps = max(1, int(math.ceil(abs(b - a) / 2.0)))
        track.extend(np.linspace(a, b, steps + 1)[1:])
        marks.append(len(track) - 1)
    track = np.asarray(track)

    ys = (re_z + 1j * track) / sol.beta
    logs = np.array([_log_reduced_omega(sol.spec, y, sol.truncation) for y in ys])
    logs = logs.real + 1j * np.unwrap(logs.imag)

    ratios = []
    for k, mark in enumerate(marks):
        z = complex(re_z, grid[k])
        y = ys[mark]
        phi = sol.log_core(y) - (y - 0.5) * logs[mark]
        ratios.append(float(abs(phi) / (abs(z) ** 2 * math.log(abs(z)))))
    logger.debug(f"asymptotic ratios on Re z={re_z}: {ratios}")
    return ratios


# ---------------------------------------------------------------------------
# summation estimates for the infinite products


@dataclass
class BoundReport:
    z: complex
    c_star: float
    start_index: int
    depth: int
    sums: Dict[str, float]
    envelopes: Dict[str, float]
    tails: Dict[str, float]
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"z": [self.z.real, self.z.imag], "c_star": self.c_star,
                "start_index": self.start_index, "depth": self.depth,
                "sums": self.sums, "envelopes": self.envelopes, "tails": self.tails,
                "notes": self.notes}


def _tail_series(w: np.ndarray, alternating: bool) -> np.ndarray:
    """sum_{k>=4} w^k/k, or its alternating form sum_{k>=4} (-1)^(k+1) w^k/k."""
    out = np.empty_like(w)
    small = np.abs(w) < 0.3
    if np.any(small):
        ws = w[small]
        acc = np.zeros_like(ws)
        power = ws ** 4
        for k in range(4, 44):
            sign = (-1.0) ** (k + 1) if alternating else 1.0
            acc = acc + sign * power / k
            power = power * ws
        out[small] = acc
    big = ~small
    if np.any(big):
        wb = w[big]
        if alternating:
            out[big] = np.log1p(wb) - wb + wb ** 2 / 2.0 - wb ** 3 / 3.0
        else:
            out[big] = -np.log1p(-wb) - wb - wb ** 2 / 2.0 - wb ** 3 / 3.0
    return out


def _bound_terms(b: np.ndarray, z: complex, c_star: float) -> Dict[str, np.ndarray]:
    u = z / (b + z)
    v = z / (b - z)
    u_s = z / (b + c_star + z)
    v_s = z / (b + c_star - z)
    f_u = b * _tail_series(u, False)
    f_us = (b + c_star) * _tail_series(u_s, False)
    g_v = b * _tail_series(v, True)
    g_vs = (b + c_star) * _tail_series(v_s, True)
    return {
        "i": np.abs(z / (b * (b + z))) + np.abs(z / (b * (b - z))),
        "ii": (np.abs(z / ((b + z + c_star) * (b + z))) + np.abs(z / ((b - z + c_star) * (b - z)))
               + np.abs(z / ((b - z + c_star) * (b + z)))),
        "iii": np.abs(f_u) + np.abs(g_v),
        "iv_u": f_u - f_us,
        "iv_v": g_v - g_vs,
    }


def _envelope_bases(z: complex) -> Dict[str, float]:
    r = abs(z)
    return {"i": 1.0 + math.log(r), "ii": 1.0, "iii": 1.0 + r ** 2 + r ** 2 * math.log(r),
            "iv": 1.0 + r}


def appendix_bounds(beta_seq: SequenceFamily, c_star: float, z, tol: float = 1e-10,
                    max_depth: int = 1 << 22) -> BoundReport:
    """
    The four sums over n >= N controlling the Taylor remainders of the
    normalized Gamma factors, with b = beta_seq(1, n) and
    u = z/(b+z), v = z/(b-z):

      (i)   sum |z/(b(b+z))| + |z/(b(b-z))|
      (ii)  sum of the three C*-shifted products
      (iii) sum |b F(u)| + |b G(v)|,  F, G the Taylor tails of -log(1-u), log(1+v)
      (iv)  |sum b F(u) - (b+C*) F(u*)| + |sum b G(v) - (b+C*) G(v*)|

    N is the first index with b(N) > 4|Re z| and b(N) + 2C* > 4|Re z|.
    """
    z = complex(z)
    if abs(z) < 2.0:
        raise OutOfRange(f"|z|={abs(z):.3g} must be at least 2")
    z1 = abs(z.real)

    def seq(n):
        return np.asarray(beta_seq.generator(1, n), dtype=complex).real

    start = 1
    while True:
        b0 = seq(np.array([float(start)]))[0]
        if b0 > 4 * z1 and b0 + 2 * c_star > 4 * z1:
            break
        start += 1
        if start > max_depth:
            raise SummabilityFailure("no admissible starting index", z=str(z))

    depth = 1024
    while True:
        n = np.arange(start, start + depth, dtype=float)
        b = seq(n).astype(complex)
        squares = 1.0 / np.abs(b) ** 2
        _, ratio, _ = _block_tail(squares)
        if ratio >= 0.97:
            raise SummabilityFailure("sum 1/b^2 does not converge", ratio=ratio)
        terms = _bound_terms(b, z, c_star)
        tails = {}
        converged = True
        for key in ("i", "ii", "iii"):
            partial, _, tail = _block_tail(terms[key])
            tails[key] = float(tail)
            if not (tail <= tol * (1.0 + partial)):
                converged = False
        tail_iv = max(_block_tail(np.abs(terms["iv_u"]))[2], _block_tail(np.abs(terms["iv_v"]))[2])
        tails["iv"] = float(tail_iv)
        if tail_iv > tol * (1.0 + float(abs(terms["iv_u"].sum()))):
            converged = False
        if converged:
            break
        if depth >= max_depth:
            raise SummabilityFailure(f"sums did not settle within {max_depth} terms", z=str(z))
        depth *= 2

    sums = {
        "i": float(terms["i"].sum()),
        "ii": float(terms["ii"].sum()),
        "iii": float(terms["iii"].sum()),
        "iv": float(abs(terms["iv_u"].sum()) + abs(terms["iv_v"].sum())),
    }
    logger.info(f"appendix sums at z={z}: start={start}, depth={depth}")
    return BoundReport(z, float(c_star), start, depth, sums, _envelope_bases(z), tails)


def envelope_check(reports: Sequence[BoundReport], slack: float = 1.5) -> ValidationReport:
    """Fit C at the first report and flag any later sum above slack*C*envelope."""
    check = ValidationReport(subject="tail-sum envelopes")
    if not reports:
        return check
    ref = reports[0]
    constants = {k: ref.sums[k] / ref.envelopes[k] for k in ref.sums}
    check.notes["constants"] = constants
    check.notes["reference_abs_z"] = abs(ref.z)
    for rep in reports[1:]:
        for key, total in rep.sums.items():
            limit = slack * constants[key] * rep.envelopes[key]
            check.add(f"{key}@|z|={abs(rep.z):g}", total <= limit + 1e-300,
                      f"sum={total:.6g}, envelope={limit:.6g}", total)
    return check


# ---------------------------------------------------------------------------
# several variables


@dataclass(frozen=True)
class MultidimensionalSolution:
    components: Tuple[HomogeneousSolution, ...]
    leading_base: complex

    def log_evaluate(self, zs: Sequence[complex], sigma) -> complex:
        if len(zs) != len(self.components):
            raise IncompatibleParams(f"expected {len(self.components)} coordinates, got {len(zs)}")
        first = self.components[0]
        c = first._c(sigma)
        y1 = complex(zs[0]) / first.beta
        value = (y1 - 0.5) * complex(principal_log(complex(self.leading_base) / c))
        for sol, z in zip(self.components, zs):
            value += sol.log_evaluate(z, sigma, include_power=False)
        return complex(value)

    def __call__(self, zs: Sequence[complex], sigma) -> complex:
        return complex(np.exp(self.log_evaluate(zs, sigma)))

    def coefficient(self, zs: Sequence[complex]) -> complex:
        """S(z) = leading_base * prod_j Omega_j(z_j) / delta0_j."""
        value = complex(self.leading_base)
        for sol, z in zip(self.components, zs):
            value *= sol.omega(z) / complex(sol.spec.finite.delta0)
        return value

    def residual(self, zs: Sequence[complex], sigma) -> float:
        shifted = [complex(z) + sol.beta for sol, z in zip(self.components, zs)]
        l0 = self.log_evaluate(zs, sigma)
        l1 = self.log_evaluate(shifted, sigma)
        c = self.components[0]._c(sigma)
        s = self.coefficient(zs)
        diff = abs(c * np.exp(l1 - l0) - s)
        return float(diff / (math.exp(-l0.real) + abs(s)))


def compose_multidimensional(solutions: Sequence[HomogeneousSolution],
                             leading_base: Optional[complex] = None) -> MultidimensionalSolution:
    if not solutions:
        raise IncompatibleParams("at least one component solution is required")
    first = solutions[0].params
    for sol in solutions[1:]:
        p = sol.params
        if (p.a1, p.a2, p.nu) != (first.a1, first.a2, first.nu):
            raise IncompatibleParams("component solutions must share a1, a2 and nu")
    if leading_base is None:
        leading_base = complex(np.prod([complex(s.spec.finite.delta0) for s in solutions]))
    return MultidimensionalSolution(tuple(solutions), complex(leading_base))
