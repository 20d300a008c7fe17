"""
Particular solution of c(sigma) Y(z+beta) - Omega(z) Y(z) = F(z, sigma) as a
contour integral

    Y_ih(z) = Y_h(z; P1)/K1(0) * int_l F(z+beta xi) K(xi) / (c Y_h(z+beta xi+beta; P1)) d xi

with K(xi) = (cot(pi xi) + i) K1(xi) / (2i), over the vertical line
Re xi = -d0 (d0 in (0, 1)) or the detoured lines through -1 and 0.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

from fde.config import get_settings
from fde.errors import BadContour, DecayViolation, KernelInvalid, RegionViolation
from fde.homogeneous import HomogeneousSolution, PeriodicPlugin
from fde.reports import ValidationReport
from fde.specfun import log_sin

logger = logging.getLogger(__name__)

_LOG_2I = complex(np.log(2j))
_TAIL_RATIO = 1e-12
_MAX_T_DOUBLINGS = 2


# ---------------------------------------------------------------------------
# contour


@dataclass(frozen=True)
class ContourSpec:
    d0: float = 0.5
    d1: float = 0.05
    T: float = 40.0
    nodes_per_unit: int = 40

    def __post_init__(self):
        if not (0.0 <= self.d0 <= 1.0):
            raise BadContour(f"d0={self.d0} must lie in [0, 1]")
        if not (0.0 < self.d1 < 0.125):
            raise BadContour(f"d1={self.d1} must lie in (0, 1/8)")
        if self.T < 10.0:
            raise BadContour(f"T={self.T} must be at least 10")
        if self.nodes_per_unit < 1:
            raise BadContour("nodes_per_unit must be positive")

    @property
    def detoured(self) -> bool:
        return self.d0 in (0.0, 1.0)


@dataclass(frozen=True)
class QuadraturePath:
    nodes: np.ndarray
    weights: np.ndarray
    pieces: Tuple[str, ...]
    spec: ContourSpec
    # trapezoid nodes of the straight line, for the spacing-doubling error estimate
    line_nodes: bool = False

    @property
    def count(self) -> int:
        return int(self.nodes.size)


def _gauss_panels(edges: np.ndarray, per_unit: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        order = int(min(64, max(12, math.ceil(per_unit * (hi - lo)))))
        x, w = np.polynomial.legendre.leggauss(order)
        nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def build_contour(spec: ContourSpec) -> QuadraturePath:
    """Nodes and weights (d xi included) traversing the path upward."""
    if not spec.detoured:
        m = 2 * int(math.ceil(spec.T * spec.nodes_per_unit))
        t = np.linspace(-spec.T, spec.T, m + 1)
        h = 2.0 * spec.T / m
        w = np.full(m + 1, h, dtype=complex) * 1j
        w[0] *= 0.5
        w[-1] *= 0.5
        return QuadraturePath(-spec.d0 + 1j * t, w, ("line",), spec, line_nodes=True)

    center = -1.0 if spec.d0 == 1.0 else 0.0
    # graded panels toward the detour so the junction costs no accuracy
    edges = [spec.d1]
    while edges[-1] * 2.0 < 1.0:
        edges.append(edges[-1] * 2.0)
    edges.extend(np.arange(1.0, spec.T, 1.0))
    edges.append(spec.T)
    t, wt = _gauss_panels(np.asarray(edges, dtype=float), spec.nodes_per_unit)

    n_arc = max(16, 2 * int(math.ceil(math.pi * spec.d1 * spec.nodes_per_unit)))
    x, w_arc = np.polynomial.legendre.leggauss(n_arc)
    phi = 0.5 * math.pi * x
    arc = center + spec.d1 * np.exp(1j * phi)
    arc_w = 0.5 * math.pi * w_arc * 1j * spec.d1 * np.exp(1j * phi)

    lower = center - 1j * t[::-1]
    upper = center + 1j * t
    nodes = np.concatenate([lower, arc, upper])
    weights = np.concatenate([1j * wt[::-1], arc_w, 1j * wt])
    return QuadraturePath(nodes, weights, ("lower_ray", "half_circle", "upper_ray"), spec)


# ---------------------------------------------------------------------------
# kernels and forcings


@dataclass(frozen=True)
class KernelSpec:
    """The periodic factor K1 of the cotangent kernel."""
    k1: Callable[[complex], complex]
    label: str = "K1"
    log_k1: Optional[Callable[[complex], complex]] = None
    pole_offsets: Tuple[float, ...] = ()
    pole_order: int = 0

    def __call__(self, xi) -> complex:
        return complex(self.k1(complex(xi)))

    def log(self, xi) -> complex:
        if self.log_k1 is not None:
            return complex(self.log_k1(complex(xi)))
        return complex(np.log(self(xi)))

    def poles_between(self, lo: float, hi: float) -> Tuple[float, ...]:
        """Real poles p of K1 with lo < p < hi."""
        found = []
        for off in self.pole_offsets:
            m = math.floor(lo - off) + 1
            while off + m < hi:
                if off + m > lo:
                    found.append(off + m)
                m += 1
        return tuple(sorted(found))


def constant_kernel(value: complex = 1.0) -> KernelSpec:
    value = complex(value)
    log_value = complex(np.log(value)) if value != 0 else complex(-np.inf)
    return KernelSpec(lambda xi: value, f"const({value.real:g})", lambda xi: log_value)


def sin_power_kernel(d: float, power: int = 2) -> KernelSpec:
    """K1(xi) = sin^power(pi d) / sin^power(pi (xi + d))."""
    if power < 1:
        raise KernelInvalid("power must be a positive integer")
    log_num = complex(log_sin(math.pi * d))

    def log_k1(xi):
        return power * (log_num - log_sin(math.pi * (xi + d)))

    return KernelSpec(lambda xi: np.exp(log_k1(xi)), f"sin^{power}(pi d)/sin^{power}(pi(xi+d)), d={d:g}",
                      log_k1, pole_offsets=((-d) % 1.0,), pole_order=power)


def default_kernel_shift(d0: float) -> float:
    """d in (d0, d0+1) away from the integers, where sin(pi d) vanishes."""
    d = d0 + 0.5
    if abs(d - round(d)) < 0.05:
        d = d0 + 0.25
    return d


def log_cot_kernel(xi):
    """log[(cot(pi xi) + i)/(2i)] = i pi xi - log sin(pi xi) - log 2i."""
    return 1j * math.pi * np.asarray(xi) - log_sin(math.pi * np.asarray(xi)) - _LOG_2I


def validate_kernel(k: KernelSpec, forcing: Optional["ForcingSpec"] = None) -> ValidationReport:
    """H4 clauses for K1. A superexponentially decaying forcing waives the decay clause."""
    report = ValidationReport(subject=k.label)
    re_grid = np.linspace(-1.0, 0.0, 21)
    im_grid = np.array([-4.0, -2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0, 4.0])

    defect = 0.0
    for x in (-0.9, -0.6, -0.3, -0.1):
        for y in (-2.0, -0.5, 0.5, 2.0):
            xi = complex(x, y)
            a, b = k(xi), k(xi + 1.0)
            defect = max(defect, abs(b - a) / (1.0 + abs(a)))
    report.add("periodic", defect < 1e-10, f"max relative defect {defect:.3g}", defect)

    values = np.array([[k(complex(x, y)) for x in re_grid] for y in im_grid])
    finite = bool(np.all(np.isfinite(values)) and np.max(np.abs(values)) < 1e8)
    report.add("no_poles_in_strip", finite, "grid of Re xi in [-1, 0] off the real axis")
    axis_poles = k.poles_between(-1.0 - 1e-12, 1e-12)
    if axis_poles:
        # a periodic pole sits in every unit strip, its residue adds to F
        report.add("real_axis_poles", False,
                   f"poles of order {k.pole_order} at xi={', '.join(f'{p:g}' for p in axis_poles)}")

    k0 = k(0.0)
    report.add("k1_at_zero", abs(k0) > 1e-12 and np.isfinite(k0), f"K1(0)={k0:.6g}", abs(k0))

    rates, full_up, full_down = [], [], []
    for x in (-0.75, -0.25):
        for sign in (1.0, -1.0):
            l5 = k.log(complex(x, 5.0 * sign)).real
            l10 = k.log(complex(x, 10.0 * sign)).real
            rates.append((l5 - l10) / 5.0)
        full_up.append((log_cot_kernel(complex(x, 5.0)) - log_cot_kernel(complex(x, 10.0))).real / 5.0
                       + rates[-2])
        full_down.append(abs(np.exp(log_cot_kernel(complex(x, -10.0)))))
    rate = min(rates)
    if rate > 0.5:
        report.add("decay", True, f"measured decay rate of K1 {rate:.4g} per unit of |Im xi|", rate)
    elif forcing is not None and forcing.decay_class == "superexponential" and rate > -1e-9:
        report.add("decay", True, f"K1 does not decay (rate {rate:.4g}); {forcing.label} decays "
                                  f"faster than any exponential", rate, borderline=True)
    else:
        report.add("decay", False, f"measured decay rate of K1 {rate:.4g} per unit of |Im xi|", rate)
    report.notes["k1_decay_rate"] = rate
    report.notes["kernel_decay_rate_upper"] = float(min(full_up))
    report.notes["cot_factor_limit_lower"] = float(np.mean(full_down))
    return report


@dataclass(frozen=True)
class ForcingSpec:
    """
    Right-hand side F(z, sigma). decay_rate is -d log|F| / d|Im z|: positive
    for exponential decay, negative for growth, None for faster than any
    exponential.
    """
    f: Callable[[complex, complex], complex]
    label: str = "F"
    log_f: Optional[Callable[[complex, complex], complex]] = None
    decay_class: str = "bounded"
    decay_rate: Optional[float] = 0.0
    whole_plane: bool = True
    strip: Optional[Tuple[float, float]] = None
    is_zero: bool = False

    def __call__(self, z, sigma) -> complex:
        return complex(self.f(complex(z), complex(sigma)))

    def log(self, z, sigma) -> complex:
        if self.log_f is not None:
            return complex(self.log_f(complex(z), complex(sigma)))
        value = self(z, sigma)
        return complex(np.log(value)) if value != 0 else complex(-np.inf)

    @classmethod
    def zero(cls) -> "ForcingSpec":
        return cls(lambda z, s: 0j, "zero", lambda z, s: complex(-np.inf), is_zero=True)


def sine_forcing() -> ForcingSpec:
    """F = sigma * sin(pi z)."""
    return ForcingSpec(lambda z, s: s * np.sin(math.pi * z), "sigma*sin(pi z)",
                       lambda z, s: complex(np.log(s)) + complex(log_sin(math.pi * z)),
                       decay_class="exp_growth", decay_rate=-math.pi)


def gaussian_forcing(c: float = 0.5, center: complex = 0.0, amplitude: complex = 1.0) -> ForcingSpec:
    """F = amplitude * sigma * exp(c (z - center)^2), decaying like exp(-c (Im z)^2)."""
    if c <= 0:
        raise KernelInvalid("gaussian forcing needs c > 0")
    log_amp = complex(np.log(complex(amplitude)))
    return ForcingSpec(lambda z, s: amplitude * s * np.exp(c * (z - center) ** 2),
                       f"exp({c:g}(z-{center})^2)",
                       lambda z, s: log_amp + complex(np.log(s)) + c * (z - center) ** 2,
                       decay_class="superexponential", decay_rate=None)


def exp_sine_plugin() -> PeriodicPlugin:
    """P1(w) = exp(i pi w) sin(pi w), paired with the sin^6 kernel."""
    return PeriodicPlugin(lambda w: np.exp(1j * math.pi * w) * np.sin(math.pi * w),
                          "exp(i pi w) sin(pi w)",
                          lambda w: 1j * math.pi * w + log_sin(math.pi * w),
                          zero_offsets=(0.0,))


def validate_forcing(forcing: ForcingSpec, sigma: complex = 1.0, re_z: float = 0.3) -> ValidationReport:
    report = ValidationReport(subject=forcing.label)
    rates = []
    for sign in (1.0, -1.0):
        l5 = forcing.log(complex(re_z, 5.0 * sign), sigma).real
        l10 = forcing.log(complex(re_z, 10.0 * sign), sigma).real
        rates.append((l5 - l10) / 5.0)
    measured = min(rates)
    report.notes["measured_decay_rate"] = measured
    if forcing.decay_rate is None:
        ok = measured > 2.0
    elif forcing.decay_rate == 0.0:
        ok = abs(measured) < 0.5
    else:
        ok = 0.5 <= measured / forcing.decay_rate <= 2.0
    report.add("declared_decay", ok, f"declared {forcing.decay_class} ({forcing.decay_rate}), "
                                     f"measured {measured:.4g}", measured)
    return report


# ---------------------------------------------------------------------------
# the integral


@dataclass(frozen=True)
class ParticularValue:
    value: complex
    tail_estimate: float
    T: float
    nodes: int


def _log_terms(sol: HomogeneousSolution, forcing: ForcingSpec, kernel: KernelSpec,
               z: complex, sigma: complex, xi: np.ndarray, log_anchor: complex) -> np.ndarray:
    """log of F(z+b xi) K(xi) Y_h(anchor) / (K1(0) Y_h(z+b xi+b)), c omitted."""
    beta = sol.beta
    log_f = np.array([forcing.log(z + beta * x, sigma) for x in xi], dtype=complex)
    log_k = log_cot_kernel(xi) + np.array([kernel.log(x) for x in xi], dtype=complex)
    alive = np.isfinite(log_f.real)
    out = np.full(xi.shape, complex(-np.inf), dtype=complex)
    if not np.any(alive):
        return out

    points = z + beta * xi[alive] + beta
    threads = get_settings().threads
    if threads > 1 and points.size > 64:
        chunks = np.array_split(points, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            log_y = np.concatenate(list(pool.map(lambda p: sol.log_evaluate_many(p, sigma), chunks)))
    else:
        log_y = sol.log_evaluate_many(points, sigma)
    out[alive] = log_f[alive] + log_k[alive] - log_y + log_anchor - kernel.log(0.0)
    return out


def _check_inputs(sol: HomogeneousSolution, kernel: KernelSpec, contour: ContourSpec, z: complex) -> None:
    k0 = kernel(0.0)
    if not np.isfinite(k0) or abs(k0) < 1e-14:
        raise KernelInvalid(f"K1(0)={k0} must be finite and nonzero")
    tol = 1e-9
    for p in kernel.poles_between(-2.0, 2.0):
        if contour.detoured:
            center = -1.0 if contour.d0 == 1.0 else 0.0
            if abs(abs(p - center) - contour.d1) < tol:
                raise KernelInvalid(f"kernel pole xi={p:g} lies on the detour")
        elif abs(p + contour.d0) < tol:
            raise KernelInvalid(f"kernel pole xi={p:g} lies on the contour")
    lo = (-1.0 if contour.d0 == 1.0 else 0.0) if contour.detoured else -contour.d0
    inside = kernel.poles_between(lo, lo + 1.0)
    if inside:
        raise KernelInvalid(f"kernel pole xi={inside[0]:g} lies between the contour and its unit shift; "
                            f"its residue would enter c Y(z+beta) - Omega(z) Y(z)",
                            poles=list(inside), kernel=kernel.label)
    report = sol.region(z, d0=contour.d0)
    bad = [v for v in report.violated_clauses if v[0].startswith(("pole:", "shifted:"))]
    if bad:
        raise RegionViolation(f"z={z} violates {bad[0][0]} at index {bad[0][1]}",
                              clauses=sorted({c for c, _ in bad}))


def _integrate(sol, forcing, kernel, contour, z, sigma) -> ParticularValue:
    log_anchor = sol.log_evaluate(z, sigma, check=False)
    c = sol._c(sigma)
    spec = contour
    for attempt in range(_MAX_T_DOUBLINGS + 1):
        path = build_contour(spec)
        logs = _log_terms(sol, forcing, kernel, z, sigma, path.nodes, log_anchor)
        with np.errstate(under="ignore"):
            terms = np.exp(logs) * path.weights / c
        value = complex(terms.sum())
        ends = max(abs(terms[0]), abs(terms[-1])) / max(abs(path.weights[0]), 1e-300)
        scale = float(np.abs(terms).sum())
        if ends <= _TAIL_RATIO * max(abs(value), 1e-300) or scale == 0.0:
            break
        if attempt == _MAX_T_DOUBLINGS:
            raise DecayViolation(f"integrand still at {ends:.3g} at |Im xi|={spec.T:g}",
                                 z=str(z), T=spec.T)
        logger.info(f"extending contour half-height from {spec.T:g} to {2 * spec.T:g}")
        spec = replace(spec, T=2.0 * spec.T)

    tail = ends + 1e-12 * scale
    if path.line_nodes and terms.size > 2:
        coarse = 2.0 * terms[::2].sum()
        tail += abs(value - coarse)
    return ParticularValue(value, float(tail), spec.T, path.count)


def solve_particular(sol_h: HomogeneousSolution, forcing: ForcingSpec, kernel: KernelSpec,
                     contour: ContourSpec, z, sigma) -> ParticularValue:
    z, sigma = complex(z), complex(sigma)
    if forcing.is_zero:
        return ParticularValue(0j, 0.0, contour.T, 0)
    _check_inputs(sol_h, kernel, contour, z)
    result = _integrate(sol_h, forcing, kernel, contour, z, sigma)
    logger.debug(f"Y_ih({z})={result.value} tail={result.tail_estimate:.3g} nodes={result.nodes}")
    return result


def residual_inhomogeneous(sol_h: HomogeneousSolution, forcing: ForcingSpec, kernel: KernelSpec,
                           contour: ContourSpec, z, sigma) -> float:
    """|c Y_ih(z+beta) - Omega(z) Y_ih(z) - F(z)| / (1 + |F(z)|)."""
    z, sigma = complex(z), complex(sigma)
    if forcing.is_zero:
        return 0.0
    v0 = solve_particular(sol_h, forcing, kernel, contour, z, sigma).value
    v1 = solve_particular(sol_h, forcing, kernel, contour, z + sol_h.beta, sigma).value
    f = forcing(z, sigma)
    c = sol_h._c(sigma)
    return float(abs(c * v1 - sol_h.omega(z) * v0 - f) / (1.0 + abs(f)))


def particular_function(sol_h: HomogeneousSolution, forcing: ForcingSpec, kernel: KernelSpec,
                        contour: ContourSpec) -> Callable[[complex, complex], complex]:
    def evaluate(z, sigma):
        return solve_particular(sol_h, forcing, kernel, contour, z, sigma).value
    return evaluate


@dataclass(frozen=True)
class GeneralSolution:
    homogeneous: HomogeneousSolution
    particular: Callable[[complex, complex], complex]

    def __call__(self, z, sigma) -> complex:
        value = self.particular(z, sigma)
        if not self.homogeneous.plugin.is_zero:
            value += self.homogeneous.evaluate(z, sigma)
        return complex(value)


def assemble_general(sol_h: HomogeneousSolution, particular_value_fn: Callable[[complex, complex], complex],
                     plugin: Optional[PeriodicPlugin] = None) -> GeneralSolution:
    """Y = Y_h(.; P) + Y_ih; P = zero gives the bounded solution."""
    if plugin is not None:
        sol_h = sol_h.with_plugin(plugin)
    return GeneralSolution(sol_h, particular_value_fn)
