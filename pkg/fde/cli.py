"""
Command-line surface: python -m fde <command> ...

Every command writes its outputs plus a <output>.manifest.json listing the
input digest, tolerances, emitted files and timings. Exit codes: 0 success,
2 validation failure, 3 numerical failure.
"""

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from fde.coefficient import (AffinePowerGenerator, FamilyKind, SequenceFamily, omega_from_dict,
                             params_from_dict, validate_hypotheses)
from fde.config import configure_logging, get_settings
from fde.errors import FDEError, InvalidSpec, InvalidWeight, ParseError, RegionViolation
from fde.factorization import TrigCoefficientSpec, factorize, find_zeros
from fde.homogeneous import PeriodicPlugin, appendix_bounds, build, envelope_check
from fde.models import TransmissionProblemModel
from fde.particular import (ContourSpec, ForcingSpec, constant_kernel, default_kernel_shift, exp_sine_plugin,
                            gaussian_forcing, residual_inhomogeneous, sin_power_kernel, sine_forcing,
                            solve_particular, validate_forcing, validate_kernel)
from fde.transmission import (G_at_zero, G_composition, QuadConfig, admissible_weight, build_G, build_Vh,
                              derive_angles, factorize_G, field_grid, flux_residual)

logger = logging.getLogger(__name__)


def fmt(value: float) -> str:
    """17 significant digits, scientific."""
    return f"{float(value):.16e}"


@dataclass
class RunManifest:
    """
    Sidecar of every command. All fields but timings depend only on the inputs
    and settings, so reruns match byte for byte once timings is dropped.
    """
    command: str
    input_digest: str
    tolerances: Dict[str, object]
    outputs: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _digest(paths: Sequence[Path]) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(p.read_bytes())
    return h.hexdigest()


def _tolerances() -> Dict[str, object]:
    s = get_settings()
    return {"tol_pole": s.tol_pole, "tol_region": s.tol_region, "truncation": s.truncation,
            "h2_ceiling": s.h2_ceiling, "threads": s.threads}


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read {path}: {e}", path=str(path)) from e


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _pair(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise InvalidSpec(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(float(v))


# ---------------------------------------------------------------------------
# equation specs


def plugin_from_dict(data: Optional[dict]) -> PeriodicPlugin:
    data = data or {"type": "constant", "value": 1.0}
    kind = data.get("type", "constant")
    if kind == "constant":
        return PeriodicPlugin.constant(_pair(data.get("value", 1.0)))
    if kind == "zero":
        return PeriodicPlugin.zero()
    if kind == "exp_sine":
        return exp_sine_plugin()
    raise InvalidSpec(f"unknown plugin type {kind!r}")


def kernel_from_dict(data: Optional[dict], d0: float):
    data = data or {"type": "constant"}
    kind = data.get("type", "constant")
    if kind == "sin_power":
        return sin_power_kernel(float(data.get("d", default_kernel_shift(d0))), int(data.get("power", 2)))
    if kind == "constant":
        return constant_kernel(_pair(data.get("value", 1.0)))
    raise InvalidSpec(f"unknown kernel type {kind!r}")


def forcing_from_dict(data: Optional[dict]) -> ForcingSpec:
    data = data or {"type": "zero"}
    kind = data.get("type", "zero")
    if kind == "zero":
        return ForcingSpec.zero()
    if kind == "sine":
        return sine_forcing()
    if kind == "gaussian":
        return gaussian_forcing(float(data.get("c", 0.5)), _pair(data.get("center", 0.0)),
                                _pair(data.get("amplitude", 1.0)))
    raise InvalidSpec(f"unknown forcing type {kind!r}")


def _is_transmission(data: dict) -> bool:
    return "omega0" in data


def _transmission_problem(data: dict):
    try:
        return TransmissionProblemModel.model_validate(data).to_problem()
    except ValidationError as e:
        raise ParseError(f"invalid transmission problem: {e.errors()[0]['msg']}",
                         errors=[err["msg"] for err in e.errors()]) from e


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    data = _load_json(args.spec)
    reports = []
    if _is_transmission(data):
        problem = _transmission_problem(data)
        fact = derive_angles(problem)
        reports.append(admissible_weight(problem, fact))
        payload = {"kind": "transmission", "angles": fact.to_dict()}
    else:
        if "omega" not in data:
            raise ParseError("spec needs an 'omega' entry")
        spec = omega_from_dict(data["omega"])
        params = params_from_dict(data.get("params", {}))
        sigma = _pair(data.get("sigma", 1.0))
        reports.append(validate_hypotheses(spec, params, sigma=sigma))
        d0 = float(data.get("d0", 0.5))
        forcing = forcing_from_dict(data.get("forcing"))
        reports.append(validate_kernel(kernel_from_dict(data.get("kernel"), d0), forcing))
        if not forcing.is_zero:
            reports.append(validate_forcing(forcing, sigma))
        payload = {"kind": "equation"}
    passed = all(r.passed for r in reports)
    payload.update(passed=passed, reports=[r.to_dict() for r in reports])
    _write_json(args.output, payload)
    for r in reports:
        for c in r.failed():
            logger.warning(f"{r.subject}: {c.clause} failed ({c.detail})")
    return 0 if passed else 2


def cmd_solve(args) -> int:
    data = _load_json(args.spec)
    if "omega" not in data:
        raise ParseError("spec needs an 'omega' entry")
    spec = omega_from_dict(data["omega"])
    params = params_from_dict(data.get("params", {}))
    grid = _load_json(args.points)
    if isinstance(grid, list):
        grid = {"points": grid}
    sigma = _pair(grid.get("sigma", data.get("sigma", 1.0)))
    points = [_pair(p) for p in grid.get("points", [])]

    sol = build(spec, params, plugin_from_dict(data.get("plugin")), args.truncation, sigma)
    forcing = forcing_from_dict(data.get("forcing"))
    contour = ContourSpec(d0=args.d0, T=args.T, nodes_per_unit=args.nodes)
    kernel = kernel_from_dict(data.get("kernel"), args.d0)

    rows = []
    flagged = 0
    for z in points:
        try:
            value = 0j
            residual, tail = 0.0, 0.0
            if not sol.plugin.is_zero:
                value += sol.evaluate(z, sigma)
                residual = sol.residual(z, sigma)
            if not forcing.is_zero:
                part = solve_particular(sol, forcing, kernel, contour, z, sigma)
                value += part.value
                tail = part.tail_estimate
                residual = max(residual, residual_inhomogeneous(sol, forcing, kernel, contour, z, sigma))
            rows.append([fmt(z.real), fmt(z.imag), fmt(value.real), fmt(value.imag),
                         fmt(residual), fmt(tail), "ok"])
        except RegionViolation as e:
            flagged += 1
            logger.warning(f"z={z}: {e.message}")
            nan = fmt(math.nan)
            rows.append([fmt(z.real), fmt(z.imag), nan, nan, nan, nan, "region_violation"])
    _write_csv(args.output, ["re_z", "im_z", "re_Y", "im_Y", "residual", "tail_est", "flag"], rows)
    logger.info(f"solved at {len(points)} points, {flagged} flagged")
    if points and flagged == len(points):
        logger.error("every point violates the admissible region")
        return RegionViolation.exit_code
    return 0


def cmd_zeros(args) -> int:
    spec = TrigCoefficientSpec(form=args.form, theta1=args.theta1, theta2=args.theta2,
                               p=args.p, q=args.q, q2=args.q2)
    table = find_zeros(spec)
    rows = [[str(i), fmt(loc), str(m), fmt(res), fmt(lo), fmt(hi)] for i, loc, m, res, lo, hi in table.csv_rows()]
    _write_csv(args.output, ["index", "location", "multiplicity", "residual", "bracket_lo", "bracket_hi"], rows)
    logger.info(f"{spec.label}: K={table.count}, rule {table.lattice_rule}")
    return 0


def cmd_factorize(args) -> int:
    spec = TrigCoefficientSpec.from_dict(_load_json(args.spec))
    form = factorize(spec, args.truncation)
    axis = np.linspace(-args.radius, args.radius, args.grid)
    rows = []
    for x in axis:
        for y in axis:
            z = complex(x, y)
            exact = complex(spec.direct(z))
            if not np.isfinite(exact) or abs(exact) < 1e-8:
                continue
            cmp = form.compare(z, args.truncation, args.extrapolate)
            rows.append([fmt(x), fmt(y), fmt(cmp["product"].real), fmt(cmp["product"].imag),
                         fmt(exact.real), fmt(exact.imag), fmt(cmp["relative_error"])])
    _write_csv(args.output, ["re_z", "im_z", "re_product", "im_product", "re_direct", "im_direct",
                             "relative_error"], rows)
    logger.info(f"{form.label}: {len(rows)} grid points")
    return 0


def cmd_transmission(args) -> int:
    problem = _transmission_problem(_load_json(args.problem))
    grid = _load_json(args.grid)
    quad = QuadConfig.from_dict(grid.get("quad", {}))
    d0 = float(grid.get("d0", 0.5))
    report_path = args.output.with_suffix(".report.json")

    fact = factorize_G(problem, grid.get("truncation", args.truncation))
    admissible = admissible_weight(problem, fact, d0)
    report = {"angles": fact.to_dict(), "admissibility": admissible.to_dict()}
    if not admissible.passed:
        _write_json(report_path, report)
        args.extra_outputs.append(report_path)
        raise InvalidWeight(f"weight s={problem.weight_s} is not admissible",
                            window=admissible.notes.get("window"))

    lam_samples = [0.0, 0.5, 1.5]
    report["G_composition_defect"] = max(abs(build_G(problem, l) - G_composition(problem, l))
                                         / max(abs(build_G(problem, l)), 1e-300) for l in lam_samples)
    report["flux_residual"] = max(flux_residual(problem, l) for l in lam_samples)
    g0 = G_at_zero(problem, fact)
    report["G0"] = [g0.real, g0.imag]
    sol_h = None
    if problem.s_star != 0.0:
        sol_h = build_Vh(problem, fact, d0=d0)
        report["vh_residual"] = sol_h.residual(0.25j, 1.0)

    points = [tuple(p) for p in grid.get("points", [])]
    if not points:
        raise ParseError("grid needs a non-empty 'points' list of [x1, x2, t]")
    values = field_grid(problem, fact, points, quad, d0, sol_h)
    rows = [[fmt(v.x1), fmt(v.x2), fmt(v.t), fmt(v.U1.real), fmt(v.U2.real), fmt(v.err_est)] for v in values]
    report["max_imaginary_part"] = max((max(abs(v.U1.imag), abs(v.U2.imag)) for v in values), default=0.0)
    _write_csv(args.output, ["x1", "x2", "t", "U1", "U2", "err_est"], rows)
    _write_json(report_path, report)
    args.extra_outputs.append(report_path)
    return 0


def cmd_bounds(args) -> int:
    family = SequenceFamily(FamilyKind.H, 1, AffinePowerGenerator(c1=args.coef, p=args.power))
    reports = [appendix_bounds(family, args.c_star, complex(args.re, y)) for y in args.im]
    check = envelope_check(reports, args.slack)
    rows = []
    for rep in reports:
        for key in sorted(rep.sums):
            rows.append([fmt(abs(rep.z)), key, fmt(rep.sums[key]), fmt(rep.envelopes[key]), fmt(rep.tails[key])])
    _write_csv(args.output, ["abs_z", "sum", "value", "envelope", "tail"], rows)
    verdict_path = args.output.with_suffix(".verdict.json")
    _write_json(verdict_path, {"reports": [r.to_dict() for r in reports], "check": check.to_dict()})
    args.extra_outputs.append(verdict_path)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fde", description="Functional difference equation solver")
    parser.add_argument("--log-level", default=None, help="overrides FDE_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check hypotheses, kernel, forcing or a transmission weight")
    p.add_argument("spec", type=Path)
    p.add_argument("-o", "--output", type=Path, default=Path("report.json"))
    p.set_defaults(func=cmd_validate, inputs=["spec"])

    p = sub.add_parser("solve", help="evaluate Y = Y_h + Y_ih at points")
    p.add_argument("spec", type=Path)
    p.add_argument("points", type=Path)
    p.add_argument("-o", "--output", type=Path, default=Path("solution.csv"))
    p.add_argument("--d0", type=float, default=0.5)
    p.add_argument("--truncation", type=int, default=None)
    p.add_argument("--T", type=float, default=40.0)
    p.add_argument("--nodes", type=int, default=40)
    p.set_defaults(func=cmd_solve, inputs=["spec", "points"])

    p = sub.add_parser("zeros", help="zero table of S+-")
    p.add_argument("--form", choices=["s_plus", "s_minus"], default="s_plus")
    p.add_argument("--theta1", type=float, default=0.0)
    p.add_argument("--theta2", type=float, default=0.0)
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--q2", type=float, default=2.0)
    p.add_argument("-o", "--output", type=Path, default=Path("zeros.csv"))
    p.set_defaults(func=cmd_zeros, inputs=[])

    p = sub.add_parser("factorize", help="product form against the closed form on a grid")
    p.add_argument("spec", type=Path)
    p.add_argument("--radius", type=float, default=5.0)
    p.add_argument("--grid", type=int, default=11)
    p.add_argument("--truncation", type=int, default=None)
    p.add_argument("--extrapolate", action="store_true")
    p.add_argument("-o", "--output", type=Path, default=Path("factorize.csv"))
    p.set_defaults(func=cmd_factorize, inputs=["spec"])

    p = sub.add_parser("transmission", help="fields of the transmission problem on a grid")
    p.add_argument("problem", type=Path)
    p.add_argument("grid", type=Path)
    p.add_argument("--truncation", type=int, default=None)
    p.add_argument("-o", "--output", type=Path, default=Path("field.csv"))
    p.set_defaults(func=cmd_transmission, inputs=["problem", "grid"])

    p = sub.add_parser("bounds", help="the four tail sums against their envelopes")
    p.add_argument("--coef", type=float, default=1.0, help="b(n) = coef * n^power")
    p.add_argument("--power", type=float, default=2.0)
    p.add_argument("--c-star", type=float, default=1.0)
    p.add_argument("--re", type=float, default=0.5)
    p.add_argument("--im", type=float, nargs="+", default=[50.0, 100.0, 200.0, 400.0])
    p.add_argument("--slack", type=float, default=1.5)
    p.add_argument("-o", "--output", type=Path, default=Path("bounds.csv"))
    p.set_defaults(func=cmd_bounds, inputs=[])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level.upper() if args.log_level else None)
    args.extra_outputs = []
    inputs = [getattr(args, name) for name in args.inputs]
    manifest = RunManifest(command=" ".join(["fde", args.command] + [str(p) for p in inputs]),
                           input_digest="", tolerances=_tolerances())
    started = time.perf_counter()
    try:
        manifest.input_digest = _digest(inputs) if inputs else hashlib.sha256(
            json.dumps({k: v for k, v in vars(args).items() if k not in ("func", "extra_outputs", "output")},
                       sort_keys=True, default=str).encode()).hexdigest()
    except OSError as e:
        logger.error(f"cannot read input: {e}")
        return ParseError.exit_code
    try:
        code = args.func(args)
    except FDEError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        print(json.dumps(e.to_dict(), default=str), file=sys.stderr)
        code = e.exit_code
    manifest.timings["total_seconds"] = time.perf_counter() - started
    manifest.outputs = [str(p) for p in [args.output] + args.extra_outputs if Path(p).exists()]
    manifest.write(args.output.with_name(args.output.name + ".manifest.json"))
    return code
