"""``cloakbound`` batch front-end.

Physics lives in a YAML config validated against :data:`CONFIG_SCHEMA`;
command-line flags only choose paths, the seed and the number of worker
threads.  Exit status: 0 when no check failed, 1 on a failed check or a
numerical failure, 2 on an invalid config.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np
import yaml

from cloakbound import __version__
from cloakbound.cloaking import (
    REL_TOL,
    CheckResult,
    CloakProblem,
    SweepResult,
    affine_potential,
    approx_cloaking_certificate,
    build_H_and_sumrule,
    check_approximate_cloaking_bounds,
    check_derivative_bound,
    check_herglotz_structure,
    check_lossless_monotonicity,
    check_lossy_bound,
    default_potentials,
    dispersive_obstacle_check,
    F_infinity_crosscheck,
    find_zero,
    frequency_grid,
    impossibility_certificate,
    sweep as run_sweep,
    _jsonable,
)
from cloakbound.composites import (
    MultiplicationOperator,
    effective_affine,
    effective_operator,
    effective_operator_via_inverse,
    random_coercive_field,
    random_positive_field,
    variational_bounds,
    wiener_bounds,
)
from cloakbound.fem import SolverError, assemble, dtn_matrix, quadratic_form
from cloakbound.geometry import GeometryError, build_mesh, mark_obstacle
from cloakbound.herglotz import (
    heaviside_length,
    principal_sqrt_cut_positive,
    sumrule_integral,
    uniform_transform,
)
from cloakbound.hodge import build_hodge_basis, lift, project
from cloakbound.materials import (
    MaterialError,
    PermittivityModel,
    default_cplus_grid,
    law_from_config,
    obstacle_lower_bound,
)

log = logging.getLogger("cloakbound")

CSV_HELP = """\
sweep.csv columns (one row per real frequency):
  omega                 real frequency
  x                     omega**2
  re_F:<name>           real part of F for potential <name>
  im_F:<name>           imaginary part of F
  re_H:<name>           real part of H(x) = x F(sqrt x)
  im_H:<name>           imaginary part of H
  upper:<name>          approximate-cloaking upper envelope (omega <= omega0, else empty)
  lower:<name>          approximate-cloaking lower envelope (omega >= omega0, else empty)
"""

_pole = {
    "type": "object",
    "properties": {"wp2": {"type": "number", "exclusiveMinimum": 0}, "w0": {"type": "number", "minimum": 0},
                   "gamma": {"type": "number", "minimum": 0}},
    "required": ["wp2", "w0"],
    "additionalProperties": False,
}
_matrix = {"type": "array", "minItems": 2, "maxItems": 2,
           "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}}}
_law = {
    "type": "object",
    "properties": {
        "type": {"enum": ["constant", "lorentz", "anisotropic_lorentz"]},
        "tensor": {"oneOf": [{"type": "number"}, _matrix]},
        "poles": {"type": "array", "items": _pole},
        "poles_x": {"type": "array", "items": _pole},
        "poles_y": {"type": "array", "items": _pole},
    },
    "required": ["type"],
    "additionalProperties": False,
}
_rect = {
    "type": "object",
    "properties": {k: {"type": "number"} for k in ("x0", "y0", "x1", "y1")},
    "required": ["x0", "y0", "x1", "y1"],
    "additionalProperties": False,
}
_benchmark = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["affine", "drude", "lorentz"]},
        "x0": {"type": "number", "exclusiveMinimum": 0},
        "F_inf": {"type": "number", "exclusiveMinimum": 0},
        "wp2": {"type": "number", "exclusiveMinimum": 0},
        "w0": {"type": "number", "exclusiveMinimum": 0},
        "gamma": {"type": "number", "minimum": 0},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "interval": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2, "maxItems": 2},
        "expected_ratio": {"type": "number"},
    },
    "required": ["kind", "interval"],
    "additionalProperties": False,
}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cloakbound run configuration",
    "type": "object",
    "properties": {
        "mesh": {
            "type": "object",
            "properties": {"nx": {"type": "integer", "minimum": 2}, "ny": {"type": "integer", "minimum": 2},
                           "width": {"type": "number", "exclusiveMinimum": 0},
                           "height": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["nx", "ny"],
            "additionalProperties": False,
        },
        "obstacle": {"oneOf": [_rect, {"type": "array", "items": _rect, "minItems": 1}]},
        "eps0": {"type": "number", "exclusiveMinimum": 0},
        "materials": {
            "type": "object",
            "properties": {"obstacle": _law, "cloak": _law},
            "required": ["obstacle", "cloak"],
            "additionalProperties": False,
        },
        "interval": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2, "maxItems": 2},
        "grid": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 3},
                "cplus": {"type": "object",
                          "properties": {"lo": {"type": "number", "exclusiveMinimum": 0},
                                         "hi": {"type": "number", "exclusiveMinimum": 0},
                                         "n": {"type": "integer", "minimum": 1}},
                          "additionalProperties": False},
            },
            "additionalProperties": False,
        },
        "potentials": {
            "type": "object",
            "properties": {
                "affine": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
                "n_random": {"type": "integer", "minimum": 0},
                "reciprocal": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "route": {"enum": ["fem", "effective"]},
        "eta": {"type": ["number", "null"], "minimum": 0},
        "omega0": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "auto"}]},
        "require_contrast": {"type": "boolean"},
        "lossy_subintervals": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
        "sumrule": {
            "type": "object",
            "properties": {"delta": {"type": ["number", "null"], "exclusiveMinimum": 0},
                           "benchmarks": {"type": "array", "items": _benchmark}},
            "additionalProperties": False,
        },
        "identities": {
            "type": "object",
            "properties": {"n": {"type": "integer", "minimum": 2}, "n_fields": {"type": "integer", "minimum": 1},
                           "n_potentials": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
        "export_dtn": {"type": "boolean"},
    },
    "additionalProperties": False,
}

DEFAULTS: dict[str, Any] = {
    "mesh": {"nx": 32, "ny": 32, "width": 1.0, "height": 1.0},
    "obstacle": {"x0": 0.25, "y0": 0.25, "x1": 0.75, "y1": 0.75},
    "eps0": 1.0,
    "interval": [0.5, 1.0],
    "grid": {"n": 100, "cplus": {"lo": 0.1, "hi": 5.0, "n": 10}},
    "potentials": {"affine": [[1.0, 0.0], [0.0, 1.0]], "n_random": 4},
    "route": "fem",
    "eta": None,
    "omega0": "auto",
    "require_contrast": False,
    "lossy_subintervals": [],
    "sumrule": {"delta": None, "benchmarks": []},
    "identities": {"n": 12, "n_fields": 5, "n_potentials": 5},
    "seed": 0,
    "export_dtn": False,
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        out[k] = _merge(base[k], v) if isinstance(v, dict) and isinstance(base.get(k), dict) else v
    return out


def load_config(path: str | Path, seed: int | None = None) -> dict:
    """Read, validate and complete a config; physical constraints raise :class:`ConfigError`."""
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc
    cfg = _merge(DEFAULTS, raw)
    if seed is not None:
        cfg["seed"] = seed
    lo, hi = cfg["interval"]
    if not lo < hi:
        raise ConfigError(f"interval must satisfy omega_- < omega_+, got {cfg['interval']}")
    for a, b in cfg["lossy_subintervals"]:
        if not lo <= a < b <= hi:
            raise ConfigError(f"lossy subinterval [{a}, {b}] is not inside the interval")
    if isinstance(cfg["omega0"], (int, float)) and not lo <= cfg["omega0"] <= hi:
        raise ConfigError("omega0 must lie in the interval")
    for b in cfg["sumrule"]["benchmarks"]:
        if not b["interval"][0] < b["interval"][1]:
            raise ConfigError("benchmark interval must be increasing")
    if "materials" in cfg and cfg["require_contrast"]:
        try:
            law = law_from_config(cfg["materials"]["obstacle"])
        except (MaterialError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if not law.dispersive:
            t = law.high_frequency(cfg["eps0"])
            if np.linalg.eigvalsh(0.5 * (t + t.conj().T)).min() <= cfg["eps0"]:
                raise ConfigError("require_contrast: the obstacle permittivity must exceed eps0")
    return cfg


def build_problem(cfg: dict) -> CloakProblem:
    if "materials" not in cfg:
        raise ConfigError("this command needs a 'materials' section")
    m = cfg["mesh"]
    try:
        mesh = build_mesh(m["nx"], m["ny"], m["width"], m["height"])
        mask = mark_obstacle(mesh, cfg["obstacle"])
        model = PermittivityModel.two_phase(
            mask,
            law_from_config(cfg["materials"]["obstacle"]),
            law_from_config(cfg["materials"]["cloak"]),
            cfg["eps0"],
            tuple(cfg["interval"]),
        )
    except (GeometryError, MaterialError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    pot = cfg["potentials"]
    recip = model.reciprocal and pot.get("reciprocal", True)
    pots = [affine_potential(mesh, e0, f"affine{i + 1}" if len(pot["affine"]) > 2 else f"e{i + 1}")
            for i, e0 in enumerate(pot["affine"])]
    randoms = default_potentials(mesh, pot["n_random"], cfg["seed"], complex_valued=recip)[2:]
    return CloakProblem.build(mesh, mask, model, cfg["interval"], pots + list(randoms), eta=cfg["eta"],
                              reciprocal=recip, route=cfg["route"])


# ---------------------------------------------------------------------------
# identity suite


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def identity_suite(n: int = 12, seed: int = 0, n_fields: int = 5, n_potentials: int = 5) -> list[CheckResult]:
    """Exact discrete identities on random instances (deterministic for a seed)."""
    rng = np.random.default_rng(seed)
    mesh = build_mesh(n, n)
    basis = build_hodge_basis(mesh)
    T, nb = mesh.n_triangles, mesh.boundary_nodes.size
    out: list[CheckResult] = []

    # Hodge structure
    cg, od = basis.cross_gram_max(), basis.orthonormality_defect()
    const = np.tile([0.3, -0.7], (T, 1))
    resid = basis.norm(const - project(basis, "U", const)) / basis.norm(const)
    expected = (nb - 1, mesh.interior_nodes.size, 2 * T - nb + 1 - mesh.interior_nodes.size)
    ok = basis.dims == expected and max(cg, od, resid) <= 1e-12
    out.append(CheckResult("hodge_decomposition", "pass" if ok else "fail", -max(cg, od, resid),
                           {"dims": list(basis.dims), "expected_dims": list(expected), "cross_gram": cg,
                            "orthonormality": od, "constants_residual": resid}))

    # central identity: FEM quadratic form vs (a_* Pi v, Pi v)
    worst = 0.0
    for _ in range(n_fields):
        a = random_coercive_field(rng, T)
        M = dtn_matrix(assemble(mesh, a)).matrix
        A = effective_operator(basis, a).matrix
        for _ in range(n_potentials):
            v = rng.normal(size=nb) + 1j * rng.normal(size=nb)
            q_fem = quadratic_form(M, v)
            Pv = basis.lift_coords @ v
            q_eff = complex(Pv.conj() @ A @ Pv)
            worst = max(worst, abs(q_fem - q_eff) / abs(q_fem))
    out.append(CheckResult("dtn_equals_lifted_effective", "pass" if worst <= 1e-9 else "fail", 1e-9 - worst,
                           {"max_relative_difference": worst, "n_fields": n_fields, "n_potentials": n_potentials}))

    # dual-route effective operator and algebraic symmetries
    worst_route = worst_sym = 0.0
    for _ in range(2 * n_fields):
        a = random_coercive_field(rng, T)
        A = effective_operator(basis, a).matrix
        worst_route = max(worst_route, _rel(effective_operator_via_inverse(basis, a).matrix, A))
        lam = complex(rng.normal(), rng.normal())
        worst_sym = max(worst_sym, _rel(effective_operator(basis, lam * a).matrix, lam * A))
        adj = np.conj(np.swapaxes(a, -1, -2))
        worst_sym = max(worst_sym, _rel(effective_operator(basis, adj).matrix, A.conj().T))
    c = 2.5
    cI = effective_operator(basis, np.broadcast_to(c * np.eye(2), (T, 2, 2)).copy()).matrix
    worst_sym = max(worst_sym, _rel(cI, c * np.eye(cI.shape[0])))
    ok = worst_route <= 1e-10 and worst_sym <= 1e-12
    out.append(CheckResult("effective_operator_routes", "pass" if ok else "fail",
                           min(1e-10 - worst_route, 1e-12 - worst_sym),
                           {"schur_vs_block_inverse": worst_route, "symmetry_defect": worst_sym}))

    # variational and Wiener sandwiches
    worst_var = worst_wiener = np.inf
    for _ in range(2 * n_fields):
        a = random_positive_field(rng, T)
        op = MultiplicationOperator(a)
        eff = effective_operator(basis, op)
        worst_var = min(worst_var, min(variational_bounds(basis, op, eff).margins))
        aD = effective_affine(basis, op, eff).matrix
        worst_wiener = min(worst_wiener, min(wiener_bounds(mesh, a, aD).margins))
    ok = min(worst_var, worst_wiener) >= -1e-10
    out.append(CheckResult("variational_sandwiches", "pass" if ok else "fail", min(worst_var, worst_wiener),
                           {"variational_margin": worst_var, "wiener_margin": worst_wiener}))

    # lift reproduces affine gradients
    e0 = rng.normal(size=2)
    g = lift(basis, mesh.affine_potential(e0))
    err = float(np.abs(g + e0).max())
    out.append(CheckResult("lift_of_affine_data", "pass" if err <= 1e-10 else "fail", 1e-10 - err,
                           {"max_error": err}))
    return out


# ---------------------------------------------------------------------------
# sum-rule benchmarks


def _benchmark_H(b: dict):
    """Analytic ``H(z) = z F(sqrt z)`` and its ``F_inf`` for a benchmark entry."""
    kind = b["kind"]
    Fi = float(b.get("F_inf", 1.0))
    if kind in ("affine", "drude"):
        x0 = float(b.get("x0", np.mean(np.square(b["interval"]))))
        return (lambda z: Fi * (z - x0)), Fi, [x0]
    wp2, w0, g = float(b.get("wp2", 1.0)), float(b.get("w0", 1.0)), float(b.get("gamma", 0.1))

    def H(z):
        r = principal_sqrt_cut_positive(z)
        return z * (Fi + wp2 / (w0**2 - z - 1j * g * r))
    return H, Fi, [w0**2]


def run_benchmark(b: dict, n: int = 2001) -> CheckResult:
    lo, hi = b["interval"]
    x = np.linspace(lo**2, hi**2, n)
    H, Fi, peaks = _benchmark_H(b)
    Hx = np.array([H(complex(xx)) for xx in x])
    delta = float(b.get("delta", np.abs(Hx).max()))
    length = heaviside_length(x, Hx, delta)
    bound = 4 * delta / Fi
    crossings = list(x[np.flatnonzero(np.diff(np.sign(np.abs(Hx) - delta)))]) + peaks
    sr = sumrule_integral(uniform_transform(H, delta), (x[0], x[-1]), points=crossings)
    details = {"kind": b["kind"], "delta": delta, "F_inf": Fi, "heaviside_length": length,
               "heaviside_bound": bound, "ratio": length / bound, "sumrule_value": sr.value,
               "sumrule_error": sr.error, "sumrule_bound": 1 / Fi}
    margin = min(bound - length, 1 / Fi - sr.value + 1e-6)
    ok = margin >= -1e-9
    if "expected_ratio" in b:
        dev = abs(length / bound - b["expected_ratio"])
        details["expected_ratio"] = b["expected_ratio"]
        details["ratio_deviation"] = dev
        ok = ok and dev <= 1e-6
    return CheckResult(f"sumrule_benchmark[{b['kind']}]", "pass" if ok else "fail", margin, details)


# ---------------------------------------------------------------------------
# commands


def _auto_omega0(problem: CloakProblem, s: SweepResult) -> float:
    """First sign change of a real affine ``F`` on the sweep, else the midpoint."""
    for k, p in enumerate(problem.potentials):
        if p.e0 is None or not s.lossless:
            continue
        F = s.F[k].real
        idx = np.flatnonzero(np.sign(F[:-1]) * np.sign(F[1:]) < 0)
        if idx.size:
            i = int(idx[0])
            return find_zero(problem, k, (s.omegas[i], s.omegas[i + 1]))
    return float(0.5 * sum(problem.interval))


def cmd_sweep(cfg: dict, jobs: int) -> tuple[list[CheckResult], dict, SweepResult]:
    problem = build_problem(cfg)
    s = run_sweep(problem, frequency_grid(problem.interval, cfg["grid"]["n"]), jobs=jobs)
    extra = {"F_inf": dict(zip(s.names, s.F_inf.tolist())), "G_vac": dict(zip(s.names, s.G_vac.tolist())),
             "lossless": s.lossless}
    return [], extra, s


def cmd_run(cfg: dict, jobs: int) -> tuple[list[CheckResult], dict, SweepResult]:
    problem = build_problem(cfg)
    s = run_sweep(problem, frequency_grid(problem.interval, cfg["grid"]["n"]), jobs=jobs)
    extra: dict[str, Any] = {"F_inf": dict(zip(s.names, s.F_inf.tolist())),
                             "G_vac": dict(zip(s.names, s.G_vac.tolist())), "lossless": s.lossless,
                             "eta_lim": s.eta_lim}
    checks: list[CheckResult] = []
    cp = cfg["grid"]["cplus"]
    checks.append(check_herglotz_structure(problem, None, default_cplus_grid(cp["lo"], cp["hi"], cp["n"])))
    omega0 = _auto_omega0(problem, s) if cfg["omega0"] == "auto" else float(cfg["omega0"])
    extra["omega0"] = omega0

    if problem.model.dispersive_obstacle:
        out = dispersive_obstacle_check(problem, omega0, s.omegas, cfg["eta"], jobs=jobs)
        checks.extend(out["results"].values())
        return checks, extra, s

    for k, name in enumerate(s.names):
        if s.F_inf[k] > s.tol(k) and s.G_vac[k] > 0:
            try:
                cross = F_infinity_crosscheck(problem, k)
                rel = abs(cross - s.F_inf[k]) / abs(s.F_inf[k])
                checks.append(CheckResult(f"F_inf_crosscheck[{name}]", "pass" if rel <= 1e-4 else "fail",
                                          1e-4 - rel, {"F_inf": s.F_inf[k], "limit": cross, "relative": rel}))
            except Exception as exc:  # extrapolation diagnostics are reported, not fatal
                checks.append(CheckResult(f"F_inf_crosscheck[{name}]", "fail", None, {"error": str(exc)}))
        checks.append(check_lossless_monotonicity(s, k))
        checks.append(check_approximate_cloaking_bounds(s, k, omega0, cfg["eta"]))
        checks.append(check_lossy_bound(s, k))
        for sub in cfg["lossy_subintervals"]:
            checks.append(check_lossy_bound(s, k, tuple(sub)))
        checks.append(check_derivative_bound(s, k, omega0))
        checks.append(build_H_and_sumrule(s, k, cfg["sumrule"]["delta"]))

    cert = impossibility_certificate(problem)
    extra["impossibility"] = cert
    extra["approximate_cloaking"] = approx_cloaking_certificate(problem, omega0)
    return checks, extra, s


def cmd_sumrule(cfg: dict, jobs: int) -> tuple[list[CheckResult], dict, SweepResult | None]:
    checks = [run_benchmark(b) for b in cfg["sumrule"]["benchmarks"]]
    s = None
    if "materials" in cfg:
        problem = build_problem(cfg)
        s = run_sweep(problem, frequency_grid(problem.interval, cfg["grid"]["n"]), jobs=jobs)
        checks.extend(build_H_and_sumrule(s, k, cfg["sumrule"]["delta"]) for k in range(len(s.names)))
    return checks, {}, s


def cmd_identities(cfg: dict, jobs: int) -> tuple[list[CheckResult], dict, None]:
    idc = cfg["identities"]
    return identity_suite(idc["n"], cfg["seed"], idc["n_fields"], idc["n_potentials"]), {}, None


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "sumrule": cmd_sumrule, "verify-identities": cmd_identities}


def write_csv(path: Path, s: SweepResult) -> None:
    rows = []
    upper = {k: r for k, r in s.ledger.items() if k.startswith("approximate_cloaking")}
    H = s.H
    header = ["omega", "x"]
    for n in s.names:
        header += [f"re_F:{n}", f"im_F:{n}", f"re_H:{n}", f"im_H:{n}", f"upper:{n}", f"lower:{n}"]
    for j, w in enumerate(s.omegas):
        row: list[Any] = [repr(float(w)), repr(float(w * w))]
        for k, n in enumerate(s.names):
            env_u = env_l = ""
            r = upper.get(f"approximate_cloaking[{n}]")
            if r is not None and r.status != "skipped":
                w0, eta = r.details["omega0"], r.details["eta"]
                Fi, G = s.F_inf[k], s.G_vac[k]
                if w <= w0:
                    env_u = repr(float((-Fi + eta * G) * (w0**2 - w**2) / w**2 + eta * G))
                if w >= w0:
                    env_l = repr(float((Fi + eta * G) * (w**2 - w0**2) / w**2 - eta * G))
            F = s.F[k, j]
            row += [repr(float(F.real)), repr(float(F.imag)), repr(float(H[k, j].real)), repr(float(H[k, j].imag)),
                    env_u, env_l]
        rows.append(row)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def build_report(command: str, cfg: dict, checks: list[CheckResult], extra: dict, elapsed: float) -> dict:
    statuses = [c.status for c in checks]
    return {
        "command": command,
        "status": "fail" if "fail" in statuses else "pass",
        "summary": {s: statuses.count(s) for s in ("pass", "fail", "skipped")},
        "checks": [c.as_dict() for c in checks],
        "results": _jsonable(extra),
        "provenance": {"version": __version__, "seed": cfg["seed"], "mesh": cfg["mesh"], "route": cfg["route"],
                       "relative_tolerance": REL_TOL, "config": _jsonable(cfg)},
        "timing": {"elapsed_seconds": elapsed},
    }


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cloakbound",
        description="Quasistatic cloaking bounds: sweeps, bound checks and operator identities.",
        epilog=CSV_HELP + "\nexit status: 0 no check failed, 1 failed check or numerical failure, 2 invalid config",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="YAML configuration file")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for frequency sweeps")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default="cloakbound-out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        checks, extra, s = COMMANDS[args.command](cfg, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, MaterialError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    report = build_report(args.command, cfg, checks, extra, time.perf_counter() - t0)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if s is not None:
        write_csv(out / "sweep.csv", s)
        if cfg["export_dtn"] and s.problem is not None:
            p = s.problem
            w = s.omegas[len(s.omegas) // 2]
            dtn_matrix(assemble(p.mesh, p.model.eval_field(w), w)).export(out / "dtn_mid.mtx")
    for c in checks:
        log.info("%-45s %s", c.name, c.status)
    print(f"{args.command}: {report['status']} ({report['summary']['pass']} pass, "
          f"{report['summary']['fail']} fail, {report['summary']['skipped']} skipped) -> {out / 'report.json'}")
    return 0 if report["status"] == "pass" else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
