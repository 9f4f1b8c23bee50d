"""Acceptance criteria.  Each test prints one PASS/FAIL line before asserting."""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from cloakbound.cli import main
from cloakbound.cloaking import (
    CloakProblem,
    SweepResult,
    build_H_and_sumrule,
    check_herglotz_structure,
    check_lossless_monotonicity,
    check_lossy_bound,
    dispersive_obstacle_check,
    evaluate_F,
    F_infinity,
    F_infinity_lower_bound,
    impossibility_certificate,
    sweep,
)
from cloakbound.composites import (
    MultiplicationOperator,
    dtn_via_effective,
    effective_affine,
    effective_operator,
    effective_operator_via_inverse,
    random_coercive_field,
    random_positive_field,
    variational_bounds,
    wiener_bounds,
)
from cloakbound.fem import assemble, dtn_matrix, quadratic_form
from cloakbound.geometry import build_mesh
from cloakbound.herglotz import compose_uniform, sumrule_integral
from cloakbound.hodge import build_hodge_basis, project
from cloakbound.materials import ConstantTensor, default_cplus_grid

from conftest import INTERVAL, layered_field, lorentz, record_acceptance, two_phase

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def rel(a, b):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max() / np.abs(b).max())


def make(mesh, cloak, obstacle=None, **kw):
    mask, model = two_phase(mesh, cloak, obstacle)
    return CloakProblem.build(mesh, mask, model, INTERVAL, **kw)


@pytest.fixture(scope="module")
def rng_acc():
    return np.random.default_rng(1)


def test_01_central_identity(rng_acc):
    t0 = time.perf_counter()
    mesh = build_mesh(12, 12)
    basis = build_hodge_basis(mesh)
    nb = mesh.boundary_nodes.size
    worst = 0.0
    for _ in range(5):
        a = random_coercive_field(rng_acc, mesh.n_triangles)
        M_fem, M_eff = dtn_matrix(assemble(mesh, a)), dtn_via_effective(basis, a)
        for _ in range(5):
            v = rng_acc.normal(size=nb) + 1j * rng_acc.normal(size=nb)
            q = quadratic_form(M_fem, v)
            worst = max(worst, abs(q - quadratic_form(M_eff, v)) / abs(q))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    record_acceptance(1, "FEM and effective-operator DtN forms agree", ok,
                      f"max rel diff {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_02_hodge_completeness():
    b = build_hodge_basis(build_mesh(16, 16))
    c = np.tile([1.0, -0.5], (b.dim // 2, 1))
    resid = b.norm(c - project(b, "U", c)) / b.norm(c)
    gram = b.cross_gram_max()
    ok = b.dims == (63, 225, 736) and sum(b.dims) == 1024 and gram <= 1e-12 and resid <= 1e-12
    record_acceptance(2, "Hodge dimensions, orthogonality, constants in U", ok,
                      f"dims {b.dims}, cross-Gram {gram:.1e}, constant residual {resid:.1e}")
    assert ok


def test_03_dual_route(rng_acc):
    b = build_hodge_basis(build_mesh(16, 16))
    n = b.dim // 2
    route = max(rel(effective_operator_via_inverse(b, a).matrix, effective_operator(b, a).matrix)
                for a in (random_coercive_field(rng_acc, n) for _ in range(10)))
    a = random_coercive_field(rng_acc, n)
    A = effective_operator(b, a).matrix
    const = np.abs(effective_operator(b, 2.5 * np.broadcast_to(np.eye(2), (n, 2, 2))).matrix
                   - 2.5 * np.eye(b.dims[0])).max()
    lam = 2 + 1j
    homog = rel(effective_operator(b, lam * a).matrix, lam * A)
    adj = rel(effective_operator(b, MultiplicationOperator(a).adjoint()).matrix, A.conj().T)
    ok = route <= 1e-10 and const <= 1e-12 and homog <= 1e-12 and adj <= 1e-12
    record_acceptance(3, "Schur and block-inverse effective operators", ok,
                      f"route {route:.1e}, cI {const:.1e}, scaling {homog:.1e}, adjoint {adj:.1e}")
    assert ok


def test_04_variational_sandwiches(rng_acc):
    b = build_hodge_basis(build_mesh(12, 12))
    worst = np.inf
    for _ in range(10):
        a = random_positive_field(rng_acc, b.dim // 2)
        worst = min(worst, *variational_bounds(b, a).margins)
        worst = min(worst, *wiener_bounds(b.mesh, a, effective_affine(b, a).matrix).margins)
    ok = worst >= -1e-10
    record_acceptance(4, "variational and Wiener sandwiches", ok, f"min eigenvalue margin {worst:.2e}")
    assert ok


def test_05_laminate_oracle():
    mesh = build_mesh(16, 16)
    b = build_hodge_basis(mesh)
    field = layered_field(mesh)
    aD = effective_affine(b, field).matrix
    target = np.diag([1.5, 2.0])
    err = float(np.abs(aD - target).max())
    w = wiener_bounds(mesh, field, aD)
    ok = err <= 1e-10 and w.holds()
    record_acceptance(5, "laminate a^D = diag(1.5, 2)", ok,
                      f"a^D diag = ({aD[0, 0].real:.6f}, {aD[1, 1].real:.6f}), max error {err:.2e}")
    assert ok


def test_06_F_infinity_lower_bound(mesh32):
    p = make(mesh32, lorentz(1.0, 2.0), n_random=0)
    Fi = F_infinity(p, "e1")
    lb = F_infinity_lower_bound(0.25, 0.75, 2.0, 1.0, 1.0, (1.0, 0.0))
    far = evaluate_F(p, "e1", 1e3j)
    d = abs(far - Fi) / abs(Fi)
    ok = Fi >= 1 / 7 - 1e-10 and abs(lb - 1 / 7) < 1e-15 and d <= 1e-3
    record_acceptance(6, "F_inf above its lower bound 1/7", ok, f"F_inf {Fi:.6f}, F(1000i) rel diff {d:.1e}")
    assert ok


def test_07_herglotz_structure(mesh32):
    t0 = time.perf_counter()
    p = make(mesh32, lorentz(1.0, 2.0, 0.1), n_random=2)
    r = check_herglotz_structure(p, cplus_grid=default_cplus_grid(0.1, 5.0, 10))
    elapsed = time.perf_counter() - t0
    ok = r.details["min_im_omega_F"] >= -1e-10 and r.details["n_points"] == 100 and elapsed < 60
    record_acceptance(7, "Im[omega F] >= 0 on a grid in the upper half-plane", ok,
                      f"min {r.details['min_im_omega_F']:.2e}, {elapsed:.1f} s")
    assert ok


def test_08_lossless_monotonicity(mesh32):
    s = sweep(make(mesh32, lorentz(1.0, 2.0), n_random=2), n=100)
    margins = [check_lossless_monotonicity(s, n).margin for n in s.names]
    im = float(np.abs(s.F.imag).max())
    ok = min(margins) >= -1e-9 and im <= 1e-12
    record_acceptance(8, "lossless monotonicity over all grid pairs", ok,
                      f"min margin {min(margins):.2e}, max |Im F| {im:.1e}")
    assert ok


def test_09_drude_sharpness():
    w = np.linspace(0.5, 1.0, 100)
    Fi, w0, F0 = 0.3, 0.8, 0.02
    F = Fi - w0**2 * (Fi - F0) / w**2
    s = SweepResult.from_arrays(w, {"d": F}, {"d": Fi}, {"d": 1.0})
    r = check_lossless_monotonicity(s, "d")
    g = w**2 * (F - Fi)
    spread = float(np.abs(g[:, None] - g[None, :]).max())
    ok = r.passed and spread <= 1e-12
    record_acceptance(9, "Drude response makes monotonicity an equality", ok, f"max pair gap {spread:.1e}")
    assert ok


def test_10_lossy_bound(mesh32):
    s = sweep(make(mesh32, lorentz(1.0, 2.0, 0.1), n_random=2), n=100)
    margin = min(check_lossy_bound(s, n).margin for n in s.names)
    w = np.linspace(1.0, 2.0, 201)
    d = check_lossy_bound(SweepResult.from_arrays(w, {"v": 1 - 2 / w**2}, {"v": 1.0}, {"v": 1.0}, False), "v")
    ok = (margin >= -1e-9 and abs(d.details["lhs"] - 0.75) < 1e-12
          and abs(d.details["max_abs_omega2_F"] - 2.0) < 1e-12 and d.passed)
    record_acceptance(10, "lossy bound on a damped sweep and on Drude", ok,
                      f"sweep margin {margin:.3e}, Drude lhs {d.details['lhs']}, max {d.details['max_abs_omega2_F']}")
    assert ok


def test_11_sumrule_numerics():
    w = np.linspace(np.sqrt(0.5), np.sqrt(2.0), 301)
    x0, delta = 1.0, 0.2
    s = SweepResult.from_arrays(w, {"a": 1 - x0 / w**2}, {"a": 1.0}, {"a": 1.0})
    ratio = build_H_and_sumrule(s, "a", delta).details["ratio"]
    mass = sumrule_integral(lambda z: 1 / (0.5 - z), (0.0, 1.0), points=[0.5]).value
    d = 0.3
    comp = compose_uniform(lambda z: 1j * d, d, 1j)
    ok = abs(ratio - 0.5) <= 1e-6 and abs(mass - 1) <= 1e-4 and abs(comp - 1j * np.pi / (4 * d)) <= 1e-12
    record_acceptance(11, "sum-rule benchmarks", ok, f"ratio {ratio:.8f}, mass {mass:.6f}, composition {comp:.6f}")
    assert ok


def test_12_dispersive_obstacle(mesh16):
    p = make(mesh16, lorentz(0.1, 0.3), lorentz(1.0, 2.5), n_random=2)
    out = dispersive_obstacle_check(p, 0.75, np.linspace(*INTERVAL, 100))
    hyp, order = out["results"]["obstacle_hypotheses"], out["results"]["ordering"]
    tm = hyp.details["tensor_monotonicity_margin"]
    ok = tm >= -1e-12 and order.margin >= -1e-9 and hyp.passed
    record_acceptance(12, "dispersive obstacle against its frozen copy", ok,
                      f"tensor margin {tm:.2e}, ordering margin {order.margin:.2e}")
    assert ok


def test_13_impossibility(mesh16):
    c = impossibility_certificate(make(mesh16, ConstantTensor(np.eye(2)), n_random=0))
    v = impossibility_certificate(make(mesh16, ConstantTensor(np.eye(2)), ConstantTensor(np.eye(2)), n_random=0))
    ok = c["certified"] and c["F_inf"] > 0 and not v["certified"] and "no contradiction" in v["message"]
    record_acceptance(13, "impossibility certificate", ok, f"F_inf {c['F_inf']:.4f}; vacuum: {v['message']}")
    assert ok


def test_14_determinism(tmp_path):
    reports = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code = main(["verify-identities", "--config", str(CONFIGS / "identities.yaml"), "--out", str(out)])
        rep = json.loads((out / "report.json").read_text())
        rep.pop("timing")
        reports.append((code, json.dumps(rep, sort_keys=True)))
    ok = reports[0] == reports[1] and reports[0][0] == 0
    record_acceptance(14, "verify-identities is deterministic", ok, f"exit codes {[r[0] for r in reports]}")
    assert ok
