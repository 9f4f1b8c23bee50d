import numpy as np
import pytest
import scipy.io
from hypothesis import given, settings, strategies as st

from cloakbound.composites import random_coercive_field, random_positive_field
from cloakbound.fem import (
    SolverError,
    assemble,
    dtn_matrix,
    energy,
    polarization_reconstruct,
    quadratic_form,
    sesquilinear_form,
    solve_dirichlet,
)
from cloakbound.geometry import build_mesh

from conftest import layered_field


def eye_field(mesh, c=1.0):
    return c * np.broadcast_to(np.eye(2), (mesh.n_triangles, 2, 2)).copy()


def test_row_sums_vanish():
    m = build_mesh(2, 2)
    K = assemble(m, eye_field(m)).matrix
    assert np.abs(K.sum(axis=1)).max() < 1e-14


def test_linearity_in_coefficient(mesh12):
    K1 = assemble(mesh12, eye_field(mesh12)).matrix
    K2 = assemble(mesh12, eye_field(mesh12, 2.0)).matrix
    assert abs(K2 - 2 * K1).max() == 0


def test_symmetric_coefficient_gives_symmetric_matrix(mesh12, rng):
    a = random_positive_field(rng, mesh12.n_triangles, real=True)
    K = assemble(mesh12, a).matrix
    assert abs(K - K.T).max() < 1e-14


def test_shape_validation(mesh12):
    with pytest.raises(ValueError):
        assemble(mesh12, np.ones((3, 2, 2)))
    with pytest.raises(ValueError):
        assemble(mesh12, np.full((mesh12.n_triangles, 2, 2), np.nan))


def test_affine_solution_is_exact(mesh12):
    sys = assemble(mesh12, eye_field(mesh12))
    u = solve_dirichlet(sys, mesh12.affine_potential((1.0, 0.0)))
    assert np.abs(u + mesh12.nodes[:, 0]).max() < 1e-13
    one = solve_dirichlet(sys, np.ones(mesh12.boundary_nodes.size))
    assert np.abs(one - 1).max() < 1e-13


def test_layered_parallel_direction_is_exact(mesh16):
    # data -y runs along the layers: u = -y solves the problem for any layering
    a = layered_field(mesh16)
    sys = assemble(mesh16, a)
    u = solve_dirichlet(sys, mesh16.affine_potential((0.0, 1.0)))
    assert np.abs(u + mesh16.nodes[:, 1]).max() < 1e-12
    assert quadratic_form(dtn_matrix(sys), mesh16.affine_potential((0.0, 1.0))).real == pytest.approx(2.0, rel=1e-12)


def test_layered_series_direction_is_between_means(mesh16):
    # Dirichlet data -x on the whole boundary pins u = -x on the top and bottom
    # edges, so the energy lies strictly between the harmonic and arithmetic means
    a = layered_field(mesh16)
    q = quadratic_form(dtn_matrix(assemble(mesh16, a)), mesh16.affine_potential((1.0, 0.0))).real
    assert 1.5 < q < 2.0


def test_vacuum_energy_of_affine_data(mesh12):
    M = dtn_matrix(assemble(mesh12, eye_field(mesh12, 1.7))).matrix
    e0 = np.array([0.3, -1.2])
    q = quadratic_form(M, mesh12.affine_potential(e0))
    assert q.real == pytest.approx(1.7 * mesh12.total_area * e0 @ e0, rel=1e-12)
    assert abs(q.imag) < 1e-14


def test_constant_potential_has_no_flux(mesh12, rng):
    a = random_coercive_field(rng, mesh12.n_triangles)
    M = dtn_matrix(assemble(mesh12, a)).matrix
    assert abs(quadratic_form(M, np.full(mesh12.boundary_nodes.size, 2.0 - 1j))) < 1e-12
    assert np.abs(M.sum(axis=1)).max() < 1e-12


def test_green_identity(mesh12, rng):
    for _ in range(3):
        a = random_coercive_field(rng, mesh12.n_triangles)
        sys = assemble(mesh12, a)
        v = rng.normal(size=mesh12.boundary_nodes.size) + 1j * rng.normal(size=mesh12.boundary_nodes.size)
        q = quadratic_form(dtn_matrix(sys), v)
        e = energy(sys, a, solve_dirichlet(sys, v))
        assert abs(q - e) <= 1e-12 * abs(q) + 1e-14


def test_positive_coefficient_gives_nonnegative_form(mesh12, rng):
    a = random_positive_field(rng, mesh12.n_triangles, real=True)
    M = dtn_matrix(assemble(mesh12, a)).matrix
    for _ in range(5):
        q = quadratic_form(M, rng.normal(size=M.shape[0]))
        assert abs(q.imag) < 1e-12 and q.real >= 0


def test_reciprocity(mesh12, rng):
    B = random_coercive_field(rng, mesh12.n_triangles)
    a = 0.5 * (B + np.swapaxes(B, -1, -2))  # complex symmetric
    M = dtn_matrix(assemble(mesh12, a)).matrix
    assert np.abs(M - M.T).max() < 1e-12 * np.abs(M).max()


def test_multi_column_solve_matches_single(mesh12, rng):
    a = random_coercive_field(rng, mesh12.n_triangles)
    sys = assemble(mesh12, a)
    V = rng.normal(size=(mesh12.boundary_nodes.size, 3))
    U = solve_dirichlet(sys, V)
    assert np.allclose(U[:, 1], solve_dirichlet(sys, V[:, 1]), rtol=0, atol=1e-13)


def test_wrong_potential_length(mesh12):
    sys = assemble(mesh12, eye_field(mesh12))
    with pytest.raises(ValueError):
        solve_dirichlet(sys, np.zeros(3))
    with pytest.raises(ValueError):
        quadratic_form(dtn_matrix(sys), np.zeros(3))


def test_singular_interior_block():
    m = build_mesh(4, 4)
    with pytest.raises(SolverError):
        assemble(m, np.zeros((m.n_triangles, 2, 2)), omega=1.0).lu


def test_quadratic_form_scaling(mesh12, rng):
    M = dtn_matrix(assemble(mesh12, random_coercive_field(rng, mesh12.n_triangles))).matrix
    v = rng.normal(size=M.shape[0])
    lam = 2 - 3j
    assert quadratic_form(M, lam * v) == pytest.approx(abs(lam) ** 2 * quadratic_form(M, v), rel=1e-12)


def test_polarization(mesh12, rng):
    M = dtn_matrix(assemble(mesh12, random_coercive_field(rng, mesh12.n_triangles))).matrix
    n = M.shape[0]
    for _ in range(5):
        u = rng.normal(size=n) + 1j * rng.normal(size=n)
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        direct = v.conj() @ M @ u
        assert abs(polarization_reconstruct(M, u, v) - direct) <= 1e-12 * abs(direct)
        assert sesquilinear_form(M, u, v) == pytest.approx(direct, rel=1e-14)
    assert polarization_reconstruct(M, u, u) == pytest.approx(quadratic_form(M, u), rel=1e-12)
    assert abs(polarization_reconstruct(M, u, np.zeros(n))) < 1e-12 * np.abs(M).max() * n


def test_export_round_trip(tmp_path, rng):
    m = build_mesh(3, 3)
    dtn = dtn_matrix(assemble(m, random_coercive_field(rng, m.n_triangles)))
    dtn.export(tmp_path / "dtn.mtx")
    back = scipy.io.mmread(str(tmp_path / "dtn.mtx"))
    back = back.toarray() if hasattr(back, "toarray") else back
    assert np.allclose(back, dtn.matrix, rtol=1e-14)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 2**31))
def test_schur_complement_agrees_with_energy(n, seed):
    rng = np.random.default_rng(seed)
    m = build_mesh(n, n)
    a = random_coercive_field(rng, m.n_triangles)
    sys = assemble(m, a)
    v = rng.normal(size=m.boundary_nodes.size)
    q = quadratic_form(dtn_matrix(sys), v)
    assert abs(q - energy(sys, a, solve_dirichlet(sys, v))) <= 1e-11 * abs(q) + 1e-14
