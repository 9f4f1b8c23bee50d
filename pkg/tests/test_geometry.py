import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cloakbound.geometry import BOUNDARY, INTERIOR, GeometryError, Rectangle, build_mesh, mark_obstacle


def test_counts_16():
    m = build_mesh(16, 16)
    assert (m.n_nodes, m.n_triangles) == (289, 512)
    assert m.interior_nodes.size == 225
    assert m.boundary_nodes.size == 64
    assert m.total_area == pytest.approx(1.0, rel=1e-12)


def test_counts_minimal():
    m = build_mesh(2, 2)
    assert (m.n_nodes, m.n_triangles, m.interior_nodes.size) == (9, 8, 1)


@pytest.mark.parametrize("nx, ny", [(1, 4), (4, 0)])
def test_rejects_tiny_grids(nx, ny):
    with pytest.raises(GeometryError):
        build_mesh(nx, ny)


def test_boundary_nodes_lie_on_edges():
    m = build_mesh(5, 7, 2.0, 3.0)
    x, y = m.nodes.T
    on_edge = np.isclose(x, 0) | np.isclose(x, 2.0) | np.isclose(y, 0) | np.isclose(y, 3.0)
    assert np.array_equal(m.node_class == BOUNDARY, on_edge)
    assert set(np.unique(m.node_class)) == {INTERIOR, BOUNDARY}


def test_orientation_and_areas():
    m = build_mesh(6, 4, 1.5, 1.0)
    assert np.all(m.triangle_area > 0)
    p = m.nodes[m.triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    assert np.all(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] > 0)


def test_conforming_edges():
    # Euler: V - E + F = 1 for a triangulated disc
    m = build_mesh(7, 5)
    assert m.n_nodes - m.edges().shape[0] + m.n_triangles == 1
    # interior edges are shared by exactly two triangles
    t = m.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    assert set(counts) == {1, 2}
    assert np.sum(counts == 1) == 2 * (7 + 5)


def test_gradients_sum_to_zero():
    m = build_mesh(4, 4)
    assert np.abs(m.gradients.sum(axis=1)).max() < 1e-12


def test_affine_potential_matches_formula():
    m = build_mesh(3, 3)
    v = m.affine_potential((1.0, 2.0))
    xy = m.nodes[m.boundary_nodes]
    assert np.allclose(v, -(xy[:, 0] + 2 * xy[:, 1]))


def test_standard_obstacle_volumes():
    m = build_mesh(16, 16)
    mask = mark_obstacle(m, Rectangle(0.25, 0.25, 0.75, 0.75))
    assert mask.volume_obstacle == pytest.approx(0.25, abs=1e-12)
    assert mask.volume_cloak == pytest.approx(0.75, abs=1e-12)
    assert mask.volume_total == pytest.approx(m.total_area, abs=1e-12)


def test_obstacle_covering_everything_is_rejected():
    m = build_mesh(4, 4)
    with pytest.raises(GeometryError):
        mark_obstacle(m, Rectangle(0, 0, 1, 1))


def test_empty_obstacle_is_rejected():
    with pytest.raises(GeometryError):
        mark_obstacle(build_mesh(4, 4), [])


def test_disconnected_obstacle():
    m = build_mesh(16, 16)
    rects = [{"x0": 0.0, "y0": 0.0, "x1": 0.25, "y1": 0.25}, Rectangle(0.5, 0.5, 0.75, 0.75)]
    assert mark_obstacle(m, rects).volume_obstacle == pytest.approx(0.125, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(k=st.integers(1, 4), aspect=st.floats(0.5, 2.0))
def test_refinement_keeps_obstacle_volume(k, aspect):
    rect = Rectangle(0.25, 0.25 * aspect, 0.75, 0.5 * aspect)
    coarse = mark_obstacle(build_mesh(4 * k, 4 * k, 1.0, aspect), rect)
    fine = mark_obstacle(build_mesh(8 * k, 8 * k, 1.0, aspect), rect)
    assert fine.volume_obstacle == pytest.approx(coarse.volume_obstacle, rel=1e-12)
    assert coarse.volume_obstacle + coarse.volume_cloak == pytest.approx(aspect, rel=1e-12)
