"""Structured triangulations of a rectangle and obstacle masks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

INTERIOR = 0
BOUNDARY = 1


class GeometryError(ValueError):
    """Raised for degenerate meshes or obstacle specifications."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Criss-cross triangulation of ``[0, width] x [0, height]``.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, 2)
        Node coordinates, numbered row by row (``k = j * (nx + 1) + i``).
    triangles : ndarray, shape (n_triangles, 3)
        Counter-clockwise node index triples.
    node_class : ndarray of int
        ``INTERIOR`` or ``BOUNDARY`` per node.
    triangle_area : ndarray
        Positive area of each triangle.
    """

    width: float
    height: float
    nx: int
    ny: int
    nodes: np.ndarray
    triangles: np.ndarray
    node_class: np.ndarray
    triangle_area: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_class == BOUNDARY)

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_class == INTERIOR)

    @property
    def total_area(self) -> float:
        return float(self.triangle_area.sum())

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    @property
    def gradients(self) -> np.ndarray:
        """Constant gradients of the three local hat functions.

        Returns an array of shape (n_triangles, 3, 2); entry ``[t, k]`` is the
        gradient on triangle ``t`` of the hat of its ``k``-th vertex.
        """
        if "grad" not in self._cache:
            p = self.nodes[self.triangles]
            # rows of the inverse Jacobian give the barycentric gradients
            d1 = p[:, 1] - p[:, 0]
            d2 = p[:, 2] - p[:, 0]
            det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
            g1 = np.stack([d2[:, 1], -d2[:, 0]], axis=1) / det[:, None]
            g2 = np.stack([-d1[:, 1], d1[:, 0]], axis=1) / det[:, None]
            g0 = -g1 - g2
            self._cache["grad"] = np.stack([g0, g1, g2], axis=1)
        return self._cache["grad"]

    def boundary_values(self, func) -> np.ndarray:
        """Evaluate ``func(x, y)`` at the boundary nodes."""
        xy = self.nodes[self.boundary_nodes]
        return np.asarray(func(xy[:, 0], xy[:, 1]))

    def affine_potential(self, e0: Sequence[complex]) -> np.ndarray:
        """Boundary trace of ``-e0 . x``."""
        e0 = np.asarray(e0)
        return -(self.nodes[self.boundary_nodes] @ e0)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted node pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)


def build_mesh(nx: int, ny: int, width: float = 1.0, height: float = 1.0) -> Mesh:
    """Triangulate a rectangle with ``nx`` by ``ny`` cells.

    Each cell is cut along one diagonal; the diagonal direction alternates in a
    checkerboard pattern so that no direction is preferred.
    """
    if int(nx) != nx or int(ny) != ny:
        raise GeometryError("cell counts must be integers")
    nx, ny = int(nx), int(ny)
    if nx < 2 or ny < 2:
        raise GeometryError(f"need nx, ny >= 2 for an interior node, got ({nx}, {ny})")
    if not (width > 0 and height > 0):
        raise GeometryError("width and height must be positive")

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    n00 = j * (nx + 1) + i
    n10 = n00 + 1
    n01 = n00 + nx + 1
    n11 = n01 + 1
    even = (i + j) % 2 == 0
    # even cells: diagonal n00-n11; odd cells: diagonal n10-n01
    t1 = np.where(even[:, None], np.column_stack([n00, n10, n11]), np.column_stack([n00, n10, n01]))
    t2 = np.where(even[:, None], np.column_stack([n00, n11, n01]), np.column_stack([n10, n11, n01]))
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = t1
    triangles[1::2] = t2

    on_edge = (
        np.isclose(nodes[:, 0], 0.0)
        | np.isclose(nodes[:, 0], width)
        | np.isclose(nodes[:, 1], 0.0)
        | np.isclose(nodes[:, 1], height)
    )
    node_class = np.where(on_edge, BOUNDARY, INTERIOR)

    p = nodes[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(area <= 0):
        raise GeometryError("degenerate or clockwise triangle")

    return Mesh(
        width=float(width),
        height=float(height),
        nx=nx,
        ny=ny,
        nodes=nodes,
        triangles=triangles,
        node_class=node_class,
        triangle_area=area,
    )


@dataclass(frozen=True)
class Rectangle:
    x0: float
    y0: float
    x1: float
    y1: float

    @classmethod
    def from_mapping(cls, entry: Mapping[str, float]) -> "Rectangle":
        return cls(float(entry["x0"]), float(entry["y0"]), float(entry["x1"]), float(entry["y1"]))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return (
            (pts[:, 0] >= self.x0)
            & (pts[:, 0] <= self.x1)
            & (pts[:, 1] >= self.y0)
            & (pts[:, 1] <= self.y1)
        )


@dataclass(frozen=True, eq=False)
class ObstacleMask:
    member: np.ndarray
    volume_obstacle: float
    volume_cloak: float

    @property
    def volume_total(self) -> float:
        return self.volume_obstacle + self.volume_cloak


def mark_obstacle(mesh: Mesh, shape: Iterable) -> ObstacleMask:
    """Flag the triangles whose centroid lies in a union of rectangles.

    ``shape`` is a single rectangle or an iterable of rectangles, each given
    as a :class:`Rectangle` or a mapping with keys ``x0, y0, x1, y1``.
    """
    if isinstance(shape, (Rectangle, Mapping)):
        shape = [shape]
    rects = [r if isinstance(r, Rectangle) else Rectangle.from_mapping(r) for r in shape]
    if not rects:
        raise GeometryError("empty obstacle specification")
    c = mesh.centroids
    member = np.zeros(mesh.n_triangles, dtype=bool)
    for r in rects:
        if r.x1 <= r.x0 or r.y1 <= r.y0:
            raise GeometryError(f"degenerate rectangle {r}")
        member |= r.contains(c)
    vol_ob = float(mesh.triangle_area[member].sum())
    vol_cl = float(mesh.triangle_area[~member].sum())
    if vol_ob <= 0:
        raise GeometryError("obstacle has zero volume on this mesh")
    if vol_cl <= 0:
        raise GeometryError("cloak region has zero volume on this mesh")
    member.setflags(write=False)
    return ObstacleMask(member=member, volume_obstacle=vol_ob, volume_cloak=vol_cl)
