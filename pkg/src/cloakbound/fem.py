"""P1 finite elements for ``div(a grad u) = 0`` and the discrete DtN map.

For piecewise-constant tensors and piecewise-linear hats every element
integral is exact, so the Green identity and the Schur complement relations
below hold to round-off.

Pairing convention: for boundary vectors ``u, v`` the duality pairing
``<Lambda u, conj(v)>`` is ``v.conj() @ M @ u`` where ``M`` is the DtN matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from cloakbound.geometry import Mesh


class SolverError(RuntimeError):
    def __init__(self, message: str, omega: complex | None = None):
        if omega is not None:
            message = f"{message} (omega = {omega})"
        super().__init__(message)
        self.omega = omega


def gradient_operator(mesh: Mesh) -> sp.csr_matrix:
    """Sparse map from nodal values to per-triangle gradients.

    Rows are ordered ``(t, component)`` -> ``2 * t + component``.
    """
    if "G" not in mesh._cache:
        g = mesh.gradients  # (T, 3, 2)
        T = mesh.n_triangles
        rows = (2 * np.arange(T)[:, None, None] + np.arange(2)[None, None, :]).repeat(3, axis=1)
        cols = np.broadcast_to(mesh.triangles[:, :, None], (T, 3, 2))
        G = sp.csr_matrix((g.ravel(), (rows.ravel(), cols.ravel())), shape=(2 * T, mesh.n_nodes))
        mesh._cache["G"] = G
    return mesh._cache["G"]


def block_diagonal(field: np.ndarray, weights: np.ndarray | None = None) -> sp.csr_matrix:
    """Sparse block-diagonal matrix from per-triangle 2x2 blocks."""
    field = np.asarray(field)
    T = field.shape[0]
    if weights is not None:
        field = field * weights[:, None, None]
    return sp.bsr_matrix((field, np.arange(T), np.arange(T + 1)), shape=(2 * T, 2 * T)).tocsr()


@dataclass(frozen=True, eq=False)
class StiffnessSystem:
    """Global matrix ``K_ij = sum_T |T| a_T grad(phi_j) . grad(phi_i)``."""

    mesh: Mesh
    matrix: sp.csr_matrix
    omega: complex | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def interior(self) -> np.ndarray:
        return self.mesh.interior_nodes

    @property
    def boundary(self) -> np.ndarray:
        return self.mesh.boundary_nodes

    def block(self, rows: Literal["i", "b"], cols: Literal["i", "b"]) -> sp.csr_matrix:
        idx = {"i": self.interior, "b": self.boundary}
        return self.matrix[idx[rows]][:, idx[cols]]

    @property
    def lu(self):
        if "lu" not in self._cache:
            A_ii = self.block("i", "i").tocsc()
            try:
                lu = spla.splu(A_ii)
            except RuntimeError as exc:
                raise SolverError(f"interior block is singular: {exc}", self.omega) from exc
            diag = np.abs(lu.U.diagonal())
            if diag.size and diag.min() <= 1e-14 * diag.max():
                raise SolverError("interior block is numerically singular", self.omega)
            self._cache["lu"] = lu
        return self._cache["lu"]


def assemble(mesh: Mesh, field: np.ndarray, omega: complex | None = None) -> StiffnessSystem:
    """Assemble the stiffness matrix for a per-triangle tensor field."""
    field = np.asarray(field)
    if field.shape != (mesh.n_triangles, 2, 2):
        raise ValueError(f"field must have shape ({mesh.n_triangles}, 2, 2), got {field.shape}")
    if not np.all(np.isfinite(field)):
        raise ValueError("non-finite tensor entries")
    G = gradient_operator(mesh)
    A = block_diagonal(field, mesh.triangle_area)
    K = (G.T @ A @ G).tocsr()
    return StiffnessSystem(mesh, K, omega)


def solve_dirichlet(sys: StiffnessSystem, v0: np.ndarray) -> np.ndarray:
    """Full nodal solution with boundary trace ``v0``; columns of ``v0`` are solved together."""
    v0 = np.asarray(v0)
    nb = sys.boundary.size
    if v0.shape[0] != nb:
        raise ValueError(f"boundary potential has {v0.shape[0]} entries, mesh has {nb} boundary nodes")
    rhs = -(sys.block("i", "b") @ v0)
    dtype = np.result_type(rhs, sys.matrix.dtype, v0)
    u = np.empty((sys.mesh.n_nodes,) + v0.shape[1:], dtype=dtype)
    u[sys.boundary] = v0
    if sys.interior.size:
        u[sys.interior] = _lu_solve(sys, np.asarray(rhs, dtype=dtype))
    return u


def _lu_solve(sys: StiffnessSystem, rhs: np.ndarray) -> np.ndarray:
    # a real factorization only accepts real right-hand sides
    if np.iscomplexobj(rhs) and not np.iscomplexobj(sys.matrix.data):
        return sys.lu.solve(np.ascontiguousarray(rhs.real)) + 1j * sys.lu.solve(np.ascontiguousarray(rhs.imag))
    return sys.lu.solve(rhs)


@dataclass(frozen=True, eq=False)
class DtnOperator:
    matrix: np.ndarray
    provenance: Literal["fem-schur", "effective-lift"]

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def export(self, path) -> None:
        """Write the matrix in Matrix Market format."""
        scipy.io.mmwrite(str(path), self.matrix, comment=f"provenance: {self.provenance}")


def dtn_matrix(sys: StiffnessSystem) -> DtnOperator:
    """Boundary Schur complement ``A_bb - A_bi A_ii^{-1} A_ib``."""
    A_bb = sys.block("b", "b").toarray()
    A_ib = sys.block("i", "b").toarray()
    A_bi = sys.block("b", "i")
    if sys.interior.size == 0:
        return DtnOperator(A_bb, "fem-schur")
    X = _lu_solve(sys, np.asarray(A_ib, dtype=np.result_type(A_ib, sys.matrix.dtype)))
    return DtnOperator(A_bb - A_bi @ X, "fem-schur")


def energy(sys: StiffnessSystem, field: np.ndarray, u: np.ndarray) -> complex:
    """``sum_T |T| a_T grad(u) . conj(grad(u))`` computed element by element."""
    gu = (gradient_operator(sys.mesh) @ u).reshape(-1, 2)
    flux = np.einsum("tij,tj->ti", field, gu)
    return complex(np.sum(sys.mesh.triangle_area * np.einsum("ti,ti->t", flux, gu.conj())))


def quadratic_form(dtn: DtnOperator | np.ndarray, v0: np.ndarray) -> complex:
    """The pairing ``<Lambda v0, conj(v0)>``."""
    M = dtn.matrix if isinstance(dtn, DtnOperator) else np.asarray(dtn)
    v0 = np.asarray(v0)
    if v0.shape != (M.shape[0],):
        raise ValueError(f"potential of shape {v0.shape} does not match DtN of size {M.shape[0]}")
    return complex(v0.conj() @ (M @ v0))


def sesquilinear_form(dtn: DtnOperator | np.ndarray, u: np.ndarray, v: np.ndarray) -> complex:
    M = dtn.matrix if isinstance(dtn, DtnOperator) else np.asarray(dtn)
    return complex(np.asarray(v).conj() @ (M @ np.asarray(u)))


def polarization_reconstruct(dtn: DtnOperator | np.ndarray, u: np.ndarray, v: np.ndarray) -> complex:
    """Recover ``<Lambda u, conj(v)>`` from four quadratic forms at ``u + i^k v``."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    total = 0j
    for k in range(4):
        ik = 1j**k
        total += ik * quadratic_form(dtn, u + ik * v)
    return total / 4


def harmonic_extension(mesh: Mesh) -> np.ndarray:
    """Dense (n_nodes, n_boundary) map from boundary traces to discrete-harmonic
    nodal functions (Laplacian with ``a = I``)."""
    if "H" not in mesh._cache:
        eye = np.broadcast_to(np.eye(2), (mesh.n_triangles, 2, 2))
        sys = assemble(mesh, eye)
        mesh._cache["H"] = solve_dirichlet(sys, np.eye(mesh.boundary_nodes.size)).real
    return mesh._cache["H"]
