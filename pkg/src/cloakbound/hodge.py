"""Discrete orthogonal triple decomposition of per-triangle vector fields.

A field is an array of shape ``(n_triangles, 2)``.  The inner product is
``(u, v) = sum_T |T| u_T . conj(v_T)``.  Internally fields are flattened and
scaled by ``sqrt(|T|)`` so that this inner product becomes the Euclidean one;
all basis matrices below live in those scaled coordinates and have
orthonormal columns.

    U  gradients of discrete-harmonic (a = I) extensions of boundary data
    E  gradients of P1 functions vanishing on the boundary
    J  orthogonal complement of U + E
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.linalg as sla

from cloakbound.fem import gradient_operator, harmonic_extension
from cloakbound.geometry import Mesh

RANK_TOL = 1e-10


class HodgeError(RuntimeError):
    pass


def _range_basis(M: np.ndarray, expected: int) -> np.ndarray:
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size else 0
    if rank != expected:
        raise HodgeError(f"expected rank {expected}, found {rank}")
    return u[:, :rank]


@dataclass(frozen=True, eq=False)
class HodgeBasis:
    mesh: Mesh
    sqrt_w: np.ndarray
    U_basis: np.ndarray
    E_basis: np.ndarray
    avg_basis: np.ndarray
    lift_fields: np.ndarray  # unscaled gradients of harmonic extensions, (2T, n_boundary)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.sqrt_w.size

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.U_basis.shape[1], self.E_basis.shape[1], self.dim - self.U_basis.shape[1] - self.E_basis.shape[1]

    @cached_property
    def J_basis(self) -> np.ndarray:
        """Orthonormal complement of ``span(U, E)`` from a full QR factorization."""
        UE = np.hstack([self.U_basis, self.E_basis])
        q, r = sla.qr(UE, mode="full")
        k = UE.shape[1]
        d = np.abs(np.diag(r))
        if d.min() <= RANK_TOL * d.max():
            raise HodgeError("U and E are not independent")
        return q[:, k:]

    @cached_property
    def lift_coords(self) -> np.ndarray:
        """Matrix of the lift in U coordinates, shape (dim U, n_boundary)."""
        return self.U_basis.T @ (self.sqrt_w[:, None] * self.lift_fields)

    # scaled <-> physical
    def scale(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        return self.sqrt_w * f.reshape(-1) if f.ndim == 2 else self.sqrt_w[:, None] * f.reshape(self.dim, -1)

    def unscale(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 1:
            return (x / self.sqrt_w).reshape(-1, 2)
        return x / self.sqrt_w[:, None]

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(np.vdot(self.scale(v), self.scale(u)))

    def norm(self, u: np.ndarray) -> float:
        return float(np.linalg.norm(self.scale(u)))

    def basis(self, which: Literal["U", "E", "J", "avg"]) -> np.ndarray:
        return {"U": self.U_basis, "E": self.E_basis, "avg": self.avg_basis}.get(which) if which != "J" else self.J_basis

    def coords(self, which: str, f: np.ndarray) -> np.ndarray:
        return self.basis(which).T @ self.scale(f)

    def from_coords(self, which: str, c: np.ndarray) -> np.ndarray:
        return self.unscale(self.basis(which) @ c)

    def cross_gram_max(self) -> float:
        Q = [self.U_basis, self.E_basis, self.J_basis]
        return max(float(np.abs(Q[i].T @ Q[j]).max()) for i in range(3) for j in range(i + 1, 3))

    def orthonormality_defect(self) -> float:
        out = 0.0
        for Q in (self.U_basis, self.E_basis, self.J_basis):
            out = max(out, float(np.abs(Q.T @ Q - np.eye(Q.shape[1])).max()))
        return out


def build_hodge_basis(mesh: Mesh) -> HodgeBasis:
    if "hodge" in mesh._cache:
        return mesh._cache["hodge"]
    sqrt_w = np.sqrt(np.repeat(mesh.triangle_area, 2))
    G = gradient_operator(mesh)
    E = _range_basis(sqrt_w[:, None] * G[:, mesh.interior_nodes].toarray(), mesh.interior_nodes.size)
    lift_fields = G @ harmonic_extension(mesh)
    U = _range_basis(sqrt_w[:, None] * lift_fields, mesh.boundary_nodes.size - 1)
    const = np.zeros((2 * mesh.n_triangles, 2))
    const[0::2, 0] = 1.0
    const[1::2, 1] = 1.0
    avg = sqrt_w[:, None] * const / np.sqrt(mesh.total_area)
    basis = HodgeBasis(mesh, sqrt_w, U, E, avg, lift_fields)
    mesh._cache["hodge"] = basis
    return basis


def project(basis: HodgeBasis, which: Literal["U", "E", "J", "avg"], f: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a field onto U, E, J or the constants."""
    f = np.asarray(f)
    Q = basis.basis(which)
    return basis.unscale(Q @ (Q.T @ basis.scale(f)))


def lift(basis: HodgeBasis, v0: np.ndarray) -> np.ndarray:
    """Gradient of the discrete-harmonic extension of ``v0``."""
    v0 = np.asarray(v0)
    if v0.shape[0] != basis.lift_fields.shape[1]:
        raise ValueError("boundary potential does not match the mesh")
    return (basis.lift_fields @ v0).reshape(-1, 2)


def lift_adjoint(basis: HodgeBasis, f: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Boundary vector ``w`` with ``w . conj(v0) = (f, lift(v0))`` for every ``v0``."""
    f = np.asarray(f)
    n = basis.norm(f)
    if n > 0:
        resid = basis.norm(f - project(basis, "U", f))
        if resid > tol * n:
            raise ValueError(f"field is not in U (relative residual {resid / n:.2e})")
    wf = (basis.sqrt_w**2) * f.reshape(-1)
    return basis.lift_fields.T @ wf
