"""Z-problems, effective operators and their variational bounds.

Operators on the field space are represented by their matrices against the
orthonormal Hodge bases (scaled coordinates, see :mod:`cloakbound.hodge`).
Block ``a_ij`` is ``Q_i^T a Q_j`` for ``i, j`` in ``U, E, J``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg as sla

from cloakbound.fem import DtnOperator
from cloakbound.geometry import Mesh
from cloakbound.hodge import HodgeBasis

PSD_TOL = 1e-10


class ZProblemError(np.linalg.LinAlgError):
    pass


def herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def imag_part(m: np.ndarray) -> np.ndarray:
    """Operator imaginary part ``(M - M^H) / 2i``."""
    return (m - np.conj(np.swapaxes(m, -1, -2))) / 2j


def psd_margin(m: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``m``."""
    return float(np.linalg.eigvalsh(herm(np.atleast_2d(m))).min())


def is_hermitian(field: np.ndarray, tol: float = 1e-12) -> bool:
    field = np.asarray(field)
    scale = max(1.0, float(np.abs(field).max()))
    return bool(np.abs(field - np.conj(np.swapaxes(field, -1, -2))).max() <= tol * scale)


@dataclass(frozen=True, eq=False)
class MultiplicationOperator:
    """Left multiplication by a per-triangle 2x2 tensor field."""

    field: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.field, dtype=complex)
        if f.ndim != 3 or f.shape[1:] != (2, 2):
            raise ValueError("tensor field must have shape (n_triangles, 2, 2)")
        object.__setattr__(self, "field", f)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Act on scaled vectors (columns of a (2T, k) array or a (2T,) vector)."""
        T = self.field.shape[0]
        if x.ndim == 1:
            return np.einsum("tij,tj->ti", self.field, x.reshape(T, 2)).reshape(-1)
        return np.einsum("tij,tjk->tik", self.field, x.reshape(T, 2, -1)).reshape(2 * T, -1)

    def block(self, basis: HodgeBasis, i: str, j: str) -> np.ndarray:
        return basis.basis(i).T @ self.apply(basis.basis(j))

    def inverse(self) -> "MultiplicationOperator":
        return MultiplicationOperator(np.linalg.inv(self.field))

    def adjoint(self) -> "MultiplicationOperator":
        return MultiplicationOperator(np.conj(np.swapaxes(self.field, -1, -2)))

    def scaled(self, lam: complex) -> "MultiplicationOperator":
        return MultiplicationOperator(lam * self.field)

    def imag(self) -> "MultiplicationOperator":
        return MultiplicationOperator(imag_part(self.field))

    @property
    def norm_bound(self) -> float:
        return float(np.linalg.norm(self.field, ord=2, axis=(-2, -1)).max())


def _as_op(a) -> MultiplicationOperator:
    return a if isinstance(a, MultiplicationOperator) else MultiplicationOperator(a)


@dataclass(frozen=True, eq=False)
class EffectiveOperator:
    matrix: np.ndarray
    space: Literal["U", "avg"]
    route: str


@dataclass(frozen=True, eq=False)
class ZProblemSolution:
    """Coefficients of ``J0`` (U), ``E`` (E) and ``J`` (J) for a given ``E0``."""

    E0: np.ndarray
    J0: np.ndarray
    E: np.ndarray
    J: np.ndarray

    def residual(self, basis: HodgeBasis, a) -> float:
        """Relative residual of ``J0 + J = a (E0 + E)``."""
        a = _as_op(a)
        lhs = basis.U_basis @ self.J0 + basis.J_basis @ self.J
        rhs = a.apply(basis.U_basis @ self.E0 + basis.E_basis @ self.E)
        return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))


def _solve_11(A11: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if A11.size == 0:
        return np.zeros((0,) + rhs.shape[1:], dtype=complex)
    try:
        lu = sla.lu_factor(A11, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise ZProblemError(f"a_11 factorization failed: {exc}") from exc
    d = np.abs(np.diag(lu[0]))
    if d.min() <= 1e-14 * d.max():
        raise ZProblemError("a_11 is singular: the Z-problem has no unique solution")
    return sla.lu_solve(lu, rhs)


def solve_zproblem(basis: HodgeBasis, a, E0: np.ndarray) -> ZProblemSolution:
    """Solve ``J0 + J = a (E0 + E)`` with ``E0`` given by its U coordinates."""
    a = _as_op(a)
    E0 = np.asarray(E0, dtype=complex)
    aE0 = a.apply(basis.U_basis @ E0)
    A11 = a.block(basis, "E", "E")
    E = -_solve_11(A11, basis.E_basis.T @ aE0)
    total = aE0 + a.apply(basis.E_basis @ E)
    J0 = basis.U_basis.T @ total
    J = basis.J_basis.T @ total
    return ZProblemSolution(E0=E0, J0=J0, E=E, J=J)


def effective_operator(basis: HodgeBasis, a) -> EffectiveOperator:
    """Schur complement ``a_00 - a_01 a_11^{-1} a_10`` on U."""
    a = _as_op(a)
    aU = a.apply(basis.U_basis)
    aE = a.apply(basis.E_basis)
    A00 = basis.U_basis.T @ aU
    A01 = basis.U_basis.T @ aE
    A10 = basis.E_basis.T @ aU
    A11 = basis.E_basis.T @ aE
    return EffectiveOperator(A00 - A01 @ _solve_11(A11, A10), "U", "schur")


def effective_operator_via_inverse(basis: HodgeBasis, a) -> EffectiveOperator:
    """``(([a_ij]_{i,j in U,E})^{-1})_00^{-1}``: block inversion route."""
    a = _as_op(a)
    Q = np.hstack([basis.U_basis, basis.E_basis])
    B = Q.T @ a.apply(Q)
    k = basis.U_basis.shape[1]
    try:
        Binv = np.linalg.inv(B)
        return EffectiveOperator(np.linalg.inv(Binv[:k, :k]), "U", "block-inverse")
    except np.linalg.LinAlgError as exc:
        raise ZProblemError(f"(U+E) block is singular: {exc}") from exc


def dtn_via_effective(basis: HodgeBasis, a) -> DtnOperator:
    """``Pi^dagger a_* Pi`` as a boundary matrix."""
    A = effective_operator(basis, a).matrix
    P = basis.lift_coords
    return DtnOperator(P.T @ A @ P, "effective-lift")


@dataclass(frozen=True, eq=False)
class AffineEffective:
    matrix: np.ndarray
    via_zproblem: np.ndarray

    @property
    def route_difference(self) -> float:
        return float(np.abs(self.matrix - self.via_zproblem).max() / max(np.abs(self.matrix).max(), 1e-300))


def effective_affine(basis: HodgeBasis, a, effective: EffectiveOperator | None = None) -> AffineEffective:
    """2x2 effective tensor ``a^D`` seen by affine boundary data.

    Computed as the compression of ``a_*`` to constant fields and,
    independently, as the effective operator of the Z-problem whose U-space is
    the constants and whose J-space absorbs the rest of U.
    """
    a = _as_op(a)
    if effective is None:
        effective = effective_operator(basis, a)
    R = basis.U_basis.T @ basis.avg_basis
    compressed = R.T @ effective.matrix @ R

    C = basis.avg_basis
    aC = a.apply(C)
    aE = a.apply(basis.E_basis)
    A00 = C.T @ aC
    A01 = C.T @ aE
    A10 = basis.E_basis.T @ aC
    A11 = basis.E_basis.T @ aE
    z_route = A00 - A01 @ _solve_11(A11, A10)
    return AffineEffective(compressed, z_route)


def _require_hermitian(a: MultiplicationOperator) -> None:
    if not is_hermitian(a.field):
        raise ValueError("tensor field must be Hermitian")


@dataclass(frozen=True, eq=False)
class Sandwich:
    lower: np.ndarray
    middle: np.ndarray
    upper: np.ndarray

    @property
    def margins(self) -> tuple[float, float, float]:
        """``(lower >= 0, middle - lower, upper - middle)`` smallest eigenvalues."""
        return (
            psd_margin(self.lower),
            psd_margin(self.middle - self.lower),
            psd_margin(self.upper - self.middle),
        )

    def holds(self, tol: float = PSD_TOL) -> bool:
        return min(self.margins) >= -tol


def variational_bounds(basis: HodgeBasis, a, effective: EffectiveOperator | None = None) -> Sandwich:
    """Thomson lower bound ``((a^{-1})_00)^{-1}`` and Dirichlet upper bound ``a_00``."""
    a = _as_op(a)
    _require_hermitian(a)
    if effective is None:
        effective = effective_operator(basis, a)
    upper = a.block(basis, "U", "U")
    lower = np.linalg.inv(a.inverse().block(basis, "U", "U"))
    return Sandwich(lower, effective.matrix, upper)


def averages(mesh: Mesh, field: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Area-weighted ``<a^{-1}>^{-1}`` and ``<a>``."""
    field = np.asarray(field)
    w = mesh.triangle_area / mesh.total_area
    arith = np.einsum("t,tij->ij", w, field)
    harm = np.linalg.inv(np.einsum("t,tij->ij", w, np.linalg.inv(field)))
    return harm, arith


def wiener_bounds(mesh: Mesh, field: np.ndarray, a_D: np.ndarray | None = None) -> Sandwich:
    """Harmonic- and arithmetic-mean bounds around the affine effective tensor."""
    field = np.asarray(field, dtype=complex)
    if not is_hermitian(field):
        raise ValueError("tensor field must be Hermitian")
    harm, arith = averages(mesh, field)
    if a_D is None:
        a_D = 0.5 * (harm + arith)
        return Sandwich(harm, a_D, arith)
    return Sandwich(harm, np.asarray(a_D), arith)


@dataclass(frozen=True, eq=False)
class CoerciveChain:
    c: float
    pointwise_effective: np.ndarray  # [Im(e^{ig} a)]_*
    effective_imag: np.ndarray  # Im(e^{ig} a_*)
    skipped: bool = False

    @property
    def margins(self) -> tuple[float, float]:
        if self.skipped:
            return (np.nan, np.nan)
        n = self.pointwise_effective.shape[0]
        return (
            psd_margin(self.pointwise_effective - self.c * np.eye(n)),
            psd_margin(self.effective_imag - self.pointwise_effective),
        )

    def holds(self, tol: float = PSD_TOL) -> bool:
        return (not self.skipped) and min(self.margins) >= -tol


def coercive_imaginary_bound(basis: HodgeBasis, a, angle: float = 0.0) -> CoerciveChain:
    """Check ``c I <= [Im(e^{ig} a)]_* <= Im(e^{ig} a_*)``."""
    a = _as_op(a)
    rotated = a.scaled(np.exp(1j * angle))
    im_field = imag_part(rotated.field)
    c = float(np.linalg.eigvalsh(im_field).min())
    n = basis.U_basis.shape[1]
    if c <= 0:
        return CoerciveChain(c, np.zeros((n, n)), np.zeros((n, n)), skipped=True)
    lower = effective_operator(basis, MultiplicationOperator(im_field)).matrix
    upper = imag_part(effective_operator(basis, rotated).matrix)
    return CoerciveChain(c, lower, upper)


# random instances used by the identity suites


def random_coercive_field(rng: np.random.Generator, n: int, c: float = 0.5, spread: float = 1.0) -> np.ndarray:
    """Complex tensors ``X + iY`` with ``X`` Hermitian and ``Y >= c I``."""
    def rand_herm():
        m = rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2))
        return herm(m)

    X = spread * rand_herm()
    B = rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2))
    Y = spread * np.einsum("tij,tkj->tik", B, B.conj()) + c * np.eye(2)
    return X + 1j * Y


def random_positive_field(rng: np.random.Generator, n: int, c: float = 0.2, spread: float = 1.0,
                          real: bool = False) -> np.ndarray:
    """Hermitian positive-definite tensors ``B B^H + c I``."""
    B = rng.normal(size=(n, 2, 2))
    if not real:
        B = B + 1j * rng.normal(size=(n, 2, 2))
    return spread * np.einsum("tij,tkj->tik", B, B.conj()) + c * np.eye(2)
