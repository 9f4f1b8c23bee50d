"""Cloaking quality ``F(omega)`` and the bounds it must obey.

For a boundary potential ``v0`` the cloaking functional is

    F(omega) = <(Lambda_eps(omega) - Lambda_eps0) v0, conj(v0)>

and ``G_vac = <Lambda_eps0 v0, conj(v0)>`` is the vacuum reference used to
normalize tolerances.  Every check returns a :class:`CheckResult` whose
status is ``"pass"``, ``"fail"`` or ``"skipped"`` (a premise did not hold).
Inequalities are tested with the additive tolerance ``1e-9 * scale`` where
``scale = |F_inf| + max |F|``, floored at ``1e-4 * G_vac`` because ``F`` is a
difference of two forms of size ``G_vac`` and carries their round-off.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from cloakbound.composites import dtn_via_effective
from cloakbound.fem import SolverError, assemble, dtn_matrix, solve_dirichlet
from cloakbound.geometry import Mesh, ObstacleMask
from cloakbound.herglotz import extract_alpha, heaviside_length, principal_sqrt_cut_positive, uniform_kernel
from cloakbound.hodge import build_hodge_basis
from cloakbound.materials import (
    MaterialError,
    PermittivityModel,
    check_lossless,
    coercivity_margin,
    epsilon_infinity,
    obstacle_lower_bound,
)

log = logging.getLogger(__name__)

REL_TOL = 1e-9
SCALE_FLOOR = 1e-4
IMAG_TOL = 1e-12
NORM_CAVEAT = (
    "operator norms are Euclidean norms of boundary-node matrices, a surrogate for the "
    "H^(1/2) -> H^(-1/2) norms; they are reported for orientation and not compared with eta"
)


# ---------------------------------------------------------------------------
# potentials and problems


@dataclass(frozen=True, eq=False)
class BoundaryPotential:
    name: str
    values: np.ndarray
    e0: tuple[complex, complex] | None = None

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or bool(np.all(self.values.imag == 0))


def affine_potential(mesh: Mesh, e0: Sequence[complex], name: str | None = None) -> BoundaryPotential:
    e0 = tuple(complex(c) if np.iscomplexobj(c) else float(c) for c in e0)
    return BoundaryPotential(name or f"affine({e0[0]},{e0[1]})", mesh.affine_potential(e0), e0)


def random_smooth_potential(mesh: Mesh, rng: np.random.Generator, name: str, complex_valued: bool = False,
                            order: int = 2) -> BoundaryPotential:
    """Low-order trigonometric trace normalized to unit max modulus."""
    xy = mesh.nodes[mesh.boundary_nodes]
    x = np.pi * xy[:, 0] / mesh.width
    y = np.pi * xy[:, 1] / mesh.height
    v = np.zeros(xy.shape[0], dtype=complex if complex_valued else float)
    for j in range(order + 1):
        for k in range(order + 1):
            if j == k == 0:
                continue
            c = rng.normal()
            if complex_valued:
                c = c + 1j * rng.normal()
            v = v + c * np.cos(j * x + rng.uniform(0, np.pi)) * np.cos(k * y + rng.uniform(0, np.pi))
    return BoundaryPotential(name, v / np.abs(v).max())


def default_potentials(mesh: Mesh, n_random: int = 4, seed: int = 0,
                       complex_valued: bool = True) -> tuple[BoundaryPotential, ...]:
    rng = np.random.default_rng(seed)
    pots = [affine_potential(mesh, (1.0, 0.0), "e1"), affine_potential(mesh, (0.0, 1.0), "e2")]
    pots += [random_smooth_potential(mesh, rng, f"random{i}", complex_valued) for i in range(n_random)]
    return tuple(pots)


@dataclass(frozen=True, eq=False)
class CloakProblem:
    """Mesh, obstacle, material model and the potentials used to probe them.

    When the model is not reciprocal only real potentials are admissible;
    :meth:`build` generates real random traces in that case.
    """

    mesh: Mesh
    mask: ObstacleMask
    model: PermittivityModel
    interval: tuple[float, float]
    potentials: tuple[BoundaryPotential, ...]
    eta: float | None = None
    reciprocal: bool = True
    route: Literal["fem", "effective"] = "fem"
    certify: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        lo, hi = self.interval
        if not 0 < lo < hi:
            raise ValueError(f"need 0 < omega_- < omega_+, got {self.interval}")
        if not self.potentials:
            raise ValueError("at least one boundary potential is required")
        nb = self.mesh.boundary_nodes.size
        for p in self.potentials:
            if p.values.shape != (nb,):
                raise ValueError(f"potential {p.name!r} does not match the mesh boundary")
        if not self.reciprocal and not all(p.is_real for p in self.potentials):
            raise ValueError("non-reciprocal model: boundary potentials must be real-valued")
        if self.route not in ("fem", "effective"):
            raise ValueError(f"unknown route {self.route!r}")
        if self.eta is not None and self.eta < 0:
            raise ValueError("eta must be non-negative")

    @classmethod
    def build(cls, mesh: Mesh, mask: ObstacleMask, model: PermittivityModel, interval,
              potentials: Sequence[BoundaryPotential] | None = None, n_random: int = 4, seed: int = 0,
              eta: float | None = None, reciprocal: bool | None = None, route: str = "fem") -> "CloakProblem":
        recip = model.reciprocal if reciprocal is None else bool(reciprocal and model.reciprocal)
        if potentials is None:
            potentials = default_potentials(mesh, n_random, seed, complex_valued=recip)
        return cls(mesh, mask, model, tuple(map(float, interval)), tuple(potentials), eta, recip, route)

    def with_model(self, model: PermittivityModel) -> "CloakProblem":
        return replace(self, model=model, _cache={})

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.potentials]

    @property
    def V(self) -> np.ndarray:
        if "V" not in self._cache:
            self._cache["V"] = np.stack([p.values.astype(complex) for p in self.potentials], axis=1)
        return self._cache["V"]

    def potential(self, v0) -> BoundaryPotential:
        if isinstance(v0, BoundaryPotential):
            return v0
        if isinstance(v0, str):
            for p in self.potentials:
                if p.name == v0:
                    return p
            raise KeyError(f"no potential named {v0!r}")
        if isinstance(v0, (int, np.integer)):
            return self.potentials[int(v0)]
        return BoundaryPotential("custom", np.asarray(v0))

    @property
    def vacuum_dtn(self) -> np.ndarray:
        if "vac" not in self._cache:
            eye = self.model.vacuum_eps0 * np.broadcast_to(np.eye(2), (self.mesh.n_triangles, 2, 2))
            self._cache["vac"] = dtn_matrix(assemble(self.mesh, eye)).matrix.real
        return self._cache["vac"]

    def G_vac(self, V: np.ndarray | None = None) -> np.ndarray:
        V = self.V if V is None else V
        return np.real(np.einsum("bp,bc,cp->p", V.conj(), self.vacuum_dtn, V))

    @property
    def eta_lim(self) -> float | None:
        eps = obstacle_lower_bound(self.model) if not self.model.dispersive_obstacle else None
        if eps is None or not np.isfinite(eps) or eps < self.model.vacuum_eps0:
            return None
        return eta_limit(self.mask.volume_obstacle, self.mask.volume_cloak, eps, self.model.vacuum_eps0)


# ---------------------------------------------------------------------------
# evaluation


def _forms(problem: CloakProblem, field_: np.ndarray, V: np.ndarray, omega=None) -> np.ndarray:
    """``<Lambda v, conj(v)>`` for each column of ``V``."""
    if problem.route == "effective":
        M = dtn_via_effective(build_hodge_basis(problem.mesh), field_).matrix
        return np.einsum("bp,bc,cp->p", V.conj(), M, V)
    sys = assemble(problem.mesh, field_, omega)
    u = solve_dirichlet(sys, V)
    flux = (sys.matrix @ u)[sys.boundary]
    return np.einsum("bp,bp->p", V.conj(), flux)


def _certify(problem: CloakProblem, model: PermittivityModel, omega: complex) -> None:
    if problem.certify and not coercivity_margin(model, omega).certified:
        raise SolverError("permittivity is not coercive, the forward problem is not certified", omega)


def _F_columns(problem: CloakProblem, omega: complex, V: np.ndarray | None = None,
               model: PermittivityModel | None = None) -> np.ndarray:
    model = problem.model if model is None else model
    V = problem.V if V is None else V
    omega = complex(omega)
    if omega.imag < 0:
        raise ValueError("omega must lie in the closed upper half-plane")
    _certify(problem, model, omega)
    field_ = model.eval_field(omega)
    if omega.imag == 0 and np.all(field_.imag == 0):
        field_ = field_.real
    F = _forms(problem, field_, V, omega) - problem.G_vac(V)
    if omega.imag == 0 and np.isrealobj(field_) and np.all(V.imag == 0):
        F = F.real.astype(complex)
    return F


def evaluate_F(problem: CloakProblem, v0, omega: complex) -> complex:
    """``F_{v0}(omega)`` for a single potential (name, index or boundary vector)."""
    p = problem.potential(v0)
    return complex(_F_columns(problem, omega, p.values.astype(complex)[:, None])[0])


def evaluate_F_all(problem: CloakProblem, omega: complex) -> np.ndarray:
    """``F(omega)`` for every potential of the problem, sharing one factorization."""
    return _F_columns(problem, omega)


def F_infinity(problem: CloakProblem, v0=None) -> float | np.ndarray:
    """High-frequency limit computed from the high-frequency permittivity.

    ``v0=None`` returns one value per potential of the problem.
    """
    if problem.model.dispersive_obstacle:
        raise MaterialError("F_inf needs a non-dispersive obstacle; use the frozen reference model "
                            "(dispersive_obstacle_check)")
    V = problem.V if v0 is None else problem.potential(v0).values.astype(complex)[:, None]
    key = None if v0 is not None else "F_inf"
    if key and key in problem._cache:
        return problem._cache[key]
    out = (_forms(problem, epsilon_infinity(problem.model), V) - problem.G_vac(V))
    if np.abs(out.imag).max() > 1e-9 * max(1.0, np.abs(out).max()) and problem.model.reciprocal:
        log.warning("F_inf has a non-negligible imaginary part %.3e", np.abs(out.imag).max())
    out = out.real
    if key:
        problem._cache[key] = out
        return out
    return float(out[0])


def F_infinity_crosscheck(problem: CloakProblem, v0, y_sequence=None, rtol: float = 1e-4) -> float:
    """``lim F(iy)`` as ``y -> oo``, through the alpha coefficient of ``omega F``."""
    y = 1e4 / 2.0 ** np.arange(6)[::-1] if y_sequence is None else y_sequence
    return extract_alpha(lambda z: z * evaluate_F(problem, v0, z), y, rtol=rtol)


def F_infinity_lower_bound(vol_obstacle: float, vol_cloak: float, eps_lb: float, eps0: float,
                           vol_total: float, e0: Sequence[complex]) -> float:
    """Certified lower bound of ``F_inf`` for the affine potential ``-e0 . x``.

    ``eps_lb`` is a lower bound of the obstacle permittivity; the bound
    vanishes when the obstacle has no contrast (``eps_lb = eps0``).
    """
    if not eps0 > 0 or vol_obstacle <= 0 or vol_cloak <= 0 or vol_total <= 0:
        raise ValueError("eps0 and the volumes must be positive")
    if eps_lb < eps0:
        raise ValueError("the obstacle lower bound must be at least eps0")
    e2 = float(np.sum(np.abs(np.asarray(e0)) ** 2))
    r = eps0 / eps_lb
    return vol_obstacle * (1 - r) * eps0 * vol_total * e2 / (vol_obstacle * r + vol_cloak)


def eta_limit(vol_obstacle: float, vol_cloak: float, eps_lb: float, eps0: float) -> float:
    """Tolerance below which approximate cloaking forces a sign on ``F`` away from ``omega0``."""
    r = eps0 / eps_lb
    return (1 - r) * vol_obstacle / (vol_obstacle * r + vol_cloak)


def find_zero(problem: CloakProblem, v0, bracket: tuple[float, float], xtol: float = 1e-14) -> float:
    """Real frequency where the (lossless) ``F_{v0}`` changes sign."""
    f = lambda w: evaluate_F(problem, v0, w).real
    return float(brentq(f, *bracket, xtol=xtol, rtol=4 * np.finfo(float).eps))


# ---------------------------------------------------------------------------
# checks


@dataclass
class CheckResult:
    name: str
    status: Literal["pass", "fail", "skipped"]
    margin: float | None = None
    details: dict = field(default_factory=dict)
    violation: dict | None = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "margin": self.margin,
                "details": _jsonable(self.details), "violation": _jsonable(self.violation)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _status(margin: float, tol: float) -> str:
    return "pass" if margin >= -tol else "fail"


def check_herglotz_structure(problem: CloakProblem, v0=None, cplus_grid=None) -> CheckResult:
    """Minimum over a grid in the upper half-plane of ``Im[omega <Lambda v, v>]`` and ``Im[omega F]``."""
    from cloakbound.materials import default_cplus_grid

    grid = default_cplus_grid() if cplus_grid is None else np.asarray(cplus_grid, dtype=complex).ravel()
    if np.any(grid.imag <= 0):
        raise ValueError("grid must lie in the open upper half-plane")
    V = problem.V if v0 is None else problem.potential(v0).values.astype(complex)[:, None]
    G = problem.G_vac(V)
    worst_form, worst_F, where = np.inf, np.inf, None
    for w in grid:
        F = _F_columns(problem, w, V)
        im_form = np.imag(w * (F + G))
        im_F = np.imag(w * F)
        if im_F.min() < worst_F:
            worst_F, where = float(im_F.min()), {"omega": w, "potential": int(np.argmin(im_F))}
        worst_form = min(worst_form, float(im_form.min()))
    margin = min(worst_form, worst_F)
    return CheckResult("herglotz_structure", _status(margin, 1e-10), margin,
                       {"min_im_form": worst_form, "min_im_omega_F": worst_F, "n_points": grid.size},
                       None if margin >= -1e-10 else where)


@dataclass
class SweepResult:
    """Real-frequency sweep of ``F`` for a set of potentials.

    ``F`` has shape ``(n_potentials, n_omega)``; ``F_inf`` is ``nan`` when
    the obstacle is dispersive.
    """

    omegas: np.ndarray
    names: list[str]
    F: np.ndarray
    F_inf: np.ndarray
    G_vac: np.ndarray
    lossless: bool
    e0: list = field(default_factory=list)
    eta_lim: float | None = None
    problem: CloakProblem | None = None
    ledger: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, omegas, F: Mapping[str, np.ndarray], F_inf: Mapping[str, float],
                    G_vac: Mapping[str, float], lossless: bool = True, e0: Mapping[str, tuple] | None = None,
                    eta_lim: float | None = None) -> "SweepResult":
        names = list(F)
        return cls(np.asarray(omegas, dtype=float), names,
                   np.array([np.asarray(F[n], dtype=complex) for n in names]),
                   np.array([float(F_inf[n]) for n in names]), np.array([float(G_vac[n]) for n in names]),
                   lossless, [None if e0 is None else e0.get(n) for n in names], eta_lim)

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.omegas[0]), float(self.omegas[-1])

    @property
    def x(self) -> np.ndarray:
        return self.omegas**2

    @property
    def H(self) -> np.ndarray:
        """``x F(sqrt x)`` on ``[omega_-^2, omega_+^2]``."""
        root = principal_sqrt_cut_positive(self.x.astype(complex))
        if not np.allclose(root.real, self.omegas, rtol=1e-14, atol=0):
            raise AssertionError("square-root branch mismatch on the positive axis")
        return self.x * self.F

    def index(self, v0) -> int:
        if isinstance(v0, (int, np.integer)):
            return int(v0)
        if isinstance(v0, str):
            return self.names.index(v0)
        raise TypeError("identify the potential by name or index")

    def scale(self, k: int) -> float:
        fi = self.F_inf[k] if np.isfinite(self.F_inf[k]) else 0.0
        return max(abs(fi) + float(np.abs(self.F[k]).max()), SCALE_FLOOR * abs(self.G_vac[k]))

    def tol(self, k: int) -> float:
        return REL_TOL * max(self.scale(k), np.finfo(float).tiny)

    def values_at(self, omega0: float) -> np.ndarray:
        """``F(omega0)`` for every potential; grid values are reused when possible."""
        hit = np.flatnonzero(np.isclose(self.omegas, omega0, rtol=0, atol=1e-12))
        if hit.size:
            return self.F[:, hit[0]]
        if self.problem is None:
            raise ValueError(f"omega0 = {omega0} is not on the grid and no problem is attached")
        return evaluate_F_all(self.problem, omega0)

    def record(self, result: CheckResult, key: str | None = None) -> CheckResult:
        self.ledger[key or result.name] = result
        return result


def frequency_grid(interval: tuple[float, float], n: int = 100) -> np.ndarray:
    return np.linspace(interval[0], interval[1], n)


def sweep(problem: CloakProblem, omegas=None, n: int = 100, jobs: int = 1) -> SweepResult:
    """Evaluate ``F`` on a real frequency grid (default: ``n`` uniform points)."""
    omegas = frequency_grid(problem.interval, n) if omegas is None else np.asarray(omegas, dtype=float)
    if np.any(np.diff(omegas) <= 0):
        raise ValueError("frequency grid must be increasing")
    problem.vacuum_dtn  # build shared state before fanning out
    worker = lambda w: _F_columns(problem, w)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            cols = list(pool.map(worker, omegas))
    else:
        cols = [worker(w) for w in omegas]
    F = np.stack(cols, axis=1)
    if problem.model.dispersive_obstacle:
        F_inf = np.full(len(problem.potentials), np.nan)
    else:
        F_inf = F_infinity(problem)
    lossless = check_lossless(problem.model, problem.interval).lossless
    return SweepResult(omegas, problem.names, F, F_inf, problem.G_vac(), lossless,
                       [p.e0 for p in problem.potentials], problem.eta_lim, problem)


def check_lossless_monotonicity(sweep: SweepResult, v0) -> CheckResult:
    """``omega^2 (F(omega) - F_inf)`` must be nondecreasing over every grid pair."""
    k = sweep.index(v0)
    name = f"lossless_monotonicity[{sweep.names[k]}]"
    if not sweep.lossless:
        return sweep.record(CheckResult(name, "skipped", details={"reason": "model is not lossless on the interval"}))
    w = sweep.omegas
    g = w**2 * (sweep.F[k].real - sweep.F_inf[k])
    running = np.maximum.accumulate(g)
    pair = g[1:] - running[:-1]
    j = int(np.argmin(pair))
    margin = float(pair[j])
    max_imag = float(np.abs(sweep.F[k].imag).max())
    tol = sweep.tol(k)
    ok = margin >= -tol and max_imag <= IMAG_TOL
    i = int(np.argmax(g[: j + 1]))
    return sweep.record(CheckResult(
        name, "pass" if ok else "fail", margin,
        {"tol": tol, "max_imag": max_imag, "consecutive_min": float(np.diff(g).min()), "n_pairs": g.size * (g.size - 1) // 2},
        None if ok else {"omega_lo": w[i], "omega_hi": w[j + 1], "potential": sweep.names[k]},
    ))


def check_approximate_cloaking_bounds(sweep: SweepResult, v0, omega0: float, eta: float | None = None) -> CheckResult:
    """Envelopes around an approximate-cloaking frequency and the forced-sign windows.

    ``eta=None`` uses the smallest tolerance compatible with the test set.
    """
    k = sweep.index(v0)
    name = f"approximate_cloaking[{sweep.names[k]}]"
    if not sweep.lossless:
        return sweep.record(CheckResult(name, "skipped", details={"reason": "model is not lossless on the interval"}))
    lo, hi = sweep.interval
    if not lo <= omega0 <= hi:
        raise ValueError("omega0 must lie in the sweep interval")
    F0 = sweep.values_at(omega0)
    G = sweep.G_vac
    live = G > 0
    eta_star = float(np.max(np.abs(F0[live]) / G[live])) if live.any() else 0.0
    eta = eta_star if eta is None else float(eta)
    details = {"omega0": omega0, "eta": eta, "eta_star": eta_star}
    if eta_star > eta * (1 + 1e-12) + 1e-15:
        details["reason"] = "approximate-cloaking premise fails on the test set"
        return sweep.record(CheckResult(name, "skipped", details=details))
    w, F, Fi, Gk = sweep.omegas, sweep.F[k].real, sweep.F_inf[k], G[k]
    tol = sweep.tol(k)
    left, right = w <= omega0, w >= omega0
    upper = (-Fi + eta * Gk) * (omega0**2 - w**2) / w**2 + eta * Gk
    lower = (Fi + eta * Gk) * (w**2 - omega0**2) / w**2 - eta * Gk
    m_up = (upper - F)[left]
    m_lo = (F - lower)[right]
    margins = [float(m_up.min()) if m_up.size else np.inf, float(m_lo.min()) if m_lo.size else np.inf]
    details.update({"tol": tol, "upper_margin": margins[0], "lower_margin": margins[1]})
    violation = None
    if min(margins) < -tol:
        env = np.where(left, upper - F, np.inf)
        env = np.minimum(env, np.where(right, F - lower, np.inf))
        violation = {"omega": w[int(np.argmin(env))], "potential": sweep.names[k]}

    # forced-sign windows, for affine potentials only
    eta_lim = sweep.eta_lim
    details["eta_lim"] = eta_lim
    window_margin = np.inf
    if sweep.e0[k] is None or eta_lim is None:
        details["windows"] = "not applicable (needs an affine potential and a certified obstacle contrast)"
    elif eta >= eta_lim:
        details["windows"] = "vacuous (eta >= eta_lim)"
    else:
        a = np.sqrt(1 - eta / eta_lim) * omega0
        b = np.sqrt(1 + eta / eta_lim) * omega0
        neg = (w >= lo) & (w < a)
        pos = (w > b) & (w <= hi)
        details["windows"] = {"negative": [lo, a], "positive": [b, hi],
                              "n_negative": int(neg.sum()), "n_positive": int(pos.sum())}
        if neg.any():
            window_margin = min(window_margin, float((-F[neg]).min()))
        if pos.any():
            window_margin = min(window_margin, float(F[pos].min()))
        details["window_margin"] = window_margin if np.isfinite(window_margin) else None
        if window_margin < -tol and violation is None:
            bad = np.where(neg, -F, np.where(pos, F, np.inf))
            violation = {"omega": w[int(np.argmin(bad))], "potential": sweep.names[k], "kind": "sign window"}
    margin = min(margins + [window_margin])
    return sweep.record(CheckResult(name, _status(margin, tol), margin, details, violation))


def check_lossy_bound(sweep: SweepResult, v0, subinterval: tuple[float, float] | None = None) -> CheckResult:
    """``(1/4)(b^2 - a^2) F_inf <= max |omega^2 F|`` on ``[a, b]``."""
    k = sweep.index(v0)
    a, b = sweep.interval if subinterval is None else map(float, subinterval)
    tag = "" if subinterval is None else f"@[{a},{b}]"
    name = f"lossy_bound[{sweep.names[k]}]{tag}"
    Fi = sweep.F_inf[k]
    if not np.isfinite(Fi) or Fi <= sweep.tol(k):
        return sweep.record(CheckResult(name, "skipped", details={"reason": "F_inf is not positive", "F_inf": Fi}), name)
    sel = (sweep.omegas >= a - 1e-12) & (sweep.omegas <= b + 1e-12)
    if sel.sum() < 2:
        raise ValueError("subinterval contains fewer than two grid points")
    vals = np.abs(sweep.omegas[sel] ** 2 * sweep.F[k, sel])
    lhs = 0.25 * (b**2 - a**2) * Fi
    rhs = float(vals.max())
    margin = rhs - lhs
    details = {"lhs": lhs, "max_abs_omega2_F": rhs, "argmax_omega": sweep.omegas[sel][int(np.argmax(vals))],
               "interval": [a, b], "tol": sweep.tol(k)}
    if sweep.e0[k] is not None and sweep.eta_lim is not None:
        lhs_lb = 0.25 * (b**2 - a**2) * sweep.eta_lim * sweep.G_vac[k]
        details["lhs_with_lower_bound"] = lhs_lb
        details["margin_with_lower_bound"] = rhs - lhs_lb
    return sweep.record(CheckResult(name, _status(margin, sweep.tol(k)), margin, details,
                                    None if margin >= -sweep.tol(k) else {"potential": sweep.names[k]}), name)


def check_derivative_bound(sweep: SweepResult, v0, omega0: float, premise_tol: float = 1e-2) -> CheckResult:
    """Derivative bounds at a cloaking frequency, with finite differences on the sweep grid.

    The first inequality carries the additive term ``omega0^2 |F(omega0)| / (omega_+ - omega_-)``,
    which makes it rigorous when ``F(omega0)`` is small but not zero.
    """
    k = sweep.index(v0)
    name = f"derivative_bound[{sweep.names[k]}]"
    w = sweep.omegas
    lo, hi = sweep.interval
    F0 = complex(sweep.values_at(omega0)[k])
    Gk, Fi = sweep.G_vac[k], sweep.F_inf[k]
    details = {"omega0": omega0, "F_omega0": F0}
    if abs(F0) > premise_tol * Gk:
        details["reason"] = f"F(omega0) is not near zero (|F| = {abs(F0):.3e}, G_vac = {Gk:.3e})"
        return sweep.record(CheckResult(name, "skipped", details=details))
    tol = sweep.tol(k)
    y = w**2 * sweep.F[k]
    D = np.gradient(y, w, edge_order=2)
    D2 = np.gradient(y[::2], w[::2], edge_order=2)
    fd_err = float(np.abs(D[::2] - D2).max() / 3) if w.size >= 6 else float("nan")
    maxD = float(np.abs(D).max())
    corr = omega0**2 * abs(F0) / (hi - lo)
    lhs1 = 0.25 * (hi + lo) * Fi
    m1 = maxD + corr - lhs1

    h = float(np.min(np.diff(w)))
    if sweep.problem is not None:
        Fp, Fm = evaluate_F(sweep.problem, k, omega0 + h), evaluate_F(sweep.problem, k, omega0 - h)
        dF = (Fp - Fm) / (2 * h)
        dF_err = abs((Fp - 2 * F0 + Fm)) / 2  # size of the neglected second-order term scale
    else:
        hit = np.flatnonzero(np.isclose(w, omega0, rtol=0, atol=1e-12))
        if not hit.size:
            raise ValueError("omega0 must be a grid point when no problem is attached")
        dF = complex(np.gradient(sweep.F[k], w, edge_order=2)[hit[0]])
        dF_err = fd_err
    m2 = 2 * omega0 * abs(dF) - Fi
    details.update({"max_abs_derivative": maxD, "correction": corr, "lhs_max_derivative": lhs1,
                    "margin_max_derivative": m1, "dF_omega0": dF, "margin_local": m2,
                    "fd_error_estimate": fd_err, "local_fd_error": dF_err, "step": h, "tol": tol})
    margin = min(m1, m2)
    return sweep.record(CheckResult(name, _status(margin, tol), margin, details,
                                    None if margin >= -tol else {"potential": sweep.names[k], "omega0": omega0}))


def build_H_and_sumrule(sweep: SweepResult, v0, delta: float | None = None) -> CheckResult:
    """Heaviside-length and sum-rule bounds for ``H(x) = x F(sqrt x)``.

    ``delta=None`` uses ``max |H|`` on the grid, which reproduces the lossy bound.
    """
    if delta is not None and not delta > 0:
        raise ValueError("delta must be positive")
    k = sweep.index(v0)
    name = f"sumrule[{sweep.names[k]}]"
    Fi = sweep.F_inf[k]
    if not np.isfinite(Fi) or Fi <= sweep.tol(k):
        return sweep.record(CheckResult(name, "skipped", details={"reason": "F_inf is not positive", "F_inf": Fi}))
    x = sweep.x
    H = sweep.H[k]
    delta = float(np.abs(H).max()) if delta is None else float(delta)
    width = float(x[-1] - x[0])
    length = heaviside_length(x, H, delta)
    bound = 4 * delta / Fi
    tol = REL_TOL * width
    details = {"delta": delta, "x_range": [x[0], x[-1]], "heaviside_length": length, "heaviside_bound": bound,
               "ratio": length / bound, "vacuous": bool(bound >= width), "sumrule_bound": 1 / Fi}
    margin = bound - length
    if sweep.lossless and np.abs(H.imag).max() <= IMAG_TOL * max(1.0, np.abs(H).max()):
        keep = np.abs(np.abs(H.real) - delta) > 1e-12 * delta
        im = np.zeros_like(x)
        im[keep] = uniform_kernel(H.real[keep], delta).imag
        # Im H_mu is piecewise constant; integrate it through the crossing-aware length
        value = heaviside_length(x, H.real, delta) / (2 * delta)
        details.update({"sumrule_value": value, "sumrule_margin": 1 / Fi - value,
                        "im_plateau": float(im.max()) if keep.any() else 0.0})
        margin = min(margin, (1 / Fi - value) * Fi * width)
    status = _status(margin, tol)
    return sweep.record(CheckResult(name, status, margin, details,
                                    None if status == "pass" else {"potential": sweep.names[k]}))


# ---------------------------------------------------------------------------
# dispersive obstacle, certificates


def dispersive_obstacle_check(problem: CloakProblem, omega0: float, omegas=None, eta: float | None = None,
                              jobs: int = 1) -> dict:
    """Compare a dispersive obstacle with its copy frozen at ``omega0``.

    Returns a dictionary with the reference model, both sweeps and one
    :class:`CheckResult` per step.
    """
    model = problem.model
    if not model.dispersive_obstacle:
        raise MaterialError("the obstacle is not dispersive")
    lo, hi = problem.interval
    w = frequency_grid(problem.interval) if omegas is None else np.asarray(omegas, dtype=float)
    eps0 = model.vacuum_eps0
    results: dict[str, CheckResult] = {}

    # hypotheses on the obstacle law
    tens_lo, tens_mono, deriv, worst_imag, worst_asym = np.inf, np.inf, np.inf, 0.0, 0.0
    h = 1e-6 * (hi - lo)
    for label in model.obstacle_labels:
        law = model.regions[label]
        vals = law(w, eps0)
        ref = law(omega0, eps0)
        worst_imag = max(worst_imag, float(np.abs(vals.imag).max()))
        worst_asym = max(worst_asym, float(np.abs(vals - np.swapaxes(vals, -1, -2)).max()))
        tens_lo = min(tens_lo, float(np.linalg.eigvalsh(vals.real).min()))
        diff = (vals - ref).real
        lam = np.linalg.eigvalsh(diff)
        above, below = w >= omega0, w <= omega0
        if above.any():
            tens_mono = min(tens_mono, float(lam[above].min()))
        if below.any():
            tens_mono = min(tens_mono, float((-lam[below]).min()))
        d = ((law(w + h, eps0) - law(w - h, eps0)) / (2 * h)).real
        deriv = min(deriv, float(np.linalg.eigvalsh(0.5 * (d + np.swapaxes(d, -1, -2))).min()))
    hyp_ok = worst_imag <= 1e-14 and worst_asym <= 1e-14 and tens_lo > 0 and tens_mono >= -1e-12
    results["obstacle_hypotheses"] = CheckResult(
        "dispersive_obstacle_hypotheses", "pass" if hyp_ok else "fail", tens_mono,
        {"max_imag": worst_imag, "max_asymmetry": worst_asym, "min_eigenvalue": tens_lo,
         "tensor_monotonicity_margin": tens_mono, "min_derivative_eigenvalue": deriv},
    )
    cloak_ok = check_lossless(model, problem.interval).lossless

    ref_model = model.with_obstacle_frozen(omega0)
    ref_problem = problem.with_model(ref_model)
    s = sweep(problem, w, jobs=jobs)
    s_ref = sweep(ref_problem, w, jobs=jobs)
    ordering = np.where(w <= omega0, s_ref.F.real - s.F.real, np.inf)
    ordering = np.minimum(ordering, np.where(w >= omega0, s.F.real - s_ref.F.real, np.inf))
    per_pot = ordering.min(axis=1)
    tol = REL_TOL * max(s.scale(k) for k in range(len(s.names)))
    worst = int(np.argmin(per_pot))
    margin = float(per_pot[worst])
    results["ordering"] = CheckResult(
        "dispersive_obstacle_ordering", _status(margin, tol), margin,
        {"tol": tol, "per_potential": dict(zip(s.names, per_pot.tolist()))},
        None if margin >= -tol else {"potential": s.names[worst], "omega": w[int(np.argmin(ordering[worst]))]},
    )
    if hyp_ok and cloak_ok and results["ordering"].passed:
        for k, n in enumerate(s_ref.names):
            results[f"reference_bounds[{n}]"] = check_approximate_cloaking_bounds(s_ref, k, omega0, eta)
    else:
        results["reference_bounds"] = CheckResult(
            "reference_bounds", "skipped",
            details={"reason": "monotonicity hypotheses failed or cloak is lossy", "cloak_lossless": cloak_ok})
    return {"reference_model": ref_model, "sweep": s, "reference_sweep": s_ref, "results": results}


def impossibility_certificate(problem: CloakProblem, e0: Sequence[float] = (1.0, 0.0)) -> dict:
    """Certify that ``F`` cannot vanish on the whole interval for the affine potential of ``e0``."""
    if not np.any(np.asarray(e0) != 0):
        raise ValueError("e0 must be nonzero")
    model = problem.model
    out: dict = {"e0": list(map(float, e0))}
    if model.dispersive_obstacle:
        out.update(certified=False, message="dispersive obstacle: certificate unavailable, use the frozen reference")
        return out
    p = affine_potential(problem.mesh, e0, "affine")
    Fi = F_infinity(problem, p)
    eps0 = model.vacuum_eps0
    eps_lb = obstacle_lower_bound(model)
    lb = None
    if np.isfinite(eps_lb) and eps_lb >= eps0 and problem.mask.volume_cloak > 0:
        lb = F_infinity_lower_bound(problem.mask.volume_obstacle, problem.mask.volume_cloak, eps_lb, eps0,
                                    problem.mask.volume_total, e0)
    samples = np.linspace(*problem.interval, 3)
    F_samples = np.array([evaluate_F(problem, p, w) for w in samples])
    out.update({"F_inf": Fi, "lower_bound": lb, "eps_lb": eps_lb, "max_abs_F_samples": float(np.abs(F_samples).max())})
    scale = max(abs(Fi), 1.0)
    if lb is not None and lb > 0 and Fi >= lb - 1e-10 * scale:
        out.update(certified=True, message=(
            f"F_inf = {Fi:.6g} >= {lb:.6g} > 0: identically-zero F would force F_inf = 0, "
            "contradicting the certified bound"))
    elif abs(Fi) <= 1e-12 * scale and out["max_abs_F_samples"] <= 1e-12 * scale:
        out.update(certified=False, message="F vanishes and F_inf = 0: consistent, no contradiction claimed")
    elif lb is not None and lb > 0:
        out.update(certified=False, message=f"computed F_inf = {Fi:.6g} is below the lower bound {lb:.6g}")
    else:
        out.update(certified=False, message="no obstacle contrast: lower bound degenerates to 0, certificate unavailable")
    return out


def approx_cloaking_certificate(problem: CloakProblem, omega0: float,
                                potentials: Sequence[BoundaryPotential] | None = None) -> dict:
    """Smallest tolerance ``eta`` achieved at ``omega0`` over a test set, plus a norm surrogate."""
    pots = problem.potentials if potentials is None else tuple(potentials)
    V = np.stack([p.values.astype(complex) for p in pots], axis=1)
    G = problem.G_vac(V)
    live = G > 1e-14 * max(1.0, float(np.abs(G).max()))
    if not live.any():
        raise ValueError("test set has no nonconstant potential")
    F = _F_columns(problem, omega0, V)
    ratios = np.abs(F[live]) / G[live]
    k = int(np.argmax(ratios))
    _certify(problem, problem.model, omega0)
    M = dtn_matrix(assemble(problem.mesh, problem.model.eval_field(omega0), omega0)).matrix
    M0 = problem.vacuum_dtn
    surrogate = float(np.linalg.norm(M - M0, 2) / (2 * np.linalg.norm(M0, 2)))
    names = [p.name for p, ok in zip(pots, live) if ok]
    return {"omega0": omega0, "eta_star": float(ratios[k]), "worst_potential": names[k],
            "per_potential": dict(zip(names, ratios.tolist())), "surrogate_norm_ratio": surrogate,
            "norm_caveat": NORM_CAVEAT}
