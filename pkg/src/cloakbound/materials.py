"""Piecewise dispersive permittivity laws and sampled hypothesis checks.

Time convention is ``exp(-i omega t)``: passive laws have ``Im[omega eps] >= 0``
on the upper half-plane.  A scalar Lorentz law reads

    eps(omega) = eps0 * (1 + sum_j wp2_j / (w0_j**2 - omega**2 - 1j*gamma_j*omega)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from cloakbound.geometry import Mesh, ObstacleMask

ANGLE_GRID = 1024


class MaterialError(ValueError):
    pass


class PoleError(MaterialError):
    """Evaluation at an undamped resonance."""


@dataclass(frozen=True)
class Pole:
    wp2: float
    w0: float
    gamma: float = 0.0

    def __post_init__(self):
        if not self.wp2 > 0:
            raise MaterialError(f"plasma strength must be positive, got {self.wp2}")
        if self.w0 < 0 or self.gamma < 0:
            raise MaterialError("resonance and damping must be non-negative")


def _lorentz_susceptibility(poles: Sequence[Pole], omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=complex)
    chi = np.zeros_like(omega)
    for p in poles:
        den = p.w0**2 - omega**2 - 1j * p.gamma * omega
        if np.any(den == 0):
            raise PoleError(f"omega hits the undamped resonance at {p.w0}")
        chi = chi + p.wp2 / den
    return chi


@dataclass(frozen=True)
class ConstantTensor:
    tensor: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tensor, dtype=complex)
        if np.ndim(t) == 0:
            t = t * np.eye(2)
        if t.shape != (2, 2) or not np.all(np.isfinite(t)):
            raise MaterialError("constant tensor must be a finite 2x2 matrix")
        object.__setattr__(self, "tensor", t)

    dispersive = False

    def __call__(self, omega, eps0: float) -> np.ndarray:
        omega = np.asarray(omega, dtype=complex)
        return np.broadcast_to(self.tensor, omega.shape + (2, 2)).copy()

    def high_frequency(self, eps0: float) -> np.ndarray:
        return self.tensor.copy()

    @property
    def symmetric(self) -> bool:
        return bool(np.allclose(self.tensor, self.tensor.T, rtol=0, atol=0))

    def resonances(self) -> list[Pole]:
        return []


@dataclass(frozen=True)
class LorentzSum:
    poles: tuple[Pole, ...]

    def __post_init__(self):
        object.__setattr__(self, "poles", tuple(self.poles))

    dispersive = True
    symmetric = True

    def __call__(self, omega, eps0: float) -> np.ndarray:
        omega = np.asarray(omega, dtype=complex)
        scalar = eps0 * (1.0 + _lorentz_susceptibility(self.poles, omega))
        return scalar[..., None, None] * np.eye(2)

    def high_frequency(self, eps0: float) -> np.ndarray:
        return eps0 * np.eye(2, dtype=complex)

    def resonances(self) -> list[Pole]:
        return list(self.poles)


@dataclass(frozen=True)
class AnisotropicLorentz:
    """Diagonal law with an independent Lorentz pole list per axis."""

    poles_x: tuple[Pole, ...]
    poles_y: tuple[Pole, ...]

    def __post_init__(self):
        object.__setattr__(self, "poles_x", tuple(self.poles_x))
        object.__setattr__(self, "poles_y", tuple(self.poles_y))

    dispersive = True
    symmetric = True

    def __call__(self, omega, eps0: float) -> np.ndarray:
        omega = np.asarray(omega, dtype=complex)
        out = np.zeros(omega.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = eps0 * (1.0 + _lorentz_susceptibility(self.poles_x, omega))
        out[..., 1, 1] = eps0 * (1.0 + _lorentz_susceptibility(self.poles_y, omega))
        return out

    def high_frequency(self, eps0: float) -> np.ndarray:
        return eps0 * np.eye(2, dtype=complex)

    def resonances(self) -> list[Pole]:
        return list(self.poles_x) + list(self.poles_y)


def law_from_config(entry: Mapping) -> ConstantTensor | LorentzSum | AnisotropicLorentz:
    """Build a material law from its config mapping."""
    kind = entry["type"]
    if kind == "constant":
        return ConstantTensor(np.asarray(entry["tensor"], dtype=complex))
    if kind == "lorentz":
        return LorentzSum(tuple(Pole(**p) for p in entry.get("poles", [])))
    if kind == "anisotropic_lorentz":
        return AnisotropicLorentz(
            tuple(Pole(**p) for p in entry.get("poles_x", [])),
            tuple(Pole(**p) for p in entry.get("poles_y", [])),
        )
    raise MaterialError(f"unknown material type {kind!r}")


@dataclass(frozen=True, eq=False)
class PermittivityModel:
    """Material law per region, with a region label per triangle.

    ``obstacle`` flags the triangles of O; every other triangle is cloak.
    """

    vacuum_eps0: float
    regions: Mapping[str, object]
    assignment: np.ndarray
    obstacle: np.ndarray
    interval: tuple[float, float] | None = None
    _labels: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not self.vacuum_eps0 > 0:
            raise MaterialError("eps0 must be positive")
        assignment = np.asarray(self.assignment)
        missing = set(np.unique(assignment)) - set(self.regions)
        if missing:
            raise MaterialError(f"triangles reference unknown regions {sorted(missing)}")
        obstacle = np.asarray(self.obstacle, dtype=bool)
        if obstacle.shape != assignment.shape:
            raise MaterialError("obstacle flags and assignment differ in length")
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "obstacle", obstacle)
        object.__setattr__(self, "_labels", tuple(sorted(self.regions)))
        if self.interval is not None:
            lo, hi = self.interval
            for label in self.cloak_labels:
                for p in self.regions[label].resonances():
                    if p.gamma == 0 and lo <= p.w0 <= hi:
                        raise MaterialError(
                            f"undamped resonance {p.w0} of cloak region {label!r} lies in [{lo}, {hi}]"
                        )

    @classmethod
    def two_phase(
        cls,
        mask: ObstacleMask,
        obstacle_law,
        cloak_law,
        eps0: float = 1.0,
        interval: tuple[float, float] | None = None,
    ) -> "PermittivityModel":
        assignment = np.where(mask.member, "obstacle", "cloak")
        return cls(
            vacuum_eps0=eps0,
            regions={"obstacle": obstacle_law, "cloak": cloak_law},
            assignment=assignment,
            obstacle=mask.member,
            interval=interval,
        )

    @classmethod
    def vacuum(cls, mesh: Mesh, eps0: float = 1.0, obstacle: np.ndarray | None = None) -> "PermittivityModel":
        n = mesh.n_triangles
        ob = np.zeros(n, dtype=bool) if obstacle is None else np.asarray(obstacle, dtype=bool)
        return cls(
            vacuum_eps0=eps0,
            regions={"vacuum": ConstantTensor(eps0 * np.eye(2))},
            assignment=np.full(n, "vacuum"),
            obstacle=ob,
        )

    @property
    def n_triangles(self) -> int:
        return self.assignment.shape[0]

    @property
    def cloak_labels(self) -> list[str]:
        return sorted(set(self.assignment[~self.obstacle]))

    @property
    def obstacle_labels(self) -> list[str]:
        return sorted(set(self.assignment[self.obstacle]))

    @property
    def dispersive_obstacle(self) -> bool:
        return any(self.regions[l].dispersive for l in self.obstacle_labels)

    @property
    def reciprocal(self) -> bool:
        return all(self.regions[l].symmetric for l in self._labels if l in set(self.assignment))

    def eval_field(self, omega: complex) -> np.ndarray:
        """Per-triangle tensors at one frequency, shape (n_triangles, 2, 2)."""
        out = np.empty((self.n_triangles, 2, 2), dtype=complex)
        for label in self._labels:
            sel = self.assignment == label
            if sel.any():
                out[sel] = self.regions[label](omega, self.vacuum_eps0)
        return out

    def eval(self, triangle: int, omega: complex) -> np.ndarray:
        if not 0 <= triangle < self.n_triangles:
            raise IndexError(f"triangle {triangle} out of range")
        return self.regions[self.assignment[triangle]](omega, self.vacuum_eps0)

    def with_obstacle_frozen(self, omega0: float) -> "PermittivityModel":
        """Reference model: cloak laws unchanged, obstacle frozen at ``omega0``."""
        regions = dict(self.regions)
        for label in self.obstacle_labels:
            regions[label] = ConstantTensor(self.regions[label](omega0, self.vacuum_eps0))
        return PermittivityModel(
            vacuum_eps0=self.vacuum_eps0,
            regions=regions,
            assignment=self.assignment,
            obstacle=self.obstacle,
        )


def eval_permittivity(model: PermittivityModel, triangle: int, omega: complex) -> np.ndarray:
    return model.eval(triangle, omega)


def _region_values(model: PermittivityModel, omega) -> dict[str, np.ndarray]:
    present = set(model.assignment)
    return {l: model.regions[l](omega, model.vacuum_eps0) for l in model._labels if l in present}


def _herm_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def _im_part(m: np.ndarray) -> np.ndarray:
    """Matrix imaginary part (M - M^H) / 2i."""
    return (m - np.conj(np.swapaxes(m, -1, -2))) / 2j


def check_passivity(model: PermittivityModel, grid) -> float:
    """Smallest eigenvalue of ``Im[omega eps] - Im(omega) eps0 I`` over the grid.

    Non-negative certifies the vacuum comparison bound at every sample.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=complex)).ravel()
    if np.any(grid.imag <= 0):
        raise MaterialError("passivity grid must lie in the open upper half-plane")
    worst = np.inf
    for eps in _region_values(model, grid).values():
        m = _im_part(grid[:, None, None] * eps) - (grid.imag * model.vacuum_eps0)[:, None, None] * np.eye(2)
        worst = min(worst, float(np.linalg.eigvalsh(m).min()))
    return worst


def default_cplus_grid(lo: float = 0.1, hi: float = 5.0, n: int = 10) -> np.ndarray:
    re = np.geomspace(lo, hi, n)
    im = np.geomspace(lo, hi, n)
    return (re[:, None] + 1j * im[None, :]).ravel()


@dataclass(frozen=True)
class LosslessReport:
    lossless: bool
    max_imag: float


def check_lossless(model: PermittivityModel, interval, samples: int = 100, tol: float = 1e-14) -> LosslessReport:
    """Whether every cloak law is real on the real frequency interval."""
    lo, hi = interval
    if not 0 < lo < hi:
        raise MaterialError("need 0 < omega_- < omega_+")
    w = np.linspace(lo, hi, samples)
    worst = 0.0
    for label in model.cloak_labels:
        eps = model.regions[label](w, model.vacuum_eps0)
        worst = max(worst, float(np.linalg.norm(eps.imag, ord=2, axis=(-2, -1)).max()))
    return LosslessReport(worst <= tol, worst)


def epsilon_infinity(model: PermittivityModel) -> np.ndarray:
    """High-frequency permittivity: obstacle tensor on O, ``eps0 I`` elsewhere."""
    if model.dispersive_obstacle:
        raise MaterialError("dispersive obstacle: build the frozen reference model first")
    out = np.empty((model.n_triangles, 2, 2), dtype=complex)
    out[:] = model.vacuum_eps0 * np.eye(2)
    for label in model.obstacle_labels:
        sel = (model.assignment == label) & model.obstacle
        out[sel] = model.regions[label].high_frequency(model.vacuum_eps0)
    return out


@dataclass(frozen=True)
class DecayReport:
    y: np.ndarray
    deviation: np.ndarray
    passed: bool


def check_high_frequency_limit(model: PermittivityModel, y_sequence, threshold: float = 1e-6) -> DecayReport:
    """Deviation ``max_T ||eps(x_T, iy) - eps_inf(x_T)||`` along the imaginary axis."""
    y = np.asarray(y_sequence, dtype=float)
    if np.any(np.diff(y) <= 0):
        raise MaterialError("y_sequence must be increasing")
    inf_by_label = {}
    for label in set(model.assignment):
        on_ob = np.any(model.obstacle[model.assignment == label])
        law = model.regions[label]
        inf_by_label[label] = law.high_frequency(model.vacuum_eps0) if on_ob else model.vacuum_eps0 * np.eye(2)
    dev = np.zeros_like(y)
    for label, einf in inf_by_label.items():
        vals = model.regions[label](1j * y, model.vacuum_eps0)
        dev = np.maximum(dev, np.linalg.norm(vals - einf, ord=2, axis=(-2, -1)))
    passed = bool(np.all(np.diff(dev) <= 0) and dev[-1] < threshold)
    return DecayReport(y, dev, passed)


@dataclass(frozen=True)
class CoercivityReport:
    margin: float
    angle: float
    certified: bool


def coercivity_margin(model: PermittivityModel, omega: complex, n_angles: int = ANGLE_GRID) -> CoercivityReport:
    """Best uniform lower bound of ``Im[e^{i g} omega eps]`` over a grid of angles g."""
    omega = complex(omega)
    mats = np.stack([omega * v for v in _region_values(model, omega).values()])
    angles = 2 * np.pi * np.arange(n_angles) / n_angles
    rot = np.exp(1j * angles)[:, None, None, None] * mats[None]
    lam = np.linalg.eigvalsh(_im_part(rot)).min(axis=(-2, -1))
    k = int(np.argmax(lam))
    if lam[k] <= 0:
        return CoercivityReport(0.0, float(angles[k]), False)
    return CoercivityReport(float(lam[k]), float(angles[k]), True)


def obstacle_lower_bound(model: PermittivityModel, omega: complex | None = None) -> float:
    """Smallest eigenvalue of the (Hermitian part of the) obstacle tensors."""
    lam = np.inf
    for label in model.obstacle_labels:
        law = model.regions[label]
        t = law.high_frequency(model.vacuum_eps0) if omega is None else law(omega, model.vacuum_eps0)
        lam = min(lam, float(np.linalg.eigvalsh(_herm_part(t)).min()))
    return lam
