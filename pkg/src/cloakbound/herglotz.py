"""Scalar Herglotz and Stieltjes functions.

Measures are finite lists of atoms ``(xi, weight)``; an absolutely continuous
part can be supplied as samples on a grid and is folded into atoms with
trapezoid weights.  Limits ``y -> 0`` and ``y -> oo`` are taken along
geometric sequences and Richardson-extrapolated.

Branch convention: both the square root and the logarithm use ``arg`` in
``[0, 2*pi)``, so their cut is the positive real axis and values on it are
the limits from the upper half-plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate

Domain = Literal["upper", "slit_negative", "slit_positive", "interval"]


class ExtrapolationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# representations


def _fold_density(density) -> list[tuple[float, float]]:
    if density is None:
        return []
    xi, vals = (np.asarray(d, dtype=float) for d in density)
    if xi.ndim != 1 or xi.shape != vals.shape or xi.size < 2:
        raise ValueError("density must be two equal-length 1-d arrays with at least two samples")
    if np.any(vals < 0):
        raise ValueError("density must be non-negative")
    w = np.zeros_like(xi)
    h = np.diff(xi)
    w[:-1] += h / 2
    w[1:] += h / 2
    return list(zip(xi.tolist(), (w * vals).tolist()))


@dataclass(frozen=True)
class HerglotzRepresentation:
    """``h(z) = alpha z + beta + sum_k w_k (1/(xi_k - z) - xi_k/(1 + xi_k^2))``."""

    alpha: float = 0.0
    beta: float = 0.0
    atoms: Sequence[tuple[float, float]] = ()
    density: tuple[np.ndarray, np.ndarray] | None = None
    _points: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        pts = [(float(x), float(w)) for x, w in self.atoms] + _fold_density(self.density)
        if any(w < 0 for _, w in pts):
            raise ValueError("atom weights must be non-negative")
        object.__setattr__(self, "_points", tuple(pts))

    @property
    def locations(self) -> np.ndarray:
        return np.array([p[0] for p in self._points], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([p[1] for p in self._points], dtype=float)

    def as_function(self) -> "SampledFunction":
        return SampledFunction(lambda z: eval_herglotz(self, z), "upper")


@dataclass(frozen=True)
class StieltjesRepresentation:
    """``s(z) = alpha + sum_k w_k / (xi_k + z)`` with every ``xi_k >= 0``."""

    alpha: float = 0.0
    atoms: Sequence[tuple[float, float]] = ()
    density: tuple[np.ndarray, np.ndarray] | None = None
    _points: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        pts = [(float(x), float(w)) for x, w in self.atoms] + _fold_density(self.density)
        if any(x < 0 for x, _ in pts):
            raise ValueError("Stieltjes measures live on [0, oo)")
        if any(w < 0 for _, w in pts):
            raise ValueError("atom weights must be non-negative")
        object.__setattr__(self, "_points", tuple(pts))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, self.alpha, dtype=complex)
        for xi, w in self._points:
            out = out + w / (xi + z)
        return out if out.ndim else complex(out)

    def as_function(self) -> "SampledFunction":
        return SampledFunction(self, "slit_negative")


@dataclass(frozen=True)
class SampledFunction:
    """A scalar evaluator with a declared domain.

    ``evaluator`` must accept a complex scalar; arrays are handled
    element-wise by :meth:`__call__`.
    """

    evaluator: Callable[[complex], complex]
    domain: Domain = "upper"

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if z.ndim == 0:
            return complex(self.evaluator(complex(z)))
        return np.array([self.evaluator(complex(v)) for v in z.ravel()], dtype=complex).reshape(z.shape)


def eval_herglotz(rep: HerglotzRepresentation, z) -> complex | np.ndarray:
    z = np.asarray(z, dtype=complex)
    xi = rep.locations
    if xi.size and np.any(np.isin(z[z.imag == 0].real, xi)):
        raise ValueError("evaluation point coincides with an atom of the measure")
    out = rep.alpha * z + rep.beta
    if xi.size:
        w = rep.weights
        kern = 1.0 / (xi - z[..., None]) - xi / (1.0 + xi**2)
        out = out + kern @ w
    return out if np.ndim(out) else complex(out)


# ---------------------------------------------------------------------------
# limits


@dataclass(frozen=True)
class Extrapolation:
    value: float | complex
    error: float
    samples: np.ndarray
    parameters: np.ndarray


def richardson(t: np.ndarray, values: np.ndarray, order: int = 3) -> Extrapolation:
    """Polynomial extrapolation of ``values(t)`` to ``t = 0`` (Neville tableau).

    Only the ``order + 1`` samples with the smallest ``t`` are used; the
    error estimate is the change between the last two diagonal entries.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values)
    if t.size < 2:
        raise ExtrapolationError("need at least two samples to extrapolate")
    idx = np.argsort(t)[: order + 1][::-1]
    tt, vv = t[idx], values[idx].astype(complex)
    if not np.all(np.isfinite(vv)):
        raise ExtrapolationError("non-finite samples in the extrapolation sequence")
    n = tt.size
    table = [vv.copy()]
    for k in range(1, n):
        prev = table[-1]
        cur = (tt[k:] * prev[:-1] - tt[: n - k] * prev[1:]) / (tt[k:] - tt[: n - k])
        table.append(cur)
    best = table[-1][-1]
    err = abs(best - table[-2][-1])
    val = best.real if np.all(np.isreal(values)) else best
    return Extrapolation(val, float(err), values, t)


def default_y_large(y_max: float = 1e6, n: int = 12) -> np.ndarray:
    return y_max / 2.0 ** np.arange(n)[::-1]


def default_y_small(y_max: float = 1e-1, n: int = 12) -> np.ndarray:
    return y_max / 2.0 ** np.arange(n)


def extract_alpha(f: Callable, y_sequence=None, rtol: float = 1e-6) -> float:
    """``lim f(iy)/(iy)`` as ``y -> oo``, extrapolated in ``1/y``.

    Raises :class:`ExtrapolationError` when the tableau error exceeds ``rtol``
    relative to the value (absolute when the value is below one).
    """
    y = default_y_large() if y_sequence is None else np.asarray(y_sequence, dtype=float)
    vals = np.array([f(1j * yy) / (1j * yy) for yy in y])
    ex = richardson(1.0 / y, vals.real)
    if ex.error > rtol * max(1.0, abs(ex.value)):
        raise ExtrapolationError(f"alpha extrapolation did not settle (error {ex.error:.2e})")
    return float(ex.value)


def atom_mass(f: Callable, a: float, y_sequence=None) -> float:
    """``lim y Im f(a + iy)`` as ``y -> 0``."""
    y = default_y_small() if y_sequence is None else np.asarray(y_sequence, dtype=float)
    vals = np.array([yy * complex(f(a + 1j * yy)).imag for yy in y])
    return float(richardson(y, vals).value)


# ---------------------------------------------------------------------------
# branches and compositions


def _arg_cut_positive(w):
    ang = np.angle(w)
    return np.where(ang < 0, ang + 2 * np.pi, ang)


def principal_sqrt_cut_positive(z):
    """Square root with ``arg z`` in ``[0, 2 pi)``; lands in the closed upper half-plane."""
    z = np.asarray(z, dtype=complex)
    out = np.sqrt(np.abs(z)) * np.exp(0.5j * _arg_cut_positive(z))
    return out if out.ndim else complex(out)


def log_cut_positive(w):
    w = np.asarray(w, dtype=complex)
    if np.any(w == 0):
        raise ValueError("logarithm of zero")
    out = np.log(np.abs(w)) + 1j * _arg_cut_positive(w)
    return out if out.ndim else complex(out)


def stieltjes_to_herglotz(s: Callable) -> SampledFunction:
    """``H(z) = z s(-z)``; Herglotz and analytic off the positive real axis."""
    return SampledFunction(lambda z: z * s(-z), "slit_positive")


def uniform_kernel(h, delta: float):
    """``(1/2 delta) log((h - delta)/(h + delta))`` for a value (or array) ``h``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    h = np.asarray(h, dtype=complex)
    if np.any(np.isclose(h, delta, rtol=0, atol=1e-15 * delta)) or np.any(
        np.isclose(h, -delta, rtol=0, atol=1e-15 * delta)
    ):
        raise ValueError("H equals +-delta: the composed function is singular there")
    return log_cut_positive((h - delta) / (h + delta)) / (2 * delta)


def compose_uniform(H: Callable, delta: float, z: complex) -> complex:
    """Uniform measure on ``[-delta, delta]`` composed with ``H`` at ``z``."""
    return complex(uniform_kernel(H(z), delta))


def uniform_transform(H: Callable, delta: float) -> SampledFunction:
    return SampledFunction(lambda z: compose_uniform(H, delta, z), "upper")


def dirac_transform(H: Callable, xi: float) -> SampledFunction:
    return SampledFunction(lambda z: 1.0 / (xi - H(z)), "upper")


# ---------------------------------------------------------------------------
# sum rules


@dataclass(frozen=True)
class SumRuleResult:
    value: float
    error: float
    y: np.ndarray
    integrals: np.ndarray
    quad_errors: np.ndarray

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "error": self.error,
            "y": self.y.tolist(),
            "integrals": self.integrals.tolist(),
            "quad_errors": self.quad_errors.tolist(),
        }


def sumrule_integral(
    Hmu: Callable,
    x_range: tuple[float, float],
    y_sequence=None,
    points: Sequence[float] | None = None,
    limit: int = 400,
) -> SumRuleResult:
    """``(1/pi) int_{x-}^{x+} Im Hmu(x + iy) dx`` extrapolated to ``y = 0``.

    ``points`` marks abscissae where the integrand is expected to peak
    (atoms, crossings ``|H| = delta``) and is handed to the adaptive
    quadrature.
    """
    lo, hi = map(float, x_range)
    if not lo < hi:
        raise ValueError("empty integration range")
    y = np.geomspace(1e-2, 1e-2 / 2**7, 8) if y_sequence is None else np.asarray(y_sequence, dtype=float)
    if np.any(y <= 0):
        raise ValueError("y_sequence must be positive")
    pts = None
    if points is not None:
        pts = sorted(p for p in points if lo < p < hi) or None
    vals, qerr = [], []
    for yy in y:
        v, e = integrate.quad(lambda x: complex(Hmu(x + 1j * yy)).imag, lo, hi, points=pts, limit=limit,
                              epsabs=1e-13, epsrel=1e-11)
        vals.append(v / np.pi)
        qerr.append(e / np.pi)
    vals = np.array(vals)
    qerr = np.array(qerr)
    ex = richardson(y, vals, order=2)
    return SumRuleResult(float(ex.value), float(ex.error + qerr.max()), y, vals, qerr)


def heaviside_length(x: np.ndarray, H_values: np.ndarray, delta: float) -> float:
    """Length of ``{x : |H(x)| <= delta}`` with linear interpolation at crossings."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=float)
    g = np.abs(np.asarray(H_values)) - delta
    if x.shape != g.shape or x.size < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("need an increasing grid with one value per point")
    g0, g1, h = g[:-1], g[1:], np.diff(x)
    inside = (g0 <= 0) & (g1 <= 0)
    total = h[inside].sum()
    cross = (g0 <= 0) != (g1 <= 0)
    frac = g0[cross] / (g0[cross] - g1[cross])
    part = np.where(g0[cross] <= 0, frac, 1.0 - frac)
    return float(total + (h[cross] * part).sum())


@dataclass(frozen=True)
class DiracScan:
    xi: np.ndarray
    values: np.ndarray
    best_xi: float
    best_value: float


def dirac_scan(H: Callable, xi_grid, x_range, y_sequence=None, points=None) -> DiracScan:
    """Maximize the sum-rule integral of ``1/(xi - H(z))`` over ``xi``."""
    xi_grid = np.asarray(xi_grid, dtype=float)
    vals = np.array(
        [sumrule_integral(dirac_transform(H, xi), x_range, y_sequence, points).value for xi in xi_grid]
    )
    k = int(np.argmax(vals))
    return DiracScan(xi_grid, vals, float(xi_grid[k]), float(vals[k]))
