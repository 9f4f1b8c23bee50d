import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cloakbound.herglotz import (
    ExtrapolationError,
    HerglotzRepresentation,
    StieltjesRepresentation,
    atom_mass,
    compose_uniform,
    dirac_scan,
    eval_herglotz,
    extract_alpha,
    heaviside_length,
    log_cut_positive,
    principal_sqrt_cut_positive,
    richardson,
    stieltjes_to_herglotz,
    sumrule_integral,
    uniform_kernel,
    uniform_transform,
)


def upper_points(rng, n=100):
    return rng.uniform(-5, 5, n) + 1j * rng.uniform(1e-3, 5, n)


class TestRepresentation:
    def test_identity(self):
        assert eval_herglotz(HerglotzRepresentation(alpha=1.0), 1j) == pytest.approx(1j)

    def test_single_atom(self):
        rep = HerglotzRepresentation(atoms=[(0.0, 1.0)])
        assert eval_herglotz(rep, 1j) == pytest.approx(1j, abs=1e-15)

    def test_positive_imaginary_part(self, rng):
        rep = HerglotzRepresentation(alpha=0.3, beta=-1.0, atoms=[(-1.0, 0.5), (2.0, 1.5)],
                                     density=(np.linspace(0, 1, 11), np.ones(11)))
        vals = eval_herglotz(rep, upper_points(rng))
        assert np.all(vals.imag > 0)

    def test_density_is_folded(self):
        rep = HerglotzRepresentation(density=(np.linspace(0, 1, 5), np.ones(5)))
        assert rep.weights.sum() == pytest.approx(1.0)

    def test_atom_evaluation_rejected(self):
        rep = HerglotzRepresentation(atoms=[(1.0, 1.0)])
        with pytest.raises(ValueError):
            eval_herglotz(rep, 1.0)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            HerglotzRepresentation(alpha=-1.0)
        with pytest.raises(ValueError):
            HerglotzRepresentation(atoms=[(0.0, -1.0)])
        with pytest.raises(ValueError):
            StieltjesRepresentation(atoms=[(-1.0, 1.0)])
        with pytest.raises(ValueError):
            HerglotzRepresentation(density=(np.array([0.0, 1.0]), np.array([1.0, -1.0])))


class TestLimits:
    def test_alpha_closed_form(self):
        assert extract_alpha(lambda z: 2 * z + 1 / (1 - z)) == pytest.approx(2.0, abs=1e-8)

    def test_alpha_trivial(self):
        assert extract_alpha(lambda z: z) == pytest.approx(1.0, abs=1e-12)
        assert extract_alpha(lambda z: 1 / (1 - z) + 3.0) == pytest.approx(0.0, abs=1e-8)

    def test_alpha_non_convergent(self):
        with pytest.raises(ExtrapolationError):
            extract_alpha(lambda z: z * np.log(-1j * z), y_sequence=[1e2, 2e2, 4e2, 8e2])

    def test_atom_mass(self):
        f = HerglotzRepresentation(atoms=[(1.0, 2.0)]).as_function()
        assert atom_mass(f, 1.0) == pytest.approx(2.0, abs=1e-6)
        assert atom_mass(HerglotzRepresentation(atoms=[(3.0, 2.0)]).as_function(), 0.0) == pytest.approx(0.0, abs=1e-6)
        assert atom_mass(lambda z: z, 0.3) == pytest.approx(0.0, abs=1e-12)

    def test_richardson_polynomial_is_exact(self):
        t = np.array([0.4, 0.2, 0.1, 0.05])
        ex = richardson(t, 3.0 - 2 * t + t**2 - 0.5 * t**3)
        assert ex.value == pytest.approx(3.0, abs=1e-12)
        with pytest.raises(ExtrapolationError):
            richardson(np.array([0.1]), np.array([1.0]))


class TestBranches:
    def test_sqrt(self, rng):
        assert principal_sqrt_cut_positive(4.0) == pytest.approx(2.0)
        assert principal_sqrt_cut_positive(-1.0) == pytest.approx(1j)
        z = rng.normal(size=100) * 3 + 1j * rng.normal(size=100) * 3
        z = z[~((z.real < 0) & (np.abs(z.imag) < 1e-12))]
        w = principal_sqrt_cut_positive(-z)
        assert np.all(w.imag >= 0)
        assert np.allclose(w**2, -z)

    def test_log(self):
        assert log_cut_positive(1j) == pytest.approx(0.5j * np.pi)
        assert log_cut_positive(-1j) == pytest.approx(1.5j * np.pi)
        with pytest.raises(ValueError):
            log_cut_positive(0.0)

    def test_stieltjes_transform(self, rng):
        H = stieltjes_to_herglotz(StieltjesRepresentation(alpha=1.0))
        z = upper_points(rng, 5)
        assert np.allclose(H(z), z)
        H = stieltjes_to_herglotz(StieltjesRepresentation(atoms=[(1.0, 1.0)]))
        assert H(-1.0) == pytest.approx(-0.5)
        assert H(2j) == pytest.approx(2j / (1 - 2j))
        z = upper_points(rng, 50)
        assert np.allclose(H(z.conj()), H(z).conj())
        assert np.all(H(z).imag > 0)
        assert np.all(H(-rng.uniform(0.01, 10, 20)).real <= 0)


class TestUniformComposition:
    def test_imaginary_value(self):
        delta = 0.3
        v = compose_uniform(lambda z: 1j * delta, delta, 1j)
        assert v == pytest.approx(1j * np.pi / (4 * delta), rel=1e-14)

    def test_large_real_decays(self):
        assert abs(uniform_kernel(1e8, 0.5)) < 1e-7

    def test_imaginary_lower_bound(self, rng):
        delta = 0.5
        for h in upper_points(rng):
            v = uniform_kernel(h, delta)
            assert v.imag >= np.pi / (4 * delta) * (abs(h) <= delta) - 1e-12
            assert v.imag > 0

    def test_singular_only_at_endpoints(self):
        with pytest.raises(ValueError):
            uniform_kernel(0.5, 0.5)
        with pytest.raises(ValueError):
            uniform_kernel(-0.5, 0.5)
        assert np.isfinite(uniform_kernel(0.1, 0.5))
        with pytest.raises(ValueError):
            uniform_kernel(1.0, 0.0)


class TestSumRules:
    def test_poisson_mass(self):
        r = sumrule_integral(lambda z: 1 / (0.5 - z), (0.0, 1.0), points=[0.5])
        assert r.value == pytest.approx(1.0, abs=1e-4)
        assert r.as_dict()["value"] == r.value

    def test_atom_outside(self):
        r = sumrule_integral(lambda z: 1 / (2.0 - z), (0.0, 1.0))
        assert abs(r.value) < 1e-4

    def test_affine_bound_is_sharp(self):
        F_inf, x0, delta = 2.0, 1.0, 0.2
        H = lambda z: F_inf * (z - x0)
        r = sumrule_integral(uniform_transform(H, delta), (0.25, 4.0),
                             points=[x0 - delta / F_inf, x0 + delta / F_inf])
        assert r.value <= 1 / F_inf + 1e-6
        assert r.value == pytest.approx(1 / F_inf, abs=1e-4)

    def test_bad_ranges(self):
        with pytest.raises(ValueError):
            sumrule_integral(lambda z: z, (1.0, 0.0))
        with pytest.raises(ValueError):
            sumrule_integral(lambda z: z, (0.0, 1.0), y_sequence=[0.1, -0.1])

    def test_heaviside_length(self):
        x = np.linspace(0.25, 4, 3001)
        assert heaviside_length(x, x - 1, 0.2) == pytest.approx(0.4, abs=1e-9)
        assert heaviside_length(x, x - 1, 0.2) <= 4 * 0.2 / 1.0
        assert heaviside_length(x, x - 1, 10.0) == pytest.approx(3.75)
        assert heaviside_length(x, x - 1, 1e-9) < 1e-8
        with pytest.raises(ValueError):
            heaviside_length(x[::-1], x, 0.1)

    def test_dirac_scan(self):
        F_inf, x0 = 2.0, 1.0
        H = lambda z: F_inf * (z - x0)
        scan = dirac_scan(H, [0.0, 50.0], (0.5, 1.5), points=[x0])
        assert scan.values[0] == pytest.approx(1 / F_inf, abs=1e-4)
        assert abs(scan.values[1]) < 1e-3
        assert scan.best_xi == 0.0
        uniform = sumrule_integral(uniform_transform(H, 0.1), (0.5, 1.5), points=[0.95, 1.05]).value
        assert scan.best_value >= uniform - 1e-6


@settings(max_examples=30, deadline=None)
@given(
    locs=st.lists(st.floats(-5, 5), min_size=1, max_size=4),
    re=st.floats(-10, 10),
    im=st.floats(1e-3, 10),
)
def test_herglotz_property(locs, re, im):
    rep = HerglotzRepresentation(alpha=0.1, atoms=[(x, 1.0) for x in locs])
    z = complex(re, im)
    assert eval_herglotz(rep, z).imag > 0
    assert eval_herglotz(rep, z.conjugate()) == pytest.approx(eval_herglotz(rep, z).conjugate())
