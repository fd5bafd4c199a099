import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade_lab.errors import PreconditionError
from cascade_lab.galerkin import GalerkinState
from cascade_lab.normal_form import (NormalForm, default_support, divisor, gamma_truncated,
                                     generator_coefficient, generator_terms, is_resonant, random_unit_state)

SMALL = ((0, 0), (1, 0), (0, 1), (2, 1))
pts = st.tuples(st.integers(-3, 3), st.integers(-3, 3))


@pytest.fixture(scope="module")
def nf():
    return NormalForm(SMALL)


def state(nf, eps, seed=0):
    return nf.embed(GalerkinState(nf.support, eps * random_unit_state(nf.support, seed)))


def test_coefficient_examples():
    assert generator_coefficient((1, 0), (0, 0), (1, 0), (2, 0)) == pytest.approx(0.5j)
    assert generator_coefficient((0, 0), (1, 0), (1, 1), (0, 1)) == 0
    assert generator_coefficient((0, 0), (1, 0), (1, 1), (5, 5)) == 0
    assert divisor((1, 0), (0, 0), (1, 0), (2, 0)) == -2


def test_resonance_examples():
    assert is_resonant((0, 0), (1, 0), (1, 1), (0, 1))
    assert is_resonant((2, 3), (2, 3), (1, 1), (1, 1))
    assert not is_resonant((1, 0), (0, 0), (1, 0), (2, 0))
    assert not is_resonant((0, 0), (0, 0), (0, 0), (1, 0))


@settings(max_examples=200)
@given(pts, pts, pts)
def test_coefficient_conjugate_symmetry(n1, n2, n3):
    n4 = (n1[0] - n2[0] + n3[0], n1[1] - n2[1] + n3[1])
    c = generator_coefficient(n1, n2, n3, n4)
    assert generator_coefficient(n2, n1, n4, n3) == np.conj(c)
    assert generator_coefficient(n3, n2, n1, n4) == c
    assert (c == 0) == is_resonant(n1, n2, n3, n4)


def test_generator_terms_are_nonresonant():
    terms = generator_terms(default_support())
    assert terms
    assert all(not is_resonant(*t.quadruple) and t.coefficient != 0 for t in terms)


def test_closure_must_contain_support():
    with pytest.raises(PreconditionError):
        NormalForm(SMALL, closure=[(0, 0)])


def test_cubic_splits(nf):
    y = state(nf, 0.3)
    assert np.allclose(nf.cubic(y), nf.cubic_res(y) + nf.cubic_nonres(y), atol=1e-15)


def test_generator_field_is_hamiltonian(nf):
    """X_F = i dF/d(conj a) with F built term by term from the coefficient list."""
    terms = generator_terms(nf.modes)
    idx = nf.index

    def F(y):
        return 0.5 * sum(t.coefficient * y[idx[a]] * np.conj(y[idx[b]]) * y[idx[c]] * np.conj(y[idx[d]])
                         for t in terms for a, b, c, d in [t.quadruple]).real

    rng = np.random.default_rng(1)
    y = 0.2 * (rng.normal(size=nf.size) + 1j * rng.normal(size=nf.size))
    h = 1e-6
    field = nf.generator_field(y)
    for k in range(nf.size):
        e = np.zeros(nf.size)
        e[k] = h
        dx = (F(y + e) - F(y - e)) / (2 * h)
        dy = (F(y + 1j * e) - F(y - 1j * e)) / (2 * h)
        assert field[k] == pytest.approx(1j * 0.5 * (dx + 1j * dy), abs=1e-8)


def test_homological_equation(nf):
    """Along X_F the quadratic part changes at rate G_res - G."""
    y = state(nf, 0.5, seed=2)
    xf = nf.generator_field(y)
    h = 1e-5
    rate = (nf.quadratic(y + h * xf) - nf.quadratic(y - h * xf)) / (2 * h)
    assert rate == pytest.approx(nf.quartic_resonant(y) - nf.quartic(y), rel=1e-8)


def test_gamma_of_zero(nf):
    z = np.zeros(nf.size, dtype=complex)
    assert np.array_equal(nf.gamma(z), z)


def test_gamma_inverse(nf):
    y = state(nf, 0.1)
    back = nf.gamma(nf.gamma(y), direction=-1)
    assert np.max(np.abs(back - y)) < 1e-10


def test_gamma_preserves_mass(nf):
    y = state(nf, 0.2, seed=4)
    assert np.linalg.norm(nf.gamma(y)) == pytest.approx(np.linalg.norm(y), rel=1e-10)


def test_displacement_is_cubic(nf):
    y = state(nf, 1e-3, seed=5)
    d = nf.displacement(y)
    assert np.max(np.abs(d - nf.generator_field(y))) < 1e-6 * np.max(np.abs(d))


def test_remainder_two_ways(nf):
    for eps in (0.1, 0.03):
        y = state(nf, eps, seed=6)
        direct = nf.hamiltonian(nf.gamma(y)) - nf.quadratic(y) - nf.quartic_resonant(y)
        assert nf.remainder(y) == pytest.approx(direct, rel=1e-4, abs=1e-15)


def test_remainder_field_shape(nf):
    y = state(nf, 1e-2, seed=7)
    f = nf.remainder_field(y)
    assert f.shape == (len(SMALL),) and np.all(np.isfinite(f))


def test_gamma_truncated_round_trip():
    s = GalerkinState(SMALL, 0.05 * random_unit_state(SMALL, 8))
    fwd = gamma_truncated(s)
    nf = NormalForm(SMALL)
    assert fwd.modes == nf.modes
    assert np.max(np.abs(fwd.values - nf.gamma(nf.embed(s)))) < 1e-15
    # the inverse runs on the larger closure of fwd's modes, so the round trip
    # is exact only up to terms of fifth order in the amplitude
    back = gamma_truncated(fwd, direction=-1)
    orig = dict(s.as_dict())
    amp = np.max(np.abs(s.values))
    for n, v in back.as_dict().items():
        assert abs(v - orig.get(n, 0)) < 10 * amp ** 5
    with pytest.raises(PreconditionError):
        gamma_truncated(s, direction=0)


def test_random_unit_state():
    u = random_unit_state(default_support(), 3)
    assert np.sum(np.abs(u)) == pytest.approx(1.0)
    assert len(u) == 12
