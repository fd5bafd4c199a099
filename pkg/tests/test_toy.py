import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade_lab.errors import PreconditionError
from cascade_lab.integrator import IntegratorConfig, integrate
from cascade_lab.toy import (OMEGA, OMEGA2, ExactOrbit, OrbitKind, ToyParams, ToyState, exact_orbit_derivative,
                             exact_orbit_point, toy_field, toy_hamiltonian, toy_mass, toy_rhs)

amp = st.floats(-1.0, 1.0, allow_nan=False)
states = st.lists(st.tuples(amp, amp), min_size=5, max_size=9).map(lambda v: np.array([complex(a, b) for a, b in v]))


def unit(n, j, value=1.0):
    b = np.zeros(n, dtype=complex)
    b[j - 1] = value
    return b


def test_single_mode_rate():
    rates = toy_rhs(unit(6, 3))
    assert rates[2] == pytest.approx(-1j)
    assert np.all(np.delete(rates, 2) == 0)


def test_zero_state_has_zero_rates():
    assert np.all(toy_rhs(np.zeros(5)) == 0)


@pytest.mark.parametrize("t", [0.0, 0.7, 2.5])
def test_periodic_orbit_solves_the_field(t):
    b = unit(6, 2, np.exp(-1j * t))
    assert toy_rhs(b)[1] == pytest.approx(-1j * np.exp(-1j * t), abs=1e-15)


def test_rhs_by_hand_with_neighbours():
    # b = (0, x, y, 0, 0): rate_2 = -i x^2 conj(x) + 2i conj(x) y^2
    x, y = 0.3 + 0.2j, -0.1 + 0.5j
    b = np.array([0, x, y, 0, 0])
    r = toy_rhs(b)
    assert r[1] == pytest.approx(-1j * x * x * np.conj(x) + 2j * np.conj(x) * y * y)
    assert r[2] == pytest.approx(-1j * y * y * np.conj(y) + 2j * np.conj(y) * x * x)
    assert r[0] == 0 and r[3] == 0


@pytest.mark.parametrize("theta", [0.0, 1.0, -2.3])
def test_single_mode_energy(theta):
    assert toy_hamiltonian(unit(5, 4, np.exp(1j * theta))) == pytest.approx(0.25)


def test_energy_zero_state():
    assert toy_hamiltonian(np.zeros(5)) == 0.0


def test_energy_at_heteroclinic_midpoint():
    b = np.zeros(5, dtype=complex)
    b[1], b[2] = OMEGA / math.sqrt(2), OMEGA2 / math.sqrt(2)
    assert toy_hamiltonian(b) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("t", [-3.0, -0.4, 0.0, 1.1, 5.0])
def test_heteroclinic_mass_is_one(t):
    s = exact_orbit_point(ExactOrbit(OrbitKind.HETERO_PLUS, 2, 6), t)
    assert toy_mass(s) == pytest.approx(1.0, abs=1e-14)


def test_uniform_mass():
    assert toy_mass(np.full(7, 1 / math.sqrt(7))) == pytest.approx(1.0)


def test_periodic_point_at_pi():
    s = exact_orbit_point(ExactOrbit(OrbitKind.PERIODIC, 3, 6), math.pi)
    assert s.mode(3) == pytest.approx(-1.0, abs=1e-15)


def test_heteroclinic_at_zero():
    s = exact_orbit_point(ExactOrbit(OrbitKind.HETERO_PLUS, 2, 6), 0.0)
    assert abs(s.mode(2)) == pytest.approx(1 / math.sqrt(2))
    assert abs(s.mode(3)) == pytest.approx(1 / math.sqrt(2))
    # b_j carries omega^2 and b_{j+1} omega (the phase pairing that solves the field)
    assert s.mode(3) / s.mode(2) == pytest.approx(OMEGA / OMEGA2)


def test_heteroclinic_limit_is_next_orbit():
    s = exact_orbit_point(ExactOrbit(OrbitKind.HETERO_PLUS, 2, 6), 20.0)
    assert abs(s.mode(3)) == pytest.approx(1.0, abs=1e-12)
    assert abs(s.mode(2)) < 1e-12


def test_orbit_index_contract():
    with pytest.raises(PreconditionError):
        ExactOrbit(OrbitKind.HETERO_PLUS, 6, 6)
    ExactOrbit(OrbitKind.PERIODIC, 6, 6)


def test_params_contract():
    with pytest.raises(PreconditionError):
        ToyParams(n_modes=4)
    with pytest.raises(PreconditionError):
        ToyParams(delta=0.2, sigma=0.15)


@pytest.mark.parametrize("kind", [OrbitKind.HETERO_PLUS, OrbitKind.HETERO_MINUS, OrbitKind.PERIODIC])
def test_exact_orbit_residual(kind):
    orbit = ExactOrbit(kind, 2, 6, phase=0.4)
    for t in np.linspace(-4, 4, 17):
        b = exact_orbit_point(orbit, t).modes
        d = exact_orbit_derivative(orbit, t)
        assert np.max(np.abs(toy_rhs(b) - d)) <= 1e-12 * max(1.0, np.max(np.abs(d)))


def test_derivative_matches_finite_difference():
    # independent check of the analytic derivative
    orbit = ExactOrbit(OrbitKind.HETERO_PLUS, 3, 6)
    h = 1e-6
    for t in (-1.0, 0.3):
        fd = (exact_orbit_point(orbit, t + h).modes - exact_orbit_point(orbit, t - h).modes) / (2 * h)
        assert np.allclose(fd, exact_orbit_derivative(orbit, t), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(states, st.floats(0, 2 * math.pi))
def test_phase_equivariance(b, phi):
    rot = np.exp(1j * phi)
    assert np.allclose(toy_rhs(rot * b), rot * toy_rhs(b), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(states)
def test_conserved_quantities_are_stationary(b):
    # dh/dt and dM/dt along the field vanish identically
    v = toy_rhs(b)
    eps = 1e-7
    for f in (toy_hamiltonian, toy_mass):
        rate = (f(b + eps * v) - f(b - eps * v)) / (2 * eps)
        assert abs(rate) < 1e-6 * (1 + np.sum(np.abs(b)) ** 4)


def test_conservation_along_trajectory():
    rng = np.random.default_rng(1)
    b0 = rng.normal(size=6) + 1j * rng.normal(size=6)
    b0 /= np.sqrt(toy_mass(b0))
    tr = integrate(toy_field, b0, 0.0, 20.0, IntegratorConfig())
    h0, m0 = toy_hamiltonian(b0), toy_mass(b0)
    assert abs(toy_hamiltonian(tr.y_final) - h0) < 1e-9
    assert abs(toy_mass(tr.y_final) - m0) < 1e-9


def test_invariant_plane():
    b0 = np.zeros(6, dtype=complex)
    b0[2], b0[3] = 0.8, 0.6j
    tr = integrate(toy_field, b0, 0.0, 10.0, IntegratorConfig())
    others = np.abs(tr.sample(np.linspace(0, 10, 50))[:, [0, 1, 4, 5]])
    assert others.max() == 0.0


def test_phase_lock_plane_is_preserved():
    # on L_j with mass 1, theta_j - theta_{j+1} = pi/3 is a fixed relation
    r = 0.6
    b0 = np.zeros(5, dtype=complex)
    b0[1] = r * np.exp(1j * math.pi / 3)
    b0[2] = math.sqrt(1 - r * r)
    v = toy_rhs(b0)
    dphase = (v[1] / b0[1]).imag - (v[2] / b0[2]).imag
    assert abs(dphase) < 1e-12


def test_state_is_immutable():
    s = ToyState([1, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        s.modes[0] = 2
