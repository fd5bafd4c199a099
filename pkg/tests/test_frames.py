import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade_lab.errors import (DegenerateAngle, DegenerateTarget, InfeasibleMass, NonPositiveInput, NoCrossing,
                                NoSolution)
from cascade_lab.frames import (OMEGA, OMEGA2, SaddleFrame, cancellation_ratio, cancellation_target, f2,
                                frame_transfer, from_saddle_frame, global_map, local_map, pushforward_rhs,
                                reduced_ham_coeffs, reduced_hamiltonian, reduced_rhs, reduced_vector_field,
                                solve_cancellation, straightened_p2, to_saddle_frame, transit_time)
from cascade_lab.integrator import IntegratorConfig
from cascade_lab.toy import ExactOrbit, OrbitKind, exact_orbit_point, toy_hamiltonian

SQ3 = math.sqrt(3.0)
small = st.floats(-0.2, 0.2, allow_nan=False)


def random_mass_one(n, j, rng, spread=0.3):
    b = spread * (rng.normal(size=n) + 1j * rng.normal(size=n))
    b[j - 1] = 1.0 + 0.2j
    return b / np.linalg.norm(b)


def jacobian(f, x, h=1e-7):
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.array(cols).T


def test_fixed_point_of_reduction():
    b = np.zeros(6, dtype=complex)
    b[2] = np.exp(0.7j)
    f = to_saddle_frame(b, 3)
    assert (f.p1, f.q1, f.p2, f.q2) == pytest.approx((0, 0, 0, 0), abs=1e-15)
    assert all(abs(z) < 1e-15 for z in f.c.values())
    assert f.theta == pytest.approx(0.7)


def test_heteroclinic_frame():
    s = exact_orbit_point(ExactOrbit(OrbitKind.HETERO_PLUS, 3, 6), 0.4).modes
    f = to_saddle_frame(s, 3)
    assert abs(f.p1) < 1e-15 and abs(f.q1) < 1e-15
    rot = np.exp(-1j * f.theta)
    assert OMEGA2 * f.p2 + OMEGA * f.q2 == pytest.approx(s[3] * rot)


def test_degenerate_angle():
    with pytest.raises(DegenerateAngle):
        to_saddle_frame(np.array([1, 0, 0, 0, 0], dtype=complex), 3)


def test_zero_frame_inverse():
    b = from_saddle_frame(SaddleFrame(3, 6)).modes
    assert b[2] == 1 and np.count_nonzero(b) == 1


def test_frame_on_exit_section():
    sigma, theta = 0.15, 0.3
    b = from_saddle_frame(SaddleFrame(3, 6, p2=sigma, theta=theta)).modes
    assert b[3] == pytest.approx(OMEGA2 * sigma * np.exp(1j * theta))
    assert b[2] == pytest.approx(math.sqrt(1 - sigma ** 2) * np.exp(1j * theta))


def test_infeasible_mass():
    with pytest.raises(InfeasibleMass):
        from_saddle_frame(SaddleFrame(3, 6, p1=2.0))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 5))
def test_chart_round_trip(seed, j):
    rng = np.random.default_rng(seed)
    b = random_mass_one(6, j, rng)
    back = from_saddle_frame(to_saddle_frame(b, j)).modes
    assert np.max(np.abs(back - b)) < 1e-12


def test_energy_pullback_offset():
    rng = np.random.default_rng(4)
    for j in (2, 3, 4):
        for _ in range(5):
            b = random_mass_one(6, j, rng)
            assert reduced_hamiltonian(to_saddle_frame(b, j)) == pytest.approx(toy_hamiltonian(b) - 0.25, abs=1e-12)


def test_reduced_field_matches_pushforward():
    rng = np.random.default_rng(5)
    for j in (2, 3, 5):
        f = to_saddle_frame(random_mass_one(6, j, rng), j)
        a, b = reduced_rhs(f), pushforward_rhs(f)
        assert np.max(np.abs(a.as_vector() - b.as_vector())) < 1e-9
        assert a.theta == pytest.approx(b.theta, abs=1e-9)


def test_linearisation_spectrum():
    n, j = 6, 3
    jac = jacobian(reduced_vector_field(j, n), np.zeros(4 + 2 * (n - 3)))
    ev = np.linalg.eigvals(jac)
    real = sorted(e.real for e in ev if abs(e.imag) < 1e-6)
    assert real == pytest.approx([-SQ3, -SQ3, SQ3, SQ3], abs=1e-6)
    imag = sorted(e.imag for e in ev if abs(e.imag) > 1e-6)
    assert imag == pytest.approx([-1.0] * (n - 3) + [1.0] * (n - 3), abs=1e-6)


def test_p1_rate_is_linear_at_small_amplitude():
    eps = 1e-5
    rate = reduced_rhs(SaddleFrame(3, 6, p1=eps)).p1
    assert rate == pytest.approx(SQ3 * eps, rel=1e-6)


def test_quartic_fit():
    co = reduced_ham_coeffs()
    assert co.nu_02 > 0
    assert co.residual < 1e-12
    assert co.quadratic[(1, 1, 0, 0)] == pytest.approx(SQ3, abs=1e-8)


def test_transit_time():
    assert transit_time(f2(0.15), 0.15) == 0.0
    # with the exit offset normalised to one, x = e^{-sqrt3} takes unit time
    assert transit_time(math.exp(-SQ3), 1.0) == pytest.approx(1.0)
    with pytest.raises(NonPositiveInput):
        transit_time(0.0, 0.15)


def test_cancellation_solve():
    x = 0.1
    target = x * x * transit_time(x, 1.0)
    assert solve_cancellation(target, 1.0) == pytest.approx(0.1, rel=1e-12)
    with pytest.raises(NoSolution):
        solve_cancellation(-1.0, 0.15)
    with pytest.raises(NoSolution):
        solve_cancellation(1.0, 0.15)


def test_cancellation_is_monotone_near_zero():
    xs = [solve_cancellation(d, 0.15) for d in (1e-4, 1e-6, 1e-8, 1e-10)]
    assert all(a > b > 0 for a, b in zip(xs, xs[1:]))
    assert cancellation_target(1e-5, 0.15) > 0


def test_frame_transfer_on_exit_point():
    sigma = 0.15
    f = frame_transfer(SaddleFrame(3, 6, p2=sigma))
    assert f.j == 4
    assert f.p1 == pytest.approx(0.0, abs=1e-15)
    assert f.q1 == pytest.approx(math.sqrt(1 - sigma ** 2))
    assert f.p2 == 0 and f.q2 == 0


def test_frame_transfer_preserves_state():
    rng = np.random.default_rng(7)
    b = random_mass_one(6, 3, rng)
    f = to_saddle_frame(b, 3)
    g = frame_transfer(f)
    a, c = from_saddle_frame(f).modes, from_saddle_frame(g).modes
    k = np.argmax(np.abs(a))
    phase = a[k] / c[k]
    assert abs(abs(phase) - 1) < 1e-12
    assert np.max(np.abs(a - phase * c)) < 1e-12


def test_frame_transfer_of_heteroclinic_keeps_zero():
    s = exact_orbit_point(ExactOrbit(OrbitKind.HETERO_PLUS, 3, 6), 0.0).modes
    g = frame_transfer(to_saddle_frame(s, 3))
    assert abs(g.c[2]) < 1e-15


def test_frame_transfer_degenerate():
    with pytest.raises(DegenerateTarget):
        frame_transfer(SaddleFrame(3, 6))


def test_local_map_exits_on_section():
    sigma, d = 0.15, 1e-3
    p1 = -0.005 * d * math.log(1 / d)
    entry = SaddleFrame(3, 6, p1, sigma, cancellation_target(-p1, sigma), 0.0)
    out, t = local_map(entry, sigma)
    assert abs(out.p2 - sigma) < 1e-10
    assert 0 < t < 10 * math.log(1 / d)
    # exit magnitudes: |p1|,|q1| of order sqrt(C delta), q2 of order C delta ln(1/delta)
    assert abs(out.p1) < 0.05 and abs(out.q1) < 0.05
    assert abs(out.q2) < 1e-2


def test_local_map_on_stable_manifold_never_exits():
    cfg = IntegratorConfig(max_time=15.0)
    with pytest.raises(NoCrossing):
        local_map(SaddleFrame(3, 6, 0.0, 0.15, 0.0, 0.0), 0.15, cfg)


def test_global_map_follows_heteroclinic():
    sigma = 0.15
    orbit = ExactOrbit(OrbitKind.HETERO_PLUS, 3, 6)
    # the heteroclinic point whose frame-3 p2 equals sigma
    from scipy.optimize import brentq
    t0 = brentq(lambda t: to_saddle_frame(exact_orbit_point(orbit, t).modes, 3).p2 - sigma, -5, 0)
    start = to_saddle_frame(exact_orbit_point(orbit, t0).modes, 3)
    out, t = global_map(start, sigma)
    assert abs(out.q1 - sigma) < 1e-10
    assert abs(out.p1) < 1e-9 and abs(out.p2) < 1e-9 and abs(out.q2) < 1e-9
    assert 0 < t < 10


def test_global_map_lipschitz():
    sigma = 0.15
    base = SaddleFrame(3, 6, p2=sigma, q2=0.0, p1=0.0, q1=math.sqrt(0.0))
    out0, _ = global_map(base, sigma)
    eps = 1e-6
    out1, _ = global_map(SaddleFrame(3, 6, p2=sigma, q2=eps), sigma)
    lip = np.linalg.norm(out1.as_vector() - out0.as_vector()) / eps
    assert np.isfinite(lip) and lip < 1e3


def test_straightened_coordinate():
    assert straightened_p2(0.0) == pytest.approx(1 / math.sqrt(2))
    assert straightened_p2(5.0) > 0.999


def test_cancellation_ratio_decreases():
    r = [cancellation_ratio(d)["ratio"] for d in (1e-2, 1e-3, 1e-4)]
    assert r[0] > r[1] > r[2]
    assert r[2] < 0.5
