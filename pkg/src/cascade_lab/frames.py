"""Coordinates adapted to the periodic orbit T_j.

Mass-one states are reduced by the phase of b_j: with theta = arg b_j,
c_k = b_k e^{-i theta} for k != j and r = |b_j|.  The two neighbours of j
are diagonalised as c_{j-1} = w^2 p1 + w q1 and c_{j+1} = w^2 p2 + w q2
(w = e^{2 pi i/3}), so that p1, p2 are the unstable and q1, q2 the stable
directions of the saddle (rates +-sqrt3); the remaining c_k are elliptic.

Sections: entry {q1 = sigma} (crossed downwards), exit {p2 = sigma}
(crossed upwards).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import (DegenerateAngle, DegenerateTarget, EscapedNeighborhood, InfeasibleMass, NoSolution,
                     NonPositiveInput, PreconditionError)
from .integrator import Direction, IntegratorConfig, SectionEvent, integrate, integrate_to_section
from .toy import OMEGA, OMEGA2, SQRT3, ToyState, toy_field, toy_rhs

ANGLE_TOL = 1e-10
MASS_TOL = 1e-12


@dataclass(frozen=True)
class SaddleFrame:
    j: int
    n_modes: int
    p1: float = 0.0
    q1: float = 0.0
    p2: float = 0.0
    q2: float = 0.0
    c: dict = field(default_factory=dict)
    theta: float = 0.0

    def __post_init__(self):
        if not 1 <= self.j <= self.n_modes:
            raise PreconditionError(f"saddle index {self.j} outside 1..{self.n_modes}")
        full = {k: complex(self.c.get(k, 0.0)) for k in elliptic_indices(self.j, self.n_modes)}
        extra = set(self.c) - set(full)
        if extra:
            raise PreconditionError(f"modes {sorted(extra)} are not elliptic for saddle {self.j}")
        object.__setattr__(self, "c", full)

    @property
    def r_squared(self) -> float:
        ell = sum(abs(z) ** 2 for z in self.c.values())
        return 1.0 - ell - hyp_norm2(self.p1, self.q1) - hyp_norm2(self.p2, self.q2)

    def as_vector(self) -> np.ndarray:
        """Real coordinates (p1, q1, p2, q2, Re c_k, Im c_k, ...) in increasing k."""
        ell = [v for k in sorted(self.c) for v in (self.c[k].real, self.c[k].imag)]
        return np.array([self.p1, self.q1, self.p2, self.q2] + ell)

    @classmethod
    def from_vector(cls, j, n_modes, vec, theta=0.0) -> "SaddleFrame":
        ks = elliptic_indices(j, n_modes)
        c = {k: complex(vec[4 + 2 * i], vec[5 + 2 * i]) for i, k in enumerate(ks)}
        return cls(j, n_modes, float(vec[0]), float(vec[1]), float(vec[2]), float(vec[3]), c, theta)


def elliptic_indices(j: int, n_modes: int) -> list:
    return [k for k in range(1, n_modes + 1) if abs(k - j) > 1]


def hyp_norm2(p: float, q: float) -> float:
    """|w^2 p + w q|^2."""
    return p * p + q * q - p * q


def diag_pair(p: float, q: float) -> complex:
    return OMEGA2 * p + OMEGA * q


def undiag(z: complex) -> tuple[float, float]:
    """Real (p, q) with w^2 p + w q = z."""
    re, im = z.real, z.imag
    return -re - im / SQRT3, -re + im / SQRT3


# scalar charts evaluated directly on toy arrays (0-based slots)

def _rel(b, k, j):
    bj = b[j]
    return b[k] * bj.conjugate() / abs(bj)


def chart_q1(b, j: int) -> float:
    z = _rel(b, j - 2, j - 1)
    return -z.real + z.imag / SQRT3


def chart_p1(b, j: int) -> float:
    z = _rel(b, j - 2, j - 1)
    return -z.real - z.imag / SQRT3


def chart_p2(b, j: int) -> float:
    z = _rel(b, j, j - 1)
    return -z.real - z.imag / SQRT3


def chart_q2(b, j: int) -> float:
    z = _rel(b, j, j - 1)
    return -z.real + z.imag / SQRT3


def to_saddle_frame(state, j: int) -> SaddleFrame:
    b = state.modes if isinstance(state, ToyState) else np.asarray(state, dtype=np.complex128)
    n = len(b)
    bj = complex(b[j - 1])
    if abs(bj) < ANGLE_TOL:
        raise DegenerateAngle(f"|b_{j}| = {abs(bj):.3e} is below {ANGLE_TOL}")
    theta = math.atan2(bj.imag, bj.real)
    rot = complex(math.cos(theta), -math.sin(theta))
    p1 = q1 = p2 = q2 = 0.0
    if j > 1:
        p1, q1 = undiag(complex(b[j - 2]) * rot)
    if j < n:
        p2, q2 = undiag(complex(b[j]) * rot)
    c = {k: complex(b[k - 1]) * rot for k in elliptic_indices(j, n)}
    return SaddleFrame(j, n, p1, q1, p2, q2, c, theta)


def from_saddle_frame(frame: SaddleFrame) -> ToyState:
    r2 = frame.r_squared
    if r2 < -MASS_TOL:
        raise InfeasibleMass(f"r^2 = {r2:.3e} is negative")
    r = math.sqrt(max(r2, 0.0))
    n, j = frame.n_modes, frame.j
    phase = complex(math.cos(frame.theta), math.sin(frame.theta))
    b = np.zeros(n, dtype=np.complex128)
    b[j - 1] = r * phase
    if j > 1:
        b[j - 2] = diag_pair(frame.p1, frame.q1) * phase
    if j < n:
        b[j] = diag_pair(frame.p2, frame.q2) * phase
    for k, z in frame.c.items():
        b[k - 1] = z * phase
    return ToyState(b)


def _reduced_modes(frame: SaddleFrame) -> tuple[np.ndarray, float]:
    """Gauge-fixed mode vector C (C_j = r real) and r^2."""
    r2 = frame.r_squared
    n, j = frame.n_modes, frame.j
    cvec = np.zeros(n, dtype=np.complex128)
    cvec[j - 1] = math.sqrt(max(r2, 0.0))
    if j > 1:
        cvec[j - 2] = diag_pair(frame.p1, frame.q1)
    if j < n:
        cvec[j] = diag_pair(frame.p2, frame.q2)
    for k, z in frame.c.items():
        cvec[k - 1] = z
    return cvec, r2


def reduced_hamiltonian(frame: SaddleFrame) -> float:
    """Energy in frame coordinates relative to its value 1/4 on T_j.

    Evaluated from the frame variables with r^2 eliminated by the mass
    constraint; c_j is the real number r.
    """
    cvec, r2 = _reduced_modes(frame)
    j = frame.j - 1
    others = np.delete(cvec, j)
    quartic = 0.25 * r2 * r2 + 0.25 * float(np.sum(np.abs(others) ** 4))
    cross = 0.0
    for k in range(1, len(cvec)):
        if k == j or k - 1 == j:
            continue
        cross += (cvec[k].conjugate() ** 2 * cvec[k - 1] ** 2).real
    nb = 0.0
    if j > 0:
        nb += (cvec[j - 1] ** 2).real
    if j + 1 < len(cvec):
        nb += (cvec[j + 1] ** 2).real
    return quartic - cross - r2 * nb - 0.25


def _reduced_complex_rates(frame: SaddleFrame) -> tuple[np.ndarray, float]:
    """dc_k/dt = -2i dH/d(conj c_k) for k != j, and d(theta)/dt."""
    cvec, r2 = _reduced_modes(frame)
    n, j = len(cvec), frame.j - 1
    nb = 0.0
    if j > 0:
        nb += (cvec[j - 1] ** 2).real
    if j + 1 < n:
        nb += (cvec[j + 1] ** 2).real
    sq = cvec * cvec
    neigh = np.zeros(n, dtype=np.complex128)
    neigh[1:] += sq[:-1]
    neigh[:-1] += sq[1:]
    grad = -0.5 * r2 * cvec + 0.5 * np.abs(cvec) ** 2 * cvec - cvec.conj() * neigh + cvec * nb
    rates = -2j * grad
    rates[j] = 0.0
    theta_dot = -r2 + 2.0 * nb
    return rates, theta_dot


def reduced_rhs(frame: SaddleFrame) -> SaddleFrame:
    """Frame rates (dp1, dq1, dp2, dq2, dc_k) as a SaddleFrame; ``theta`` holds d(theta)/dt."""
    rates, theta_dot = _reduced_complex_rates(frame)
    n, j = frame.n_modes, frame.j
    dp1 = dq1 = dp2 = dq2 = 0.0
    if j > 1:
        dp1, dq1 = undiag(complex(rates[j - 2]))
    if j < n:
        dp2, dq2 = undiag(complex(rates[j]))
    dc = {k: complex(rates[k - 1]) for k in elliptic_indices(j, n)}
    return SaddleFrame(j, n, dp1, dq1, dp2, dq2, dc, theta_dot)


def reduced_vector_field(j: int, n_modes: int):
    """Reduced flow on real frame vectors (see SaddleFrame.as_vector)."""
    def f(vec):
        return reduced_rhs(SaddleFrame.from_vector(j, n_modes, vec)).as_vector()
    return f


def pushforward_rhs(frame: SaddleFrame) -> SaddleFrame:
    """Toy vector field carried into the frame by the chain rule (theta dot included)."""
    state = from_saddle_frame(frame)
    b = state.modes
    db = toy_rhs(b)
    j = frame.j
    bj = b[j - 1]
    theta_dot = (db[j - 1] * bj.conjugate()).imag / abs(bj) ** 2
    phase = complex(math.cos(frame.theta), -math.sin(frame.theta))
    rates = (db - 1j * theta_dot * b) * phase
    n = frame.n_modes
    dp1 = dq1 = dp2 = dq2 = 0.0
    if j > 1:
        dp1, dq1 = undiag(complex(rates[j - 2]))
    if j < n:
        dp2, dq2 = undiag(complex(rates[j]))
    dc = {k: complex(rates[k - 1]) for k in elliptic_indices(j, n)}
    return SaddleFrame(j, n, dp1, dq1, dp2, dq2, dc, theta_dot)


# hyperbolic quartic coefficients

@dataclass(frozen=True)
class ReducedHamCoeffs:
    """Quartic coefficients of the hyperbolic Hamiltonian normalised to
    sqrt3 (p1 q1 + p2 q2) at second order.

    ``nu_k[(i, k)]`` multiplies p_i^k q_i^(4-k); ``nu_kl[(k, l)]`` multiplies
    p1^k q1^(2-k) p2^l q2^(2-l).
    """
    quadratic: dict
    nu_k: dict
    nu_kl: dict
    residual: float

    @property
    def nu_02(self) -> float:
        return self.nu_kl[(0, 2)]


def _hyperbolic_energy(x):
    """-(2/sqrt3) times the reduced energy with all elliptic modes at zero."""
    p1, q1, p2, q2 = x
    f = SaddleFrame(3, 5, p1, q1, p2, q2)
    return -2.0 / SQRT3 * reduced_hamiltonian(f)


@lru_cache(maxsize=None)
def reduced_ham_coeffs(scale: float = 0.05, samples: int = 400, seed: int = 0) -> ReducedHamCoeffs:
    """Least-squares fit of a degree-4 polynomial in (p1, q1, p2, q2) around frame 0."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-scale, scale, size=(samples, 4))
    exps = [e for d in range(5) for e in itertools.product(range(d + 1), repeat=4) if sum(e) == d]
    exps = sorted(set(exps))
    design = np.array([[np.prod(x ** np.array(e)) for e in exps] for x in pts])
    rhs = np.array([_hyperbolic_energy(x) for x in pts])
    coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    resid = float(np.max(np.abs(design @ coef - rhs)))
    table = {e: float(c) for e, c in zip(exps, coef)}
    quadratic = {e: v for e, v in table.items() if sum(e) == 2}
    nu_k = {}
    for k in range(1, 4):
        nu_k[(1, k)] = table[(k, 4 - k, 0, 0)]
        nu_k[(2, k)] = table[(0, 0, k, 4 - k)]
    nu_kl = {(k, l): table[(k, 2 - k, l, 2 - l)] for k in range(3) for l in range(3)}
    out = ReducedHamCoeffs(quadratic, nu_k, nu_kl, resid)
    if not out.nu_02 > 0:
        raise AssertionError(f"fitted nu_02 = {out.nu_02} is not positive")
    return out


# sections, transit time and cancellation

def f2(sigma: float) -> float:
    """Leading-order section offset; the higher-order normal-form corrections are not modelled."""
    return sigma


f1 = f2


def transit_time(x2_0: float, sigma: float) -> float:
    """Time for the unstable coordinate to grow from x2_0 to the exit section."""
    if not x2_0 > 0:
        raise NonPositiveInput(f"x2_0 must be positive, got {x2_0}")
    return math.log(f2(sigma) / x2_0) / SQRT3


def _x2t(x: float, sigma: float) -> float:
    return x * x * transit_time(x, sigma)


def solve_cancellation(target: float, sigma: float) -> float:
    """Smallest positive x with x^2 T(x) = target.

    x^2 T(x) increases on (0, f2 e^{-1/2}) and decreases after, so the
    root is searched on the increasing branch.
    """
    if not target > 0:
        raise NoSolution(f"right-hand side {target} is not positive")
    top = f2(sigma) * math.exp(-0.5)
    peak = _x2t(top, sigma)
    if target > peak:
        raise NoSolution(f"right-hand side {target:.3e} exceeds the maximum {peak:.3e} of x^2 T(x)")
    from scipy.optimize import brentq
    x = brentq(lambda s: _x2t(s, sigma) - target, 1e-300, top, xtol=1e-300, rtol=1e-15, maxiter=500)
    return x


def cancellation_target(c_delta_log: float, sigma: float, nu02: Optional[float] = None) -> float:
    """Entry value of p2 that cancels the logarithmic drift of p1 through the saddle.

    ``c_delta_log`` is the entry depth C delta ln(1/delta) = -p1 at entry.
    """
    if nu02 is None:
        nu02 = reduced_ham_coeffs().nu_02
    return solve_cancellation(c_delta_log / (2.0 * nu02 * f1(sigma)), sigma)


# frame transfer

def frame_transfer(frame: SaddleFrame, tol: float = 1e-12) -> SaddleFrame:
    """Express a frame at saddle j in the frame of saddle j+1."""
    j, n = frame.j, frame.n_modes
    if j >= n:
        raise PreconditionError("no next saddle")
    rt2 = hyp_norm2(frame.p2, frame.q2)
    if rt2 <= tol * tol:
        raise DegenerateTarget(f"|b_{j + 1}| = {math.sqrt(max(rt2, 0.0)):.3e} is below tolerance")
    rt = math.sqrt(rt2)
    r = math.sqrt(max(frame.r_squared, 0.0))
    # conjugate unit phase of c_{j+1}
    u_bar = (OMEGA * frame.p2 + OMEGA2 * frame.q2) / rt
    new_p1, new_q1 = r * frame.q2 / rt, r * frame.p2 / rt
    new_p2 = new_q2 = 0.0
    if j + 2 <= n:
        new_p2, new_q2 = undiag(frame.c[j + 2] * u_bar)
    c = {}
    for k in elliptic_indices(j + 1, n):
        if k == j - 1:
            c[k] = diag_pair(frame.p1, frame.q1) * u_bar
        else:
            c[k] = frame.c[k] * u_bar
    dtheta = math.atan2(-u_bar.imag, u_bar.real)
    theta = math.remainder(frame.theta + dtheta, 2 * math.pi)
    return SaddleFrame(j + 1, n, new_p1, new_q1, new_p2, new_q2, c, theta)


# numerical passage maps

def entry_event(j: int, sigma: float) -> SectionEvent:
    return SectionEvent(lambda b: chart_q1(b, j), sigma, Direction.DECREASING)


def exit_event(j: int, sigma: float) -> SectionEvent:
    return SectionEvent(lambda b: chart_p2(b, j), sigma, Direction.INCREASING)


def _guard(j, n, bound):
    idx = [k - 1 for k in elliptic_indices(j, n)]

    def check(t, y):
        if idx:
            worst = float(np.max(np.abs(y[idx])))
            if worst > bound:
                raise EscapedNeighborhood(f"elliptic amplitude {worst:.3e} exceeds {bound} at t={t:.3f}")
    return check


def local_map(entry: SaddleFrame, sigma: float, cfg: IntegratorConfig = IntegratorConfig(),
              escape_bound: float = 0.5):
    """Flow from the entry section of saddle j to its exit section.

    Returns (exit frame, elapsed time).
    """
    if abs(entry.q1 - sigma) > 1e-8:
        raise PreconditionError(f"entry q1 = {entry.q1} is not on the section q1 = {sigma}")
    y0 = from_saddle_frame(entry).modes
    y, t = integrate_to_section(toy_field, y0, exit_event(entry.j, sigma), cfg,
                                on_step=_guard(entry.j, entry.n_modes, escape_bound))
    return to_saddle_frame(y, entry.j), t


def global_map(exit: SaddleFrame, sigma: float, cfg: IntegratorConfig = IntegratorConfig()):
    """Flow from the exit section of saddle j to the entry section of saddle j+1.

    Returns (entry frame at j+1, elapsed time).
    """
    if abs(exit.p2 - sigma) > 1e-8:
        raise PreconditionError(f"exit p2 = {exit.p2} is not on the section p2 = {sigma}")
    y0 = from_saddle_frame(exit).modes
    y, t = integrate_to_section(toy_field, y0, entry_event(exit.j + 1, sigma), cfg)
    return to_saddle_frame(y, exit.j + 1), t


def straightened_p2(t: float, t0: float = 0.0) -> float:
    """Unstable coordinate along the heteroclinic leaving T_j, shifted to t0."""
    return 1.0 / math.sqrt(1.0 + math.exp(-2.0 * SQRT3 * (t - t0)))


def cancellation_ratio(delta: float, sigma: float = 0.15, depth: float = 0.005, n_modes: int = 5, j: int = 3,
                       cfg: IntegratorConfig = IntegratorConfig()) -> dict:
    """Exit |p1| with p2 at the cancellation target over |p1| with p2 = 0.

    Entry p1 = -depth * delta * ln(1/delta), q2 = 0.  With p2 = 0 the orbit
    sits on the stable manifold and never reaches the exit section, so it is
    read off after the same elapsed time as the cancelled orbit.
    """
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    p1 = -depth * delta * math.log(1.0 / delta)
    x = cancellation_target(-p1, sigma)
    exit_frame, elapsed = local_map(SaddleFrame(j, n_modes, p1, sigma, x, 0.0), sigma, cfg)
    y0 = from_saddle_frame(SaddleFrame(j, n_modes, p1, sigma, 0.0, 0.0)).modes
    ref = to_saddle_frame(integrate(toy_field, y0, 0.0, elapsed, cfg).y_final, j)
    return {"delta": delta, "p2_entry": x, "elapsed": elapsed, "exit_p1": abs(exit_frame.p1),
            "reference_p1": abs(ref.p1), "ratio": abs(exit_frame.p1) / abs(ref.p1)}
