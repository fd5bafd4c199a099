"""The N-mode toy model: vector field, conserved quantities and closed-form orbits.

Modes are numbered 1..N in the public API and stored 0-based in arrays.
Neighbours outside 1..N are treated as zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import PreconditionError

OMEGA = complex(-0.5, math.sqrt(3.0) / 2.0)
OMEGA2 = OMEGA.conjugate()
SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class ToyState:
    modes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        arr = np.array(self.modes, dtype=np.complex128)
        if arr.ndim != 1:
            raise PreconditionError("modes must be a one-dimensional sequence")
        arr.setflags(write=False)
        object.__setattr__(self, "modes", arr)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def mode(self, j: int) -> complex:
        """Amplitude b_j with 1-based index."""
        return complex(self.modes[j - 1])


@dataclass(frozen=True)
class ToyParams:
    n_modes: int = 6
    delta: float = 1e-3
    sigma: float = 0.15
    nu: float = 0.25

    def __post_init__(self):
        if self.n_modes < 5:
            raise PreconditionError(f"N must be at least 5, got {self.n_modes}")
        if not 0.0 < self.delta < self.sigma < 1.0:
            raise PreconditionError(f"need 0 < delta < sigma < 1, got delta={self.delta}, sigma={self.sigma}")
        if self.nu <= 0.0:
            raise PreconditionError(f"nu must be positive, got {self.nu}")

    @property
    def threshold(self) -> float:
        """delta**nu, the smallness threshold for inactive modes."""
        return self.delta ** self.nu

    @property
    def gamma(self) -> float:
        return -math.log(self.delta) / self.n_modes


class OrbitKind(enum.Enum):
    PERIODIC = "periodic"
    HETERO_PLUS = "hetero+"
    HETERO_MINUS = "hetero-"


@dataclass(frozen=True)
class ExactOrbit:
    kind: OrbitKind
    j: int
    n_modes: int
    phase: float = 0.0

    def __post_init__(self):
        top = self.n_modes if self.kind is OrbitKind.PERIODIC else self.n_modes - 1
        if not 1 <= self.j <= top:
            raise PreconditionError(f"index j={self.j} out of range 1..{top} for {self.kind.value}")


def _modes(state) -> np.ndarray:
    if isinstance(state, ToyState):
        return state.modes
    return np.asarray(state, dtype=np.complex128)


def toy_rhs(state) -> np.ndarray:
    """Rates db_j/dt = -i b_j^2 conj(b_j) + 2i conj(b_j) (b_{j-1}^2 + b_{j+1}^2)."""
    return _accel.toy_rhs(np.ascontiguousarray(_modes(state), dtype=np.complex128))


def toy_field(t, y):
    """toy_rhs in the (t, y) calling convention of the integrator."""
    return _accel.toy_rhs(y)


def toy_hamiltonian(state) -> float:
    b = _modes(state)
    quartic = 0.25 * float(np.sum(np.abs(b) ** 4))
    cross = float(np.sum((b[1:].conj() ** 2 * b[:-1] ** 2).real))
    return quartic - cross


def toy_mass(state) -> float:
    b = _modes(state)
    return float(np.sum(b.real**2 + b.imag**2))


def hetero_pair(t: float, phase: float = 0.0, sign: int = 1) -> tuple[complex, complex]:
    """(b_j, b_{j+1}) on the heteroclinic from T_j to T_{j+1}.

    The phase lock between the two active modes is theta_j - theta_{j+1} = -pi/3,
    which is what makes the energy flow forward from j to j+1.
    """
    rot = complex(math.cos(t + phase), -math.sin(t + phase))
    x = 2.0 * SQRT3 * t
    # stable forms of 1/sqrt(1+e^{x}) and 1/sqrt(1+e^{-x})
    if x > 0:
        e = math.exp(-x)
        lo, hi = math.sqrt(e / (1.0 + e)), 1.0 / math.sqrt(1.0 + e)
    else:
        e = math.exp(x)
        lo, hi = 1.0 / math.sqrt(1.0 + e), math.sqrt(e / (1.0 + e))
    return rot * OMEGA2 * lo, sign * rot * OMEGA * hi


def exact_orbit_point(orbit: ExactOrbit, t: float) -> ToyState:
    b = np.zeros(orbit.n_modes, dtype=np.complex128)
    if orbit.kind is OrbitKind.PERIODIC:
        b[orbit.j - 1] = complex(math.cos(t + orbit.phase), -math.sin(t + orbit.phase))
    else:
        sign = 1 if orbit.kind is OrbitKind.HETERO_PLUS else -1
        b[orbit.j - 1], b[orbit.j] = hetero_pair(t, orbit.phase, sign)
    return ToyState(b, t)


def exact_orbit_derivative(orbit: ExactOrbit, t: float) -> np.ndarray:
    """Analytic time derivative of exact_orbit_point."""
    b = exact_orbit_point(orbit, t).modes.copy()
    if orbit.kind is OrbitKind.PERIODIC:
        return -1j * b
    j = orbit.j - 1
    x = 2.0 * SQRT3 * t
    # d/dt log(1+e^{x})^{-1/2} = -sqrt3 * e^x/(1+e^x), likewise for -x
    s_plus = 1.0 / (1.0 + math.exp(-x)) if x > -700 else 0.0
    s_minus = 1.0 / (1.0 + math.exp(x)) if x < 700 else 0.0
    d = np.zeros_like(b)
    d[j] = b[j] * (-1j - SQRT3 * s_plus)
    d[j + 1] = b[j + 1] * (-1j + SQRT3 * s_minus)
    return d
