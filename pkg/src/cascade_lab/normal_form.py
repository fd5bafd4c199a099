"""Quartic Birkhoff normal form on a finite support.

Conventions match galerkin.CubicSystem: a'_n = i dH/d(conj a_n) with
H = D + G, D = sum |n|^2 |a_n|^2, G = 1/2 sum a1 conj(a2) a3 conj(a4) over
convolution quadruples.  The generator is F = 1/2 sum F_q a1 conj(a2) a3 conj(a4)
with F_q = -i / divisor, so that the derivative of D along X_F is the
resonant part of G minus G.  Then X_F(a)_n = sum a1 conj(a2) a3 / divisor.

Everything lives on the one-step convolution closure of the support;
outputs beyond it are dropped.  The remainder after the change is computed
from the identity

    H(Gamma a) - D(a) - G_res(a) = int_0^1 [Q(a_s) - Q(a) + {G, F}(a_s)] ds,

with a_s the flow of X_F and Q = G_res - G, which only subtracts quantities
of comparable size and so stays accurate at tiny amplitudes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from ._accel import cubic_sum
from .errors import PreconditionError
from .galerkin import GalerkinState, convolution_closure
from .integrator import IntegratorConfig, integrate


def _pair(n):
    return int(n[0]), int(n[1])


def divisor(n1, n2, n3, n4) -> int:
    """|n1|^2 - |n2|^2 + |n3|^2 - |n4|^2 in integers."""
    return sum(s * (a * a + b * b) for s, (a, b) in zip((1, -1, 1, -1), map(_pair, (n1, n2, n3, n4))))


def _convolves(n1, n2, n3, n4) -> bool:
    n1, n2, n3, n4 = map(_pair, (n1, n2, n3, n4))
    return n1[0] - n2[0] + n3[0] == n4[0] and n1[1] - n2[1] + n3[1] == n4[1]


def is_resonant(n1, n2, n3, n4) -> bool:
    return _convolves(n1, n2, n3, n4) and divisor(n1, n2, n3, n4) == 0


def generator_coefficient(n1, n2, n3, n4) -> complex:
    """-i / divisor on non-resonant convolution quadruples, else 0."""
    if not _convolves(n1, n2, n3, n4):
        return 0j
    d = divisor(n1, n2, n3, n4)
    return 0j if d == 0 else complex(0.0, -1.0 / d)


@dataclass(frozen=True)
class GeneratorTerm:
    quadruple: tuple
    coefficient: complex


def generator_terms(support) -> list:
    """Every non-resonant convolution quadruple inside the support with its coefficient."""
    pts = sorted({_pair(n) for n in support})
    keys = set(pts)
    out = []
    for n1 in pts:
        for n2 in pts:
            for n3 in pts:
                n4 = (n1[0] - n2[0] + n3[0], n1[1] - n2[1] + n3[1])
                if n4 in keys:
                    c = generator_coefficient(n1, n2, n3, n4)
                    if c != 0:
                        out.append(GeneratorTerm((n1, n2, n3, n4), c))
    return out


NF_CONFIG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-15, max_step=np.inf)


FIELD_CONFIG = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-13, max_step=np.inf)


def _cube_scale(y) -> float:
    """Size of the cubic field at y; the integrators work in units of it."""
    s = float(np.max(np.abs(y)))
    return s ** 3 if s > 0 else 1.0


class NormalForm:
    """Cubic sums for G, its non-resonant part and X_F on a closure."""

    def __init__(self, support, closure: Optional[list] = None):
        self.support = tuple(sorted({_pair(n) for n in support}))
        self.modes = tuple(closure if closure is not None else convolution_closure(self.support))
        self.index = {n: i for i, n in enumerate(self.modes)}
        missing = [n for n in self.support if n not in self.index]
        if missing:
            raise PreconditionError(f"closure misses support points {missing[:3]}")
        arr = np.array(self.modes, dtype=np.int64)
        size = len(arr)
        norms = (arr ** 2).sum(axis=1)
        i1, i2, i3 = np.meshgrid(np.arange(size), np.arange(size), np.arange(size), indexing="ij")
        i1, i2, i3 = i1.ravel(), i2.ravel(), i3.ravel()
        target = arr[i1] - arr[i2] + arr[i3]
        lo = arr.min(axis=0)
        span = arr.max(axis=0) - lo + 1
        lookup = np.full(span[0] * span[1], -1, dtype=np.int64)
        lookup[(arr[:, 0] - lo[0]) * span[1] + (arr[:, 1] - lo[1])] = np.arange(size)
        inside = np.all((target >= lo) & (target < lo + span), axis=1)
        out = np.full(len(target), -1, dtype=np.int64)
        t = target[inside]
        out[inside] = lookup[(t[:, 0] - lo[0]) * span[1] + (t[:, 1] - lo[1])]
        keep = out >= 0
        rows = np.stack([i1[keep], i2[keep], i3[keep], out[keep]], axis=1).astype(np.int64)
        div = norms[rows[:, 0]] - norms[rows[:, 1]] + norms[rows[:, 2]] - norms[rows[:, 3]]
        self.size = size
        self.norms = norms.astype(np.float64)
        self.rows = np.ascontiguousarray(rows)
        nonres = div != 0
        self.rows_nonres = np.ascontiguousarray(rows[nonres])
        self.rows_res = np.ascontiguousarray(rows[~nonres])
        self.inv_div = np.ascontiguousarray((1.0 / div[nonres]).astype(np.complex128))
        self._ones = np.ones(len(rows), dtype=np.complex128)
        self._zeros = np.zeros(len(rows))
        self._ones_nr = np.ones(len(self.rows_nonres), dtype=np.complex128)
        self._zeros_nr = np.zeros(len(self.rows_nonres))
        self._ones_r = np.ones(len(self.rows_res), dtype=np.complex128)
        self._zeros_r = np.zeros(len(self.rows_res))

    # -- polynomial pieces
    def cubic(self, y):
        return cubic_sum(y, self.rows, self._ones, self._zeros, 0.0, self.size)

    def cubic_res(self, y):
        return cubic_sum(y, self.rows_res, self._ones_r, self._zeros_r, 0.0, self.size)

    def cubic_nonres(self, y):
        return cubic_sum(y, self.rows_nonres, self._ones_nr, self._zeros_nr, 0.0, self.size)

    def generator_field(self, y):
        return cubic_sum(y, self.rows_nonres, self.inv_div, self._zeros_nr, 0.0, self.size)

    def quadratic(self, y) -> float:
        return float(np.sum(self.norms * np.abs(y) ** 2))

    def quartic(self, y) -> float:
        return 0.5 * float(np.vdot(y, self.cubic(y)).real)

    def quartic_resonant(self, y) -> float:
        return self.quartic(y) - 0.5 * float(np.vdot(y, self.cubic_nonres(y)).real)

    def hamiltonian(self, y) -> float:
        return self.quadratic(y) + self.quartic(y)

    def embed(self, state: GalerkinState) -> np.ndarray:
        y = np.zeros(self.size, dtype=np.complex128)
        for n, v in state.as_dict().items():
            if n not in self.index:
                raise PreconditionError(f"mode {n} lies outside the closure")
            y[self.index[n]] = v
        return y

    # -- the change of variables
    def displacement(self, y0, direction: int = 1, cfg: IntegratorConfig = NF_CONFIG) -> np.ndarray:
        """Gamma(y0) - y0, integrated directly so it keeps full relative accuracy."""
        y0 = np.asarray(y0, dtype=np.complex128)
        c = _cube_scale(y0)
        # unknown is displacement / c, of order one
        rhs = lambda t, w: direction * self.generator_field(y0 + c * w) / c
        return c * integrate(rhs, np.zeros_like(y0), 0.0, 1.0, cfg).y_final

    def gamma(self, y0, direction: int = 1, cfg: IntegratorConfig = NF_CONFIG) -> np.ndarray:
        return np.asarray(y0, dtype=np.complex128) + self.displacement(y0, direction, cfg)

    def remainder(self, y0, cfg: IntegratorConfig = NF_CONFIG) -> float:
        """H(Gamma y0) - D(y0) - G_res(y0) through the flow integral."""
        y0 = np.asarray(y0, dtype=np.complex128)
        n = self.size
        c = _cube_scale(y0)
        n0 = self.cubic_nonres(y0)

        def rhs(t, z):
            d = c * z[:n]
            y = y0 + d
            xf = self.generator_field(y)
            n1 = self.cubic_nonres(y)
            nh = self.cubic_nonres(y0 + 0.5 * d)
            # Q(y) - Q(y0) from the derivative 4 Re<d, N(.)> of the quartic form,
            # a cubic in the path parameter, so Simpson's rule is exact
            dq = -2.0 * float(np.vdot(d, n0 + 4.0 * nh + n1).real) / 6.0
            bracket = 2.0 * float(np.vdot(xf, n1 + self.cubic_res(y)).real)
            out = np.empty(n + 1, dtype=np.complex128)
            out[:n] = xf / c
            out[n] = (dq + bracket) / (c * c)
            return out

        z = integrate(rhs, np.zeros(n + 1, dtype=np.complex128), 0.0, 1.0, cfg).y_final
        return float(z[n].real) * c * c

    def remainder_field(self, y0, rel_step: float = 1e-4, cfg: IntegratorConfig = NF_CONFIG) -> np.ndarray:
        """i dR/d(conj a_n) on the support modes by forward differences."""
        y0 = np.asarray(y0, dtype=np.complex128)
        h = rel_step * max(float(np.max(np.abs(y0))), 1e-300)
        r0 = self.remainder(y0, cfg)
        out = np.zeros(len(self.support), dtype=np.complex128)
        for k, m in enumerate(self.support):
            i = self.index[m]
            grad = []
            for e in (1.0, 1j):
                yp = y0.copy()
                yp[i] += h * e
                grad.append((self.remainder(yp, cfg) - r0) / h)
            out[k] = 1j * 0.5 * (grad[0] + 1j * grad[1])
        return out


@lru_cache(maxsize=8)
def _cached(support: tuple) -> NormalForm:
    return NormalForm(support)


def gamma_truncated(alpha: GalerkinState, direction: int = 1,
                    cfg: IntegratorConfig = NF_CONFIG) -> GalerkinState:
    """Time +1 (direction=1) or -1 map of X_F on the closure of alpha's support."""
    if direction not in (1, -1):
        raise PreconditionError("direction must be +1 or -1")
    nf = _cached(tuple(sorted(alpha.modes)))
    y = nf.gamma(nf.embed(alpha), direction, cfg)
    return GalerkinState(nf.modes, y, alpha.time)


def default_support() -> tuple:
    """Twelve modes: the 4 x 3 block of lattice points with corner at the origin."""
    return tuple((x, y) for x in range(4) for y in range(3))


def random_unit_state(support, seed: int = 0) -> np.ndarray:
    """Complex amplitudes with unit l1 norm on the support."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=len(support)) + 1j * rng.normal(size=len(support))
    return z / np.sum(np.abs(z))


def scaling_exponents(support=None, amplitudes=(1e-2, 1e-3, 1e-4), seed: int = 0) -> dict:
    """Log-log slopes of ||Gamma(a) - a||_1 and of ||X_R(a)||_1 against ||a||_1."""
    support = tuple(default_support() if support is None else support)
    nf = _cached(tuple(sorted(support)))
    u = random_unit_state(nf.support, seed)
    base = nf.embed(GalerkinState(nf.support, u))
    disp, rem, rem_field = [], [], []
    for eps in amplitudes:
        y = eps * base
        disp.append(float(np.sum(np.abs(nf.displacement(y)))))
        rem.append(abs(nf.remainder(y)))
        rem_field.append(float(np.sum(np.abs(nf.remainder_field(y, cfg=FIELD_CONFIG)))))
    x = np.log(np.asarray(amplitudes))
    slope = lambda v: float(np.polyfit(x, np.log(v), 1)[0])
    return {"amplitudes": list(amplitudes), "displacement": disp, "remainder": rem,
            "remainder_field": rem_field, "displacement_slope": slope(disp),
            "remainder_slope": slope(rem), "remainder_field_slope": slope(rem_field),
            "modes": nf.size, "terms": len(nf.rows)}
