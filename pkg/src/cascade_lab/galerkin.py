"""Fourier-side cubic systems on finite supports.

Three flows live here:

* the full cubic system  -i a'_n = |n|^2 a_n + sum_{n1-n2+n3=n} a_n1 conj(a_n2) a_n3
  restricted to a finite support (Galerkin projection, so mass is conserved);
* the resonant system on a lattice set, where only the family rectangles
  couple the modes;
* the gauge-frame cubic system used for the approximation experiment: every
  convolution quadruple with at least three vertices in the lattice set, each
  term carrying its phase exp(i*omega*t), omega being the frequency mismatch.

The gauge maps beta_n = a_n exp(-i (G + |n|^2) t).  With G = 2 ||beta||^2
the linear term and the mass part of the self interaction disappear, leaving
-|beta_n|^2 beta_n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import SCHEMA_VERSION
from ._accel import cubic_sum
from .errors import OutOfWindow, PreconditionError, UnlinkedPoint
from .integrator import IntegratorConfig, Trajectory, integrate
from .lattice import LambdaSet


def _norm2(n):
    return n[0] * n[0] + n[1] * n[1]


@dataclass(frozen=True)
class GalerkinState:
    modes: tuple
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        modes = tuple((int(n[0]), int(n[1])) for n in self.modes)
        vals = np.array(self.values, dtype=np.complex128).reshape(len(modes))
        vals.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_dict(cls, amplitudes: dict, time: float = 0.0) -> "GalerkinState":
        modes = sorted(amplitudes)
        return cls(tuple(modes), [amplitudes[n] for n in modes], time)

    def as_dict(self) -> dict:
        return dict(zip(self.modes, self.values))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)))

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)))

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "kind": "galerkin_state", "time": self.time,
                "modes": [{"n": list(n), "re": float(v.real), "im": float(v.imag)}
                          for n, v in zip(self.modes, self.values)]}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GalerkinState":
        return cls(tuple(tuple(m["n"]) for m in doc["modes"]),
                   [complex(m["re"], m["im"]) for m in doc["modes"]], float(doc.get("time", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class LiftConfig:
    rescaling: float = 1.0
    generation_map: Optional[tuple] = None  # toy index (1-based) feeding generation j, default j -> j
    gauge: Optional[float] = None  # None: derived as 2 ||beta(0)||^2

    def __post_init__(self):
        if not self.rescaling > 0:
            raise PreconditionError("rescaling must be positive")


# ---------------------------------------------------------------- resonance lists

def resonance_partners(n, support) -> list:
    """Triples (n1, n2, n3, nontrivial) in support^3 with n1 - n2 + n3 = n and equal frequencies.

    ``nontrivial`` is False for the self terms n1 = n or n3 = n.
    """
    n = (int(n[0]), int(n[1]))
    pts = sorted({(int(p[0]), int(p[1])) for p in support})
    keys = set(pts)
    target = _norm2(n)
    out = []
    for n1 in pts:
        for n3 in pts:
            n2 = (n1[0] + n3[0] - n[0], n1[1] + n3[1] - n[1])
            if n2 in keys and _norm2(n1) - _norm2(n2) + _norm2(n3) == target:
                out.append((n1, n2, n3, n1 != n and n3 != n))
    return out


class _Terms:
    """Rows (i1, i2, i3, out) with weights and frequency mismatches, evaluated by cubic_sum."""

    def __init__(self, rows, weights, freqs, size):
        self.rows = np.ascontiguousarray(np.array(rows, dtype=np.int64).reshape(-1, 4))
        self.weights = np.ascontiguousarray(np.array(weights, dtype=np.complex128))
        self.freqs = np.ascontiguousarray(np.array(freqs, dtype=np.float64))
        self.size = size

    def __len__(self):
        return len(self.rows)

    def __call__(self, y, t=0.0):
        return cubic_sum(np.ascontiguousarray(y, dtype=np.complex128), self.rows, self.weights,
                         self.freqs, float(t), self.size)


# ---------------------------------------------------------------- full system

class CubicSystem:
    """Full cubic system projected onto a finite support."""

    def __init__(self, modes):
        self.modes = tuple(sorted({(int(n[0]), int(n[1])) for n in modes}))
        index = {n: i for i, n in enumerate(self.modes)}
        self.index = index
        self.norms = np.array([_norm2(n) for n in self.modes], dtype=np.float64)
        rows = []
        for i1, n1 in enumerate(self.modes):
            for i2, n2 in enumerate(self.modes):
                for i3, n3 in enumerate(self.modes):
                    o = index.get((n1[0] - n2[0] + n3[0], n1[1] - n2[1] + n3[1]))
                    if o is not None:
                        rows.append((i1, i2, i3, o))
        self.terms = _Terms(rows, np.ones(len(rows)), np.zeros(len(rows)), len(self.modes))

    def rhs(self, t, y):
        return 1j * (self.norms * y + self.terms(y))

    def hamiltonian(self, y) -> float:
        """sum |n|^2 |a_n|^2 + 1/2 sum a1 conj(a2) a3 conj(a4)."""
        quartic = np.vdot(y, self.terms(y)).real
        return float(np.sum(self.norms * np.abs(y) ** 2) + 0.5 * quartic)


def full_rhs(a: GalerkinState, support_closure: Optional[Sequence] = None) -> GalerkinState:
    """Rates of the projected full cubic system on the closure (default: the support itself)."""
    modes = a.modes if support_closure is None else support_closure
    system = CubicSystem(modes)
    y = np.zeros(len(system.modes), dtype=np.complex128)
    src = a.as_dict()
    for n, v in src.items():
        if n not in system.index:
            raise PreconditionError(f"mode {n} lies outside the closure")
        y[system.index[n]] = v
    return GalerkinState(system.modes, system.rhs(a.time, y), a.time)


def convolution_closure(points) -> list:
    """One-step closure {n1 - n2 + n3 : n_i in points} (contains the points)."""
    pts = sorted({(int(p[0]), int(p[1])) for p in points})
    arr = np.array(pts, dtype=np.int64).reshape(-1, 2)
    tot = (arr[:, None, None, :] - arr[None, :, None, :] + arr[None, None, :, :]).reshape(-1, 2)
    return sorted({(int(x), int(y)) for x, y in np.unique(tot, axis=0)})


# ---------------------------------------------------------------- resonant system

class ResonantSystem:
    """Resonant flow on a lattice set: self term plus the two family couplings."""

    def __init__(self, lam: LambdaSet, modes=None):
        self.lam = lam
        self.modes = tuple(lam.points) if modes is None else tuple((int(n[0]), int(n[1])) for n in modes)
        index = {n: i for i, n in enumerate(self.modes)}
        links = lam.links()
        rows = []
        for o, n in enumerate(self.modes):
            if n not in links:
                raise UnlinkedPoint(n)
            rec = links[n]
            if rec["children"] is not None:
                b, d = rec["children"]
                if b in index and d in index and rec["spouse"] in index:
                    rows.append((index[b], index[rec["spouse"]], index[d], o))
            if rec["parents"] is not None:
                a, c = rec["parents"]
                if a in index and c in index and rec["sibling"] in index:
                    rows.append((index[a], index[rec["sibling"]], index[c], o))
        self.terms = _Terms(rows, 2.0 * np.ones(len(rows)), np.zeros(len(rows)), len(self.modes))

    def rhs(self, t, y):
        return 1j * (-np.abs(y) ** 2 * y + self.terms(y))


def resonant_rhs(beta: GalerkinState, lam: LambdaSet) -> GalerkinState:
    """-i beta'_n = -|beta_n|^2 beta_n + 2 beta_c1 beta_c2 conj(beta_spouse) + 2 beta_p1 beta_p2 conj(beta_sibling)."""
    system = ResonantSystem(lam, beta.modes)
    return GalerkinState(beta.modes, system.rhs(beta.time, np.asarray(beta.values)), beta.time)


# ---------------------------------------------------------------- gauge-frame cubic system

class GaugeFrameSystem:
    """Gauge-frame cubic flow from quadruples with at least three vertices in the set.

    Modes are the set plus every point reached by one convolution from it.
    Trivial quadruples are kept for all modes, so the gauge G = 2||beta||^2
    removes the mass term everywhere and the self term -|beta_n|^2 beta_n
    remains.  The truncated Hamiltonian is symmetric under the quadruple
    permutations, hence the flow conserves mass.
    """

    def __init__(self, lam: LambdaSet):
        core = list(lam.points)
        core_set = set(core)
        self.modes = tuple(convolution_closure(core))
        index = {n: i for i, n in enumerate(self.modes)}
        self.index = index
        self.core = np.array([index[n] for n in core], dtype=np.int64)
        norm = {n: _norm2(n) for n in self.modes}
        rows, freqs = [], []
        seen = set()

        def add(n1, n2, n3, n4):
            if n1 == n4 or n3 == n4:
                return
            key = (n1, n2, n3, n4)
            if key in seen:
                return
            seen.add(key)
            rows.append((index[n1], index[n2], index[n3], index[n4]))
            freqs.append(norm[n1] - norm[n2] + norm[n3] - norm[n4])

        # p, q, r run over the set; the fourth vertex is solved for in each slot
        for p in core:
            for q in core:
                for r in core:
                    add(p, q, r, (p[0] - q[0] + r[0], p[1] - q[1] + r[1]))
                    s = (p[0] + q[0] - r[0], p[1] + q[1] - r[1])
                    if s not in core_set:
                        add(s, q, r, p)  # s - q + r = p
                        add(r, q, s, p)
                    m = (p[0] + r[0] - q[0], p[1] + r[1] - q[1])
                    if m not in core_set:
                        add(p, m, r, q)  # p - m + r = q
        self.terms = _Terms(rows, np.ones(len(rows)), np.array(freqs, dtype=np.float64), len(self.modes))
        self.resonant = int(np.sum(np.array(freqs) == 0)) if freqs else 0

    def embed(self, lam_values: dict) -> np.ndarray:
        y = np.zeros(len(self.modes), dtype=np.complex128)
        for n, v in lam_values.items():
            y[self.index[n]] = v
        return y

    def rhs(self, t, y):
        return 1j * (-np.abs(y) ** 2 * y + self.terms(y, t))


# ---------------------------------------------------------------- lift, gauge, errors

class LiftedOrbit:
    """beta_n(t) = lambda^-1 b_j(lambda^-2 t) on generation j, zero elsewhere."""

    def __init__(self, toy: Trajectory, lam: LambdaSet, cfg: LiftConfig = LiftConfig()):
        self.toy, self.lam, self.cfg = toy, lam, cfg
        self.modes = tuple(lam.points)
        gmap = cfg.generation_map or tuple(range(1, lam.n_generations + 1))
        if len(gmap) != lam.n_generations:
            raise PreconditionError("generation_map must name a toy index for every generation")
        toy_index = {}
        for j, g in enumerate(lam.generations):
            for n in g:
                toy_index[n] = gmap[j] - 1
        self.toy_index = np.array([toy_index[n] for n in self.modes], dtype=np.int64)
        n_toy = np.asarray(toy(toy.t0)).shape[0]
        if self.toy_index.max(initial=0) >= n_toy:
            raise PreconditionError("generation_map refers to a toy mode that does not exist")
        b0 = np.asarray(toy(toy.t0))[self.toy_index] / cfg.rescaling
        self.gauge = cfg.gauge if cfg.gauge is not None else 2.0 * float(np.sum(np.abs(b0) ** 2))

    @property
    def window(self) -> tuple:
        s = self.cfg.rescaling ** 2
        return (self.toy.t0 * s, self.toy.t1 * s)

    def values(self, t: float) -> np.ndarray:
        lo, hi = self.window
        if not lo - 1e-12 <= t <= hi + 1e-12:
            raise OutOfWindow(t, lo, hi)
        tt = min(max(t / self.cfg.rescaling ** 2, self.toy.t0), self.toy.t1)
        return np.asarray(self.toy(tt))[self.toy_index] / self.cfg.rescaling

    def __call__(self, t: float) -> GalerkinState:
        return GalerkinState(self.modes, self.values(t), t)


def lift_toy_orbit(toy: Trajectory, lam: LambdaSet, cfg: LiftConfig = LiftConfig()) -> LiftedOrbit:
    return LiftedOrbit(toy, lam, cfg)


def gauge_transform(state: GalerkinState, gauge: float, t: float, direction: int = 1) -> GalerkinState:
    """Multiply each amplitude by exp(direction * i (G + |n|^2) t); +1 maps beta to alpha."""
    if direction not in (1, -1):
        raise PreconditionError("direction must be +1 or -1")
    norms = np.array([_norm2(n) for n in state.modes], dtype=np.float64)
    return GalerkinState(state.modes, np.asarray(state.values) * np.exp(direction * 1j * (gauge + norms) * t),
                         state.time)


def approximation_error(alpha: Callable[[float], GalerkinState], lifted: Callable[[float], GalerkinState],
                        gauge: float, t_end: float, samples: int = 512):
    """Times and sum_n |alpha_n(t) - exp(i(G+|n|^2)t) beta_n(t)| on a uniform grid of [0, t_end]."""
    times = np.linspace(0.0, t_end, samples)
    errs = np.empty(samples)
    for k, t in enumerate(times):
        a = alpha(t).as_dict()
        b = gauge_transform(lifted(t), gauge, t).as_dict()
        errs[k] = sum(abs(a.get(n, 0) - b.get(n, 0)) for n in set(a) | set(b))
    return times, errs


def sobolev_norm(a: GalerkinState, s: float) -> float:
    """(sum (1 + |n|^2)^s |a_n|^2)^(1/2)."""
    if s < 0:
        raise PreconditionError("s must be non-negative")
    w = np.array([(1.0 + _norm2(n)) ** s for n in a.modes])
    return float(np.sqrt(np.sum(w * np.abs(a.values) ** 2)))


def generation_sobolev(a: GalerkinState, lam: LambdaSet, s: float) -> list:
    """Per generation, sum over n in the generation of |n|^(2s) |a_n|^2."""
    vals = a.as_dict()
    return [float(sum(_norm2(n) ** s * abs(vals.get(n, 0)) ** 2 for n in g)) for g in lam.generations]


# ---------------------------------------------------------------- experiments

@dataclass
class ApproximationResult:
    rescaling: float
    window: float
    flow: str
    max_error: float
    mass_drift: float
    modes: int
    terms: int
    times: np.ndarray
    errors: np.ndarray

    def to_dict(self) -> dict:
        return {"rescaling": self.rescaling, "window": self.window, "flow": self.flow,
                "max_error": self.max_error, "mass_drift": self.mass_drift, "modes": self.modes,
                "terms": self.terms}


DEFAULT_COMPARE = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-15, max_step=np.inf, max_time=1e6)


def compare_with_lift(lam: LambdaSet, toy: Trajectory, rescaling: float, flow: str = "resonant",
                      cfg: IntegratorConfig = DEFAULT_COMPARE, samples: int = 512) -> ApproximationResult:
    """Start a Fourier flow on the lifted initial state and track its l1 distance to the lift.

    ``flow`` is "resonant" (family couplings only) or "gauge" (all quadruples
    with at least three vertices in the set, in the gauge frame).  In the
    gauge frame sum |alpha_n - exp(i(G+|n|^2)t) beta_n| is sum |y_n - beta_n|,
    so no phases need to be applied.  Times are measured from the start of
    the lifted window.
    """
    if flow not in ("resonant", "gauge"):
        raise PreconditionError("flow must be 'resonant' or 'gauge'")
    lift = LiftedOrbit(toy, lam, LiftConfig(rescaling=rescaling))
    t0, t1 = lift.window
    t_end = t1 - t0
    times = np.linspace(0.0, t_end, samples)
    lifted = np.array([lift.values(t0 + t) for t in times])
    init = dict(zip(lift.modes, lifted[0]))

    system = GaugeFrameSystem(lam) if flow == "gauge" else ResonantSystem(lam)
    if flow == "gauge":
        y0 = system.embed(init)
        core = system.core
    else:
        y0 = np.array([init[n] for n in system.modes])
        core = np.arange(len(system.modes))
    traj = integrate(system.rhs, y0, 0.0, t_end, cfg)
    ys = traj.sample(times)
    outside = np.setdiff1d(np.arange(len(system.modes)), core)
    # lift modes are ordered as lam.points, same as the core indices
    errs = np.sum(np.abs(ys[:, core] - lifted), axis=1) + np.sum(np.abs(ys[:, outside]), axis=1)
    mass = np.sum(np.abs(ys) ** 2, axis=1)
    return ApproximationResult(float(rescaling), float(t_end), flow, float(errs.max()),
                               float(np.max(np.abs(mass - mass[0])) / mass[0]), len(system.modes),
                               len(system.terms), times, errs)


def reduction_check(lam: LambdaSet, toy: Trajectory, t_start: float, t_end: float,
                    cfg: IntegratorConfig = DEFAULT_COMPARE, samples: int = 512) -> dict:
    """Run the resonant flow from the generation-constant lift of toy(t_start).

    Reports the largest within-generation spread and the largest pointwise
    gap to the toy orbit over [t_start, t_end] (no rescaling).
    """
    system = ResonantSystem(lam)
    gen = np.array([lam.generation_of(n) - 1 for n in system.modes], dtype=np.int64)
    y0 = np.asarray(toy(t_start))[gen]
    traj = integrate(system.rhs, y0, 0.0, t_end - t_start, cfg)
    times = np.linspace(0.0, t_end - t_start, samples)
    ys = traj.sample(times)
    ref = np.array([np.asarray(toy(t_start + t)) for t in times])
    spread = 0.0
    for j in range(lam.n_generations):
        block = ys[:, gen == j]
        if block.shape[1]:
            spread = max(spread, float(np.max(np.abs(block - block[:, :1]))))
    gap = float(np.max(np.abs(ys - ref[:, gen])))
    return {"spread": spread, "gap": gap, "t_start": float(t_start), "t_end": float(t_end)}
