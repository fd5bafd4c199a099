"""Adaptive high-order integration with dense output and section events.

Stepping uses scipy's DOP853 (explicit Runge-Kutta 8(5,3) with a 7th order
interpolant).  Crossings of a section are bracketed step by step and then
refined on the interpolant with Brent's method.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from .errors import BudgetExceeded, NoCrossing, PreconditionError, StepUnderflow, TangentialCrossing

Field = Callable[[float, np.ndarray], np.ndarray]

TIME_TOL = 1e-12


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-13
    max_step: float = 0.25
    max_time: float = 1e4

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise PreconditionError("tolerances must be positive")
        if not self.max_step > 0:
            raise PreconditionError("max_step must be positive")
        if not self.max_time > 0:
            raise PreconditionError("max_time must be positive")


class Direction(enum.Enum):
    INCREASING = 1
    DECREASING = -1
    EITHER = 0


@dataclass(frozen=True)
class SectionEvent:
    coordinate: Callable[[np.ndarray], float]
    level: float
    direction: Direction = Direction.EITHER
    tol: float = 1e-10

    def __post_init__(self):
        if not math.isfinite(self.level):
            raise PreconditionError("section level must be finite")

    def value(self, y) -> float:
        return float(self.coordinate(y)) - self.level


class Trajectory:
    """Piecewise dense solution; call it with a time to interpolate."""

    def __init__(self, t0, y0):
        self.times = [float(t0)]
        self.states = [np.array(y0, dtype=np.complex128 if np.iscomplexobj(y0) else float)]
        self._pieces = []

    def _append(self, t, y, piece):
        self.times.append(float(t))
        self.states.append(np.array(y))
        self._pieces.append(piece)

    @property
    def t0(self) -> float:
        return self.times[0]

    @property
    def t1(self) -> float:
        return self.times[-1]

    @property
    def y_final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.times)

    def __call__(self, t: float) -> np.ndarray:
        forward = self.t1 >= self.t0
        lo, hi = (self.t0, self.t1) if forward else (self.t1, self.t0)
        if not lo - 1e-12 <= t <= hi + 1e-12:
            raise ValueError(f"time {t} outside trajectory window [{lo}, {hi}]")
        if not self._pieces:
            return self.states[0].copy()
        key = t if forward else -t
        keys = self.times if forward else [-s for s in self.times]
        k = min(max(bisect_right(keys, key) - 1, 0), len(self._pieces) - 1)
        return self._pieces[k](t)

    def sample(self, times) -> np.ndarray:
        return np.array([self(t) for t in times])


def _march(rhs, y0, t0, t_bound, cfg, dense=True):
    """Yield (t_old, t_new, y_new, interpolant) for each accepted step."""
    solver = DOP853(rhs, t0, np.array(y0), t_bound, max_step=cfg.max_step,
                    rtol=cfg.rel_tol, atol=cfg.abs_tol)
    while solver.status == "running":
        t_old = solver.t
        msg = solver.step()
        if solver.status == "failed":
            raise StepUnderflow(f"step failed near t={solver.t}: {msg}")
        piece = solver.dense_output() if dense else None
        yield t_old, solver.t, solver.y, piece


def integrate(rhs: Field, y0, t0: float, t1: float, cfg: IntegratorConfig = IntegratorConfig(),
              on_step: Optional[Callable[[float, np.ndarray], None]] = None) -> Trajectory:
    """Integrate from t0 to t1 (either direction) and return a dense trajectory.

    ``on_step(t, y)`` is called after every accepted step and may raise to abort.
    """
    if abs(t1 - t0) > cfg.max_time:
        raise BudgetExceeded(f"span {abs(t1 - t0)} exceeds max_time {cfg.max_time}")
    traj = Trajectory(t0, y0)
    if t1 == t0:
        return traj
    for _, t, y, piece in _march(rhs, y0, t0, t1, cfg):
        traj._append(t, y, piece)
        if on_step is not None:
            on_step(t, y)
    return traj


def _accepts(event: SectionEvent, g0: float, g1: float) -> bool:
    if event.direction is Direction.INCREASING:
        return g0 < 0.0 <= g1
    if event.direction is Direction.DECREASING:
        return g0 > 0.0 >= g1
    return (g0 < 0.0 <= g1) or (g0 > 0.0 >= g1)


def integrate_to_section(rhs: Field, y0, event: SectionEvent, cfg: IntegratorConfig = IntegratorConfig(),
                         t0: float = 0.0, backward: bool = False,
                         on_step: Optional[Callable[[float, np.ndarray], None]] = None,
                         trajectory: Optional[list] = None):
    """Integrate until the monitored scalar crosses ``event.level``.

    Returns (state, time).  If ``trajectory`` is a list, the dense Trajectory
    up to the crossing is appended to it.
    """
    y0 = np.array(y0)
    g_start = event.value(y0)
    if event.direction is Direction.EITHER and abs(g_start) <= event.tol:
        if trajectory is not None:
            trajectory.append(Trajectory(t0, y0))
        return y0, t0
    sign = -1.0 if backward else 1.0
    traj = Trajectory(t0, y0) if trajectory is not None else None
    g_prev = g_start
    for t_old, t, y, piece in _march(rhs, y0, t0, t0 + sign * cfg.max_time, cfg):
        g = event.value(y)
        if traj is not None:
            traj._append(t, y, piece)
        if _accepts(event, -g_prev, -g) if backward else _accepts(event, g_prev, g):
            tc = _refine(event, piece, t_old, t, g_prev, g)
            yc = piece(tc)
            # trim the stored trajectory at the crossing
            if traj is not None:
                traj.times[-1] = tc
                traj.states[-1] = np.array(yc)
                trajectory.append(traj)
            slope = _slope(event, piece, tc, t_old, t)
            if abs(slope) < event.tol:
                raise TangentialCrossing(f"crossing at t={tc} has slope {slope:.3e}")
            return yc, tc
        if on_step is not None:
            on_step(t, y)
        g_prev = g
    raise NoCrossing(f"no crossing of level {event.level} within max_time {cfg.max_time}")


def _refine(event, piece, ta, tb, ga, gb):
    if ga == 0.0:
        return ta
    if gb == 0.0:
        return tb
    f = lambda s: event.value(piece(s))
    lo, hi = (ta, tb) if ta < tb else (tb, ta)
    return brentq(f, lo, hi, xtol=TIME_TOL, rtol=4 * np.finfo(float).eps, maxiter=200)


def _slope(event, piece, tc, ta, tb):
    h = max(abs(tb - ta) * 1e-4, 1e-9)
    lo, hi = (ta, tb) if ta < tb else (tb, ta)
    a, b = max(tc - h, lo), min(tc + h, hi)
    if b <= a:
        return 0.0
    return (event.value(piece(b)) - event.value(piece(a))) / (b - a)
