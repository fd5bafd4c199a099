"""Saddle-to-saddle cascade search and diagnostics for the toy model.

The orbit starts on the entry section of T_3 with a small negative p1
(the corridor depth) and p2 at the cancellation target.  For every later
saddle j the initial amplitude of mode j+1, which is elliptic until the
orbit reaches T_j, is shot so that the entry coordinates (p2, q2) at
saddle j hit (cancellation target, 0).  The shots are solved one saddle
at a time by damped Newton iteration with a finite-difference Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import CascadeLabError, NoSolution, PreconditionError, SearchFailed
from .frames import (SaddleFrame, cancellation_target, chart_p2, chart_q1, entry_event, exit_event,
                     from_saddle_frame, to_saddle_frame)
from .integrator import IntegratorConfig, Trajectory, integrate, integrate_to_section
from .toy import ToyParams, ToyState, toy_field, toy_hamiltonian, toy_mass


@dataclass(frozen=True)
class CascadeParams:
    toy: ToyParams = ToyParams()
    shoot_tolerance: float = 1e-11
    per_saddle_budget: float = 60.0
    search_depth: int = 12
    entry_depth: float = 0.005  # C in p1 = -C delta ln(1/delta) at the first entry
    seed_amplitude: float = 1e-3
    integrator: IntegratorConfig = IntegratorConfig()

    def __post_init__(self):
        if not 0 < self.shoot_tolerance < self.toy.threshold:
            raise PreconditionError("shoot_tolerance must lie in (0, delta**nu)")
        if self.search_depth < 1:
            raise PreconditionError("search_depth must be at least 1")
        if self.per_saddle_budget <= 0:
            raise PreconditionError("per_saddle_budget must be positive")

    def check_search_preconditions(self):
        t = self.toy
        if t.delta >= t.sigma ** 2:
            raise PreconditionError(
                f"delta={t.delta} must be below sigma^2={t.sigma ** 2:.4g} so that entry amplitudes "
                f"of order sqrt(delta) fit inside the saddle neighbourhood")

    @property
    def section_config(self) -> IntegratorConfig:
        c = self.integrator
        return IntegratorConfig(c.rel_tol, c.abs_tol, c.max_step, self.per_saddle_budget)


@dataclass
class CascadeReport:
    transition_times: list = field(default_factory=list)
    exit_times: list = field(default_factory=list)
    mode_table: list = field(default_factory=list)
    h_drift: float = 0.0
    m_drift: float = 0.0
    total_time: float = 0.0
    start_time: Optional[float] = None
    end_time: Optional[float] = None
    success: dict = field(default_factory=dict)
    monotone: bool = False
    entry_frames: list = field(default_factory=list)
    parameters: dict = field(default_factory=dict)
    sobolev_ratio: Optional[float] = None

    @property
    def ok(self) -> bool:
        return bool(self.success) and all(self.success.values()) and self.end_time is not None \
            and self.start_time is not None

    @property
    def time_constant(self) -> Optional[float]:
        """Largest t_{j+1} - t_j measured in units of ln(1/delta)."""
        d = self.parameters.get("delta")
        ts = self.transition_times
        if d is None or len(ts) < 2:
            return None
        return max(b - a for a, b in zip(ts, ts[1:])) / math.log(1.0 / d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["success"] = {str(k): v for k, v in self.success.items()}
        out["ok"] = self.ok
        out["time_constant"] = self.time_constant
        return out


def _start_frame(params: CascadeParams, amplitudes: dict, depth: float) -> SaddleFrame:
    t = params.toy
    p1 = -depth * t.delta * math.log(1.0 / t.delta)
    x = cancellation_target(-p1, t.sigma)
    c = {k: amplitudes.get(k, 0.0) for k in range(5, t.n_modes + 1)}
    return SaddleFrame(3, t.n_modes, p1, t.sigma, x, 0.0, c, 0.0)


def initial_state(params: CascadeParams, amplitudes: dict, depth: Optional[float] = None) -> np.ndarray:
    depth = params.entry_depth if depth is None else depth
    return from_saddle_frame(_start_frame(params, amplitudes, depth)).modes


def _entry(params, amplitudes, depth, j):
    """Frame and time at the entry section of saddle j."""
    sigma, cfg = params.toy.sigma, params.section_config
    y = initial_state(params, amplitudes, depth)
    t = 0.0
    for k in range(3, j):
        y, dt = integrate_to_section(toy_field, y, exit_event(k, sigma), cfg)
        t += dt
        y, dt = integrate_to_section(toy_field, y, entry_event(k + 1, sigma), cfg)
        t += dt
    return to_saddle_frame(y, j), t


def _p2_target(frame: SaddleFrame, sigma: float, fallback: float) -> float:
    if frame.p1 < 0:
        try:
            return cancellation_target(-frame.p1, sigma)
        except NoSolution:
            pass
    return fallback


def _shoot(params, amplitudes, depth, j, fallback):
    """Adjust the initial amplitude of mode j+1 so that (p2, q2) = (target, 0) at entry j."""
    sigma = params.toy.sigma
    k = j + 1

    def residual(w):
        trial = dict(amplitudes)
        trial[k] = w
        f, _ = _entry(params, trial, depth, j)
        return np.array([f.p2 - _p2_target(f, sigma, fallback), f.q2])

    w = complex(amplitudes.get(k, params.seed_amplitude))
    res = residual(w)
    for _ in range(params.search_depth):
        if np.max(np.abs(res)) < params.shoot_tolerance:
            amplitudes[k] = w
            return
        h = 1e-6 * max(abs(w), 1e-6)
        jac = np.column_stack([(residual(w + dw) - res) / h for dw in (h, 1j * h)])
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise SearchFailed(j, "singular shooting Jacobian") from exc
        dw = complex(step[0], step[1])
        # halve the step until the residual decreases
        for _ in range(params.search_depth):
            try:
                new = residual(w + dw)
            except CascadeLabError:
                new = None
            if new is not None and np.max(np.abs(new)) < np.max(np.abs(res)):
                break
            dw *= 0.5
        else:
            raise SearchFailed(j, "no decrease along the Newton direction")
        w, res = w + dw, new
    if np.max(np.abs(res)) < params.shoot_tolerance:
        amplitudes[k] = w
        return
    raise SearchFailed(j, f"residual {np.max(np.abs(res)):.3e} after {params.search_depth} iterations")


def _search(params: CascadeParams, depth: float) -> dict:
    t = params.toy
    amplitudes = {k: complex(params.seed_amplitude) for k in range(5, t.n_modes + 1)}
    fallback = _start_frame(params, amplitudes, depth).p2
    for j in range(4, t.n_modes):
        try:
            _shoot(params, amplitudes, depth, j, fallback)
        except SearchFailed:
            raise
        except CascadeLabError as exc:
            raise SearchFailed(j, str(exc)) from exc
    return amplitudes


def search_cascade_orbit(params: CascadeParams = CascadeParams()):
    """Find an initial condition near T_3 whose orbit visits T_4, ..., T_{N-1}.

    Returns (initial ToyState, CascadeReport).  On failure the corridor depth
    is halved once and the search repeated before SearchFailed propagates.
    """
    params.check_search_preconditions()
    depth = params.entry_depth
    try:
        amplitudes = _search(params, depth)
    except SearchFailed:
        depth *= 0.5
        amplitudes = _search(params, depth)
    y0 = initial_state(params, amplitudes, depth)
    traj = cascade_trajectory(params, y0)
    report = cascade_diagnostics(traj, params)
    report.parameters["entry_depth"] = depth
    report.parameters["amplitudes"] = {str(k): [v.real, v.imag] for k, v in sorted(amplitudes.items())}
    for j in range(3, params.toy.n_modes):
        try:
            f, _ = _entry(params, amplitudes, depth, j)
        except CascadeLabError:
            break
        report.entry_frames.append({"j": j, "p1": f.p1, "q1": f.q1, "p2": f.p2, "q2": f.q2})
    if not report.ok:
        failed = [j for j, v in sorted(report.success.items()) if not v]
        raise SearchFailed(failed[0] if failed else params.toy.n_modes - 1, "orbit misses the criteria")
    return ToyState(y0, 0.0), report


def cascade_trajectory(params: CascadeParams, y0) -> Trajectory:
    """Integrate from the start until well past the arrival at T_{N-1}."""
    t = params.toy
    cfg = params.section_config
    y, total = np.array(y0), 0.0
    for j in range(3, t.n_modes - 1):
        y, dt = integrate_to_section(toy_field, y, exit_event(j, t.sigma), cfg)
        total += dt
        y, dt = integrate_to_section(toy_field, y, entry_event(j + 1, t.sigma), cfg)
        total += dt
    # linger at the last saddle: twice the local passage time scale
    tail = 2.0 * math.log(1.0 / t.delta) / math.sqrt(3.0) + 2.0
    return integrate(toy_field, y0, 0.0, total + tail, params.integrator)


def _crossing(traj, g, ts, gs, start, sign):
    """First time >= start where g crosses zero with the given sign of slope."""
    for i in range(len(ts) - 1):
        if ts[i + 1] < start or not (np.isfinite(gs[i]) and np.isfinite(gs[i + 1])):
            continue
        a, b = gs[i], gs[i + 1]
        if sign < 0 and a > 0 >= b or sign > 0 and a < 0 <= b:
            if b == 0:
                return ts[i + 1]
            return brentq(lambda s: g(traj(s)), ts[i], ts[i + 1], xtol=1e-12)
    return None


def _safe(chart, j):
    def f(b):
        if abs(b[j - 1]) < 1e-14:
            return math.nan
        return chart(b, j)
    return f


def cascade_diagnostics(trajectory: Trajectory, params: CascadeParams, samples_per_unit: int = 50) -> CascadeReport:
    t = params.toy
    n, sigma, thr = t.n_modes, t.sigma, t.threshold
    t0, t1 = trajectory.t0, trajectory.t1
    grid = np.linspace(t0, t1, max(int((t1 - t0) * samples_per_unit), 2) + 1)
    ts = np.union1d(grid, np.asarray(trajectory.times))
    ys = trajectory.sample(ts)
    amp = np.abs(ys)
    h = np.array([toy_hamiltonian(y) for y in ys])
    m = np.array([toy_mass(y) for y in ys])
    report = CascadeReport(parameters={"N": n, "delta": t.delta, "sigma": sigma, "nu": t.nu})
    report.h_drift = float(np.max(np.abs(h - h[0])) / max(abs(h[0]), 1e-300))
    report.m_drift = float(np.max(np.abs(m - m[0])) / max(abs(m[0]), 1e-300))

    # section hits, in order
    entries, exits, clock = [], [], t0
    for j in range(3, n):
        q1 = _safe(chart_q1, j)
        if j == 3 and abs(q1(ys[0]) - sigma) < 1e-9:
            tj = t0
        else:
            gs = np.array([q1(y) - sigma for y in ys])
            tj = _crossing(trajectory, lambda y: q1(y) - sigma, ts, gs, clock, -1)
        if tj is None:
            break
        entries.append(tj)
        p2 = _safe(chart_p2, j)
        gs = np.array([p2(y) - sigma for y in ys])
        te = _crossing(trajectory, lambda y: p2(y) - sigma, ts, gs, tj, +1)
        if te is None:
            break
        exits.append(te)
        clock = te
    report.transition_times = [float(x) for x in entries]
    report.exit_times = [float(x) for x in exits]

    def holds(row, j):
        return row[j - 1] > 1 - thr and all(row[k] < thr for k in range(n) if k != j - 1)

    start = next((s for s, row in zip(ts, amp) if holds(row, 3)), None)
    report.start_time = None if start is None else float(start)
    end = None
    if len(entries) == n - 3 and start is not None:
        end = next((s for s, row in zip(ts, amp) if s >= entries[-1] and holds(row, n - 1)), None)
    report.end_time = None if end is None else float(end)
    if start is not None and end is not None:
        report.total_time = float(end - start)

    bounds = list(entries) + [end if end is not None else t1]
    for idx, j in enumerate(range(3, 3 + len(entries))):
        a, b = bounds[idx], bounds[idx + 1]
        if b is None or b < a:
            report.success[j] = False
            continue
        sel = (ts >= a) & (ts <= b)
        peak = amp[sel].max(axis=0)
        off = [k for k in range(1, n + 1) if abs(k - j) > 1]
        off_max = max((peak[k - 1] for k in off), default=0.0)
        report.mode_table.append({"saddle": j, "interval": [float(a), float(b)],
                                  "max_abs": [float(v) for v in peak]})
        report.success[j] = bool(peak[j - 1] > 1 - thr and off_max < thr)
    for j in range(3 + len(entries), n):
        report.success[j] = False

    if start is not None and end is not None:
        sel = (ts >= start) & (ts <= end)
        arg = np.argmax(amp[sel], axis=1)
        steps = np.diff(arg)
        report.monotone = bool(np.all((steps == 0) | (steps == 1)))
    return report


def mode_series(trajectory: Trajectory, n_samples: int = 1001):
    """Rows (t, |b_1|, ..., |b_N|, h, M) on a uniform grid."""
    ts = np.linspace(trajectory.t0, trajectory.t1, n_samples)
    rows = []
    for s, y in zip(ts, trajectory.sample(ts)):
        rows.append([float(s)] + [float(v) for v in np.abs(y)] + [toy_hamiltonian(y), toy_mass(y)])
    return rows
