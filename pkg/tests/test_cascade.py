import json
import math

import numpy as np
import pytest

from cascade_lab.cascade import (CascadeParams, cascade_diagnostics, initial_state, mode_series,
                                 search_cascade_orbit)
from cascade_lab.errors import PreconditionError
from cascade_lab.frames import to_saddle_frame
from cascade_lab.integrator import integrate
from cascade_lab.toy import ToyParams, toy_field, toy_mass


def test_search_succeeds_for_five_modes(cascade5):
    params, state, report, _ = cascade5
    assert report.ok
    assert report.success == {3: True, 4: True}
    assert report.monotone
    assert abs(toy_mass(state.modes) - 1) < 1e-14
    assert report.h_drift < 1e-8 and report.m_drift < 1e-8


def test_transition_times_increase(cascade5):
    _, _, report, _ = cascade5
    ts = report.transition_times
    assert ts[0] == 0.0
    assert all(a < b for a, b in zip(ts, ts[1:]))
    assert all(a < e for a, e in zip(ts, report.exit_times))
    assert report.start_time <= report.end_time


def test_threshold_window(cascade5):
    params, _, report, _ = cascade5
    thr = params.toy.threshold
    for row in report.mode_table:
        j = row["saddle"]
        peak = row["max_abs"]
        assert peak[j - 1] > 1 - thr
        assert all(peak[k - 1] < thr for k in range(1, 6) if abs(k - j) > 1)


def test_start_on_entry_section(cascade5):
    params, state, _, _ = cascade5
    f = to_saddle_frame(state.modes, 3)
    assert f.q1 == pytest.approx(params.toy.sigma, abs=1e-12)
    assert f.p1 < 0


def test_report_serialises(cascade5):
    _, _, report, _ = cascade5
    doc = json.loads(json.dumps(report.to_dict()))
    assert doc["ok"] is True
    assert set(doc["success"]) == {"3", "4"}
    assert doc["time_constant"] == pytest.approx(report.time_constant)


def test_mode_series_shape(cascade5):
    _, _, _, traj = cascade5
    rows = mode_series(traj, 51)
    assert len(rows) == 51 and len(rows[0]) == 1 + 5 + 2
    assert all(abs(r[-1] - 1) < 1e-8 for r in rows)


def test_delta_above_sigma_squared_is_rejected():
    params = CascadeParams(toy=ToyParams(n_modes=5, delta=0.05, sigma=0.15))
    with pytest.raises(PreconditionError):
        search_cascade_orbit(params)


def test_bad_params():
    with pytest.raises(PreconditionError):
        CascadeParams(search_depth=0)
    with pytest.raises(PreconditionError):
        CascadeParams(shoot_tolerance=1.0)


def test_resting_orbit_reports_nothing():
    params = CascadeParams(toy=ToyParams(n_modes=5, delta=1e-3))
    y = np.zeros(5, dtype=complex)
    y[2] = 1.0
    report = cascade_diagnostics(integrate(toy_field, y, 0.0, 5.0), params)
    assert report.transition_times == []
    assert not report.ok
    assert report.start_time == 0.0 and report.end_time is None


def test_initial_state_has_unit_mass():
    params = CascadeParams(toy=ToyParams(n_modes=6, delta=1e-4))
    y = initial_state(params, {5: 1e-3, 6: 2e-3j})
    assert toy_mass(y) == pytest.approx(1.0, abs=1e-14)
    p1 = to_saddle_frame(y, 3).p1
    assert p1 == pytest.approx(-0.005 * 1e-4 * math.log(1e4))
