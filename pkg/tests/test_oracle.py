import math

import numpy as np
import pytest

from conftest import ORACLE, STD
from drychaos.dynamics import MotionState, Regime, derived_phases
from drychaos.oracle import (
    HorizonExceeded,
    OracleConfig,
    infer_scenario,
    oracle_return,
    oracle_return_detail,
    simulate,
)
from drychaos.return_map import EventKind, Scenario, TransitionEvent, next_hit_T1, return_T


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(dt=0)
    with pytest.raises(ValueError):
        OracleConfig(dt=1e-4, tol_event=1e-3)
    with pytest.raises(ValueError):
        OracleConfig(t_max=-1.0)
    assert OracleConfig().horizon(STD) == pytest.approx(8 * math.pi * 101)


def test_first_event_from_t2_is_the_next_hit():
    ph = derived_phases(ORACLE)
    traj = simulate(MotionState(ph.t2, 0.0, 0.0, 0.0, Regime.FREE), OracleConfig(), ORACLE, until=lambda e: True)
    ev = traj.events[0]
    assert ev.kind is EventKind.FREE_TO_PROG
    assert abs(ev.t - next_hit_T1(ph.t2, ORACLE).theta1) < 1e-9


def test_stop_before_t2_releases_at_t2():
    ph = derived_phases(ORACLE)
    for t in (ph.t1 + 0.1, 2.8, ph.t2 - 0.01):
        traj = simulate(MotionState(t, 0.0, 0.0, 0.0, Regime.STOP), OracleConfig(), ORACLE, until=lambda e: True)
        ev = traj.events[0]
        assert ev.kind is EventKind.STOP_TO_FREE
        assert abs(ev.t - ph.t2) < 1e-9


def test_invalid_initial_state_rejected():
    with pytest.raises(ValueError):
        simulate(MotionState(3.3, 1.0, 0.0, 0.0, Regime.FREE), OracleConfig(), ORACLE)
    with pytest.raises(ValueError):
        simulate(MotionState(3.3, 0.0, 0.5, 0.0, Regime.STOP), OracleConfig(), ORACLE)


def test_run_ends_at_horizon_without_predicate():
    traj = simulate(MotionState(3.3, 0.0, 0.0, 0.0, Regime.FREE), OracleConfig(t_max=20.0), ORACLE)
    assert traj.events == []
    assert traj.final.t == pytest.approx(23.3)


def test_horizon_with_predicate_raises():
    with pytest.raises(HorizonExceeded):
        simulate(MotionState(3.3, 0.0, 0.0, 0.0, Regime.FREE), OracleConfig(t_max=20.0), ORACLE, until=lambda e: True)


def test_constraints_hold_on_samples():
    cfg = OracleConfig(record_samples=True, t_max=400.0)
    traj = simulate(MotionState(3.3, 0.0, 0.0, 0.0, Regime.FREE), cfg, ORACLE)
    rows = np.array([s[:4] for s in traj.samples])
    t, x, v, y = rows.T
    assert len(traj.events) > 4
    assert np.all(x <= y + 1e-9)
    assert np.all(np.diff(y) >= -1e-12)
    assert np.all(np.diff(t) >= 0)
    stop = np.array([s[4] == "Stop" for s in traj.samples])
    assert np.all(v[stop] == 0) and np.all(x[stop] == y[stop])


def test_trajectory_csv():
    cfg = OracleConfig(record_samples=True, t_max=1.0)
    traj = simulate(MotionState(3.3, 0.0, 0.0, 0.0, Regime.FREE), cfg, ORACLE)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,x,v,y,regime"
    assert len(lines) == len(traj.samples) + 1


def test_arc_L1_returns_to_t2():
    ph = derived_phases(ORACLE)
    for theta in np.linspace(197 * math.pi / 100, ph.t3, 5, endpoint=False):
        assert abs(oracle_return(float(theta), OracleConfig(), ORACLE) - ph.t2) < 1e-9


@pytest.mark.parametrize("theta", [3.3, 4.4, 5.0])
def test_step_halving_converges(theta):
    r = [oracle_return(theta, OracleConfig(dt=dt), ORACLE) for dt in (4e-4, 2e-4, 1e-4)]
    d1, d2 = abs(r[1] - r[0]), abs(r[2] - r[1])
    assert d2 <= 4 * d1 + 1e-9


def test_agreement_with_return_map_sample():
    rng = np.random.default_rng(5)
    ph = derived_phases(ORACLE)
    for theta in rng.uniform(ph.t2, ph.t3, 15):
        r = return_T(float(theta), ORACLE)
        o = oracle_return_detail(float(theta), OracleConfig(), ORACLE)
        assert abs(r.theta_out - o.theta_out) < 1e-6
        assert r.scenario == o.scenario


def test_deterministic():
    a = oracle_return_detail(4.1, OracleConfig(), ORACLE)
    b = oracle_return_detail(4.1, OracleConfig(), ORACLE)
    assert a == b


def _ev(t, kind):
    return TransitionEvent(t, kind, 0.0, 0.0)


def test_infer_scenario_labels():
    K = EventKind
    assert infer_scenario([_ev(1, K.FREE_TO_PROG), _ev(2, K.PROG_TO_FREE)]) is Scenario.A
    assert infer_scenario([_ev(1, K.FREE_TO_PROG), _ev(2, K.PROG_TO_STOP), _ev(3, K.STOP_TO_FREE)]) is Scenario.B
    c = [_ev(1, K.FREE_TO_PROG), _ev(2, K.PROG_TO_STOP), _ev(7, K.STOP_TO_PROG), _ev(9, K.PROG_TO_STOP), _ev(9.5, K.STOP_TO_FREE)]
    assert infer_scenario(c) is Scenario.C
    cp = [_ev(1, K.FREE_TO_STOP)] + c[2:]
    assert infer_scenario(cp) is Scenario.CPRIME
    d = c[:3] + [_ev(9, K.PROG_TO_FREE)]
    assert infer_scenario(d) is Scenario.D
