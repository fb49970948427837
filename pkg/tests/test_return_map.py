import math

import numpy as np
import pytest

from conftest import ORACLE, STD
from drychaos.dynamics import THETA0, MotionState, Params, Regime, derived_phases, eval_G1_dt, force, hp_context
from drychaos.oracle import OracleConfig, oracle_return_detail, simulate
from drychaos.return_map import (
    EventKind,
    InvalidPhase,
    Scenario,
    check_lemma1,
    contact_windows,
    lemma1_reference_bound,
    next_hit_T1,
    progression_stop,
    rest_start_stop,
    return_T,
    snap_phase,
)

L1_LO = 197 * math.pi / 100


def grid(p, n, lo=None, hi=None):
    ph = derived_phases(p)
    lo = ph.t2 if lo is None else lo
    hi = ph.t3 if hi is None else hi
    return [float(x) for x in np.linspace(lo, hi, n, endpoint=False)]


def test_release_outside_domain_rejected():
    ph = derived_phases(STD)
    for theta in (ph.t2 - 1e-6, ph.t3, 1.0):
        with pytest.raises(InvalidPhase):
            return_T(theta, STD)


def test_next_hit_short_when_cos_positive():
    ph = derived_phases(STD)
    for theta in np.linspace(1.5 * math.pi + 1e-6, ph.t3 - 1e-9, 200):
        assert next_hit_T1(float(theta), STD).theta1 - theta < 2 * math.pi


def test_next_hit_matches_oracle_first_contact():
    cfg = OracleConfig()
    traj = simulate(MotionState(3.2, 0.0, 0.0, 0.0, Regime.FREE), cfg, STD, until=lambda e: True)
    first = traj.events[0]
    assert first.kind is EventKind.FREE_TO_PROG
    assert abs(next_hit_T1(3.2, STD).theta1 - first.t) < 1e-9


def test_contact_windows_bound_the_hit():
    for theta in grid(STD, 40):
        t1 = next_hit_T1(theta, STD).theta1
        s = t1 - theta
        assert any(lo <= s <= hi for lo, hi in contact_windows(theta, STD))


def test_progression_stop_matches_oracle():
    cfg = OracleConfig()
    theta1 = next_hit_T1(3.3, STD).theta1
    theta2 = progression_stop(3.3, theta1, STD)
    traj = simulate(
        MotionState(3.3, 0.0, 0.0, 0.0, Regime.FREE), cfg, STD, until=lambda e: e.kind is not EventKind.FREE_TO_PROG
    )
    assert traj.events[-1].kind is EventKind.PROG_TO_FREE
    assert abs(traj.events[-1].t - theta2) < 1e-9


def test_progression_never_stops_during_push():
    for p in (STD, ORACLE):
        ph = derived_phases(p)
        for theta in grid(p, 300):
            r = return_T(theta, p)
            if r.theta2 is not None:
                phase = math.fmod(float(r.theta2), 2 * math.pi)
                assert not ph.t0 + 1e-12 < phase < ph.t1 - 1e-12


def test_grazing_impact_stops_at_once():
    # at t = theta the impact velocity is zero and F - q < 0
    theta = 3.4
    assert eval_G1_dt(theta, theta, STD) == 0
    assert progression_stop(theta, theta, STD) == theta


@pytest.mark.parametrize("b", [0.001, 0.005, 0.01, 0.03])
def test_rest_start_stop_after_t1(b):
    p = Params(1.0, b, 0.8)
    ph = derived_phases(p)
    t4 = rest_start_stop(0, p)
    assert ph.t1 <= math.fmod(t4, 2 * math.pi)
    assert rest_start_stop(3, p) == pytest.approx(t4 + 6 * math.pi, abs=1e-12)


def test_rest_start_stop_within_lemma_window():
    ph = derived_phases(ORACLE)
    t4 = rest_start_stop(0, ORACLE)
    assert ph.t1 <= t4 <= ph.t2


def test_lemma1_values():
    chk = check_lemma1(STD)
    assert chk.holds and chk.sufficient_holds
    assert chk.sufficient_margin == pytest.approx(-0.13, abs=0.005)
    assert chk.margin < 0
    for b in (0.001, 0.003, 0.005, 0.01):
        assert check_lemma1(Params(1.0, b, 0.8)).holds


def test_lemma1_reference_bound_vanishes_at_theta0():
    assert abs(lemma1_reference_bound(1.0, THETA0)) < 1e-12


def test_lemma1_fails_for_weak_friction():
    chk = check_lemma1(Params(1.0, 1e-6, 0.5))
    assert not chk.holds and chk.sufficient_margin > 0


def test_return_range_and_invariants():
    for p in (STD, ORACLE):
        ph = derived_phases(p)
        for theta in grid(p, 500):
            r = return_T(theta, p)
            assert ph.t2 <= r.theta_out < ph.t3
            assert r.delta_y >= 0
            if r.scenario in (Scenario.B, Scenario.C, Scenario.CPRIME):
                assert r.theta_out == ph.t2
            assert r.scenario not in (Scenario.D, Scenario.DPRIME)


def test_scenario_C_stops_before_t2():
    ph = derived_phases(ORACLE)
    seen = 0
    for theta in grid(ORACLE, 400):
        r = return_T(theta, ORACLE)
        if r.scenario is Scenario.C:
            seen += 1
            phase = math.fmod(float(r.t4), 2 * math.pi)
            assert ph.t1 <= phase <= ph.t2
    assert seen > 0


def test_arc_L1_returns_to_t2():
    ph = derived_phases(ORACLE)
    for theta in grid(ORACLE, 50, lo=L1_LO):
        r = return_T(theta, ORACLE)
        assert r.theta_out == ph.t2
        assert r.scenario is Scenario.C


def test_return_matches_oracle_at_3_3():
    r = return_T(3.3, ORACLE)
    o = oracle_return_detail(3.3, OracleConfig(), ORACLE)
    assert abs(r.theta_out - o.theta_out) < 1e-8
    assert r.scenario == o.scenario


def test_tangency_phase_at_discontinuities():
    # contacts that are tangential (where T1 jumps) happen while F < 0
    from drychaos.analysis import find_discontinuities

    ph = derived_phases(STD)
    disc = find_discontinuities((ph.t2 + 1e-9, 5 * math.pi / 4), 1000, STD)
    assert len(disc) > 0
    for d in disc.points:
        phase = math.fmod(d.tangency, 2 * math.pi)
        assert 1.5 * math.pi <= phase <= ph.t3
        assert force(d.tangency, STD) < 0


def test_extended_precision_return_agrees():
    ctx = hp_context(40)
    for theta in (3.3, 3.9, 4.6, 5.5):
        rd = return_T(theta, STD)
        rh = return_T(ctx.mpf(theta), STD)
        assert rh.scenario == rd.scenario
        assert abs(float(rh.theta_out) - rd.theta_out) < 1e-9


def test_snap_phase():
    ph = derived_phases(STD)
    assert snap_phase(ph.t2 + 2 * math.pi + 1e-13, ph) == ph.t2
    assert snap_phase(2 * math.pi - 1e-14, ph) == 0.0
    assert snap_phase(1.0 + 4 * math.pi, ph) == pytest.approx(1.0, abs=1e-14)


def test_deterministic():
    a = return_T(4.2, ORACLE)
    b = return_T(4.2, ORACLE)
    assert a == b
