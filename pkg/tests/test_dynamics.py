import math

import numpy as np
import pytest

from conftest import STD
from drychaos.dynamics import (
    THETA0,
    NoSuchPhase,
    Params,
    derived_phases,
    eval_G1,
    eval_G1_dt,
    eval_G1_dtheta,
    eval_G2,
    first_root_after,
    force,
    free_flow,
    hp_context,
    prog_flow,
    rest_start_velocity,
)


def test_theta0():
    assert abs(THETA0 - 0.81047) < 1e-5
    assert abs(math.sin(THETA0) - 0.724611) < 1e-6
    assert abs(math.pi - THETA0 - 1 / math.tan(THETA0 / 2)) < 1e-12


def test_phases_reference_values():
    ph = derived_phases(STD)
    assert ph.t0 == pytest.approx(0.8947, abs=1e-4)
    assert ph.t1 == pytest.approx(2.2469, abs=1e-4)
    assert ph.t2 == pytest.approx(3.16159, abs=1e-5)
    assert ph.t3 == pytest.approx(6.26318, abs=1e-5)


@pytest.mark.parametrize("b,q", [(0.01, 0.8), (0.2, 0.9), (1e-4, 0.75), (0.03, 0.3)])
def test_phases_are_zeros(b, q):
    p = Params(1.0, b, q)
    ph = derived_phases(p)
    assert abs(force(ph.t2, p)) < 1e-12 and abs(force(ph.t3, p)) < 1e-12
    assert abs(force(ph.t0, p) - q) < 1e-12 and abs(force(ph.t1, p) - q) < 1e-12
    assert 0 < ph.t0 < ph.t1 < math.pi < ph.t2 < 1.5 * math.pi < ph.t3 < 2 * math.pi
    assert ph.t1 == pytest.approx(math.pi - ph.t0, abs=1e-15)
    assert ph.c < 0


def test_phases_small_b_limit():
    ph = derived_phases(Params(1.0, 1e-12, 0.8))
    assert ph.t2 == pytest.approx(math.pi, abs=1e-11)
    assert ph.t3 == pytest.approx(2 * math.pi, abs=1e-11)


def test_phases_extended_precision_match():
    hp = derived_phases(STD, 50)
    fl = derived_phases(STD)
    for name in ("t0", "t1", "t2", "t3"):
        assert abs(float(getattr(hp, name)) - getattr(fl, name)) < 1e-15
    assert abs(force(hp.t2, STD)) < hp_context(50).mpf(10) ** -45


@pytest.mark.parametrize("b,q", [(0.6, 0.9), (0.01, 1.1), (0.01, 1.5)])
def test_degenerate_phases_rejected(b, q):
    with pytest.raises(NoSuchPhase):
        derived_phases(Params(1.0, b, q))


def test_params_validation_and_regimes():
    with pytest.raises(ValueError):
        Params(0.0, 0.01, 0.8)
    with pytest.raises(ValueError):
        Params(1.0, float("nan"), 0.8)
    assert STD.standard and STD.relaxed and STD.regime == "standard"
    assert Params(1.0, 0.01, 0.5).regime == "relaxed"
    assert Params(1.0, 0.01, 1.05).regime == "eventual-stop"
    assert Params(1.0, 0.01, 0.02).regime == "eternal-progression"
    assert Params.from_text("a = 1\nb = 0.01\nq = 0.8") == STD


def test_flows_at_initial_instant():
    assert free_flow(3.2, 0.1, -0.4, 3.2, STD) == pytest.approx((0.1, -0.4), abs=1e-15)
    assert prog_flow(3.2, 0.1, -0.4, 3.2, STD) == pytest.approx((0.1, -0.4), abs=1e-15)


def test_free_flow_degenerate_closed_form():
    p = Params(1.0, 1e-14, 0.8)
    x, v = free_flow(0.0, 0.0, 0.0, math.pi, p)
    assert x == pytest.approx(math.pi, abs=1e-12)
    assert v == pytest.approx(2.0, abs=1e-12)


def test_prog_flow_is_free_flow_with_c():
    p = Params(1.0, 0.3, 0.1)  # c = 0.25
    free = Params(1.0, p.c, 0.1)
    for t in (0.5, 2.0, 7.0):
        assert prog_flow(0.3, 0.0, 0.2, t, p) == pytest.approx(free_flow(0.3, 0.0, 0.2, t, free), abs=1e-14)


def ode_errors(flow, k, p, n, seed, dps=30):
    """Worst relative ODE residual by central differences with step 1e-5.

    The differences are taken in ``dps``-digit arithmetic: in doubles the
    second difference at this step carries roundoff near 1e-5 * |x|.
    """
    ctx = hp_context(dps)
    rng = np.random.default_rng(seed)
    h = ctx.mpf("1e-5")
    worst = 0.0
    for _ in range(n):
        theta = ctx.mpf(rng.uniform(0, 2 * math.pi))
        x0, x1 = ctx.mpf(rng.uniform(-1, 1)), ctx.mpf(rng.uniform(-1, 1))
        t = theta + ctx.mpf(rng.uniform(0.1, 20))
        xm, _ = flow(theta, x0, x1, t - h, p)
        x, v = flow(theta, x0, x1, t, p)
        xp, _ = flow(theta, x0, x1, t + h, p)
        rhs = p.a * ctx.sin(t) + 2 * k
        acc_err = abs((xp - 2 * x + xm) / h**2 - rhs) / max(1, abs(rhs))
        vel_err = abs((xp - xm) / (2 * h) - v) / max(1, abs(v))
        worst = max(worst, float(acc_err), float(vel_err))
    return worst


def test_flows_satisfy_odes():
    assert ode_errors(free_flow, STD.b, STD, 500, seed=1) < 1e-6
    assert ode_errors(prog_flow, STD.c, STD, 500, seed=2) < 1e-6


def test_rest_start_velocity_form():
    ph = derived_phases(STD)
    for t in np.linspace(ph.t0, ph.t0 + 5, 11):
        _, v = prog_flow(ph.t0, 0.0, 0.0, t, STD)
        expect = -STD.a * (math.cos(t) - math.cos(ph.t0)) + 2 * STD.c * (t - ph.t0)
        assert v == pytest.approx(expect, abs=1e-13)
        assert rest_start_velocity(t, ph.t0, STD) == pytest.approx(expect, abs=1e-13)


def test_G1_vanishes_at_release():
    rng = np.random.default_rng(2)
    for theta in rng.uniform(0, 2 * math.pi, 1000):
        assert abs(eval_G1(theta, theta, STD)) < 1e-14
        assert abs(eval_G1_dt(theta, theta, STD)) < 1e-14


def test_G1_dtheta_matches_formula_and_differences():
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(200):
        theta = rng.uniform(0, 2 * math.pi)
        t = theta + rng.uniform(0.1, 10)
        fd = (eval_G1(theta + h, t, STD) - eval_G1(theta - h, t, STD)) / (2 * h)
        formula = -(2 * STD.b + STD.a * math.sin(theta)) * (t - theta)
        assert eval_G1_dtheta(theta, t, STD) == pytest.approx(formula, abs=1e-12)
        assert fd == pytest.approx(formula, abs=1e-8)


def test_G2_at_impact_is_impact_velocity():
    theta, theta1 = 3.3, 9.0
    x1 = -STD.a * math.cos(theta1) + 2 * STD.b * (theta1 - theta) + STD.a * math.cos(theta)
    assert eval_G2(theta, theta1, theta1, STD) == pytest.approx(x1, abs=1e-14)
    assert eval_G1_dt(theta, theta1, STD) == pytest.approx(x1, abs=1e-14)


def test_G2_is_progression_velocity():
    theta, theta1 = 3.3, 9.0
    x1 = eval_G1_dt(theta, theta1, STD)
    for t in (9.1, 10.0, 12.5):
        _, v = prog_flow(theta1, 0.0, x1, t, STD)
        assert eval_G2(theta, theta1, t, STD) == pytest.approx(v, abs=1e-12)


def test_first_root_after_simple_root():
    hit = first_root_after(math.sin, 0.1, 2 * math.pi)
    assert abs(hit.t - math.pi) < 1e-12 and not hit.grazing


@pytest.mark.parametrize("r", [2.0, 2.00037])
def test_first_root_after_double_root(r):
    hit = first_root_after(lambda t: (t - r) ** 2, 0.0, 5.0)
    assert hit.grazing
    assert hit.t == pytest.approx(r, abs=1e-6)


def test_first_root_after_matches_brute_force():
    theta = 3.3

    def g(t):
        return eval_G1(theta, t, STD)

    hit = first_root_after(g, theta, 4 * math.pi * (1 + STD.a / STD.b))
    # coarse sweep for the first sign change, then a 1e-6 grid inside that cell
    ts = np.arange(theta + 1e-3, hit.t + 1.0, 1e-3)
    gs = np.array([g(t) for t in ts])
    i = int(np.flatnonzero(np.sign(gs[1:]) != np.sign(gs[:-1]))[0])
    fine = np.arange(ts[i], ts[i + 1] + 1e-6, 1e-6)
    gf = np.array([g(t) for t in fine])
    j = int(np.flatnonzero(np.sign(gf[1:]) != np.sign(gf[:-1]))[0])
    assert fine[j] - 1e-9 <= hit.t <= fine[j + 1] + 1e-9


def test_first_root_after_deterministic():
    f = lambda t: eval_G1(3.7, t, STD)  # noqa: E731
    a = first_root_after(f, 3.7, 500.0)
    b = first_root_after(f, 3.7, 500.0)
    assert a == b


def test_double_flows_match_extended_precision():
    ctx = hp_context(30)
    rng = np.random.default_rng(4)
    for _ in range(200):
        theta, x0, x1 = rng.uniform(0, 2 * math.pi), rng.uniform(-1, 1), rng.uniform(-1, 1)
        t = theta + rng.uniform(0.0, 50)
        for flow in (free_flow, prog_flow):
            xd, vd = flow(theta, x0, x1, t, STD)
            xh, vh = flow(ctx.mpf(theta), ctx.mpf(x0), ctx.mpf(x1), ctx.mpf(t), STD)
            assert xd == pytest.approx(float(xh), rel=1e-12, abs=1e-12)
            assert vd == pytest.approx(float(vh), rel=1e-12, abs=1e-12)
