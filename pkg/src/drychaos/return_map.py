"""Next-hit map T1 and the return map T on the release segment [t2, t3).

A release is a transition to free flight with the mass at rest against the
delimiter.  Starting from a release phase ``theta`` the motion is followed
through contact, progression, possible stops and a restart from rest at the
next t0, until the next release.  Root finding runs in double precision; when
``theta`` is an mpmath number every located instant is polished to the
precision of its context.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

from .dynamics import (
    H_SCAN,
    TOL_GRAZE,
    TOL_ROOT,
    NoRootInHorizon,
    Params,
    Phases,
    derived_phases,
    eval_G1,
    eval_G1_dt,
    eval_G2,
    first_root_after,
    force,
    hp_context,
    is_hp,
    mod_2pi,
    phases_like,
    pi_like,
    polish_root,
    prog_flow,
    rest_start_velocity,
)

TOL_V = 1e-10  # scaled by a
_POLISH_HALF_WIDTH = 1e-9


class InvalidPhase(ValueError):
    pass


class NoReturn(RuntimeError):
    """The motion never switches back to free flight (repeating rest-start cycle)."""


class Scenario(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    CPRIME = "Cprime"
    D = "D"
    DPRIME = "Dprime"


class EventKind(str, enum.Enum):
    FREE_TO_PROG = "FreeToProg"
    FREE_TO_STOP = "FreeToStop"
    PROG_TO_FREE = "ProgToFree"
    PROG_TO_STOP = "ProgToStop"
    STOP_TO_PROG = "StopToProg"
    STOP_TO_FREE = "StopToFree"


@dataclass(frozen=True)
class TransitionEvent:
    t: float
    kind: EventKind
    x: float
    v: float


@dataclass(frozen=True)
class ReturnResult:
    theta_in: float
    theta_out: float
    theta1: float
    theta2: float | None
    scenario: Scenario
    events: tuple[TransitionEvent, ...]
    delta_y: float
    grazing: bool = False
    t4: float | None = None


class Hit(NamedTuple):
    theta1: float
    grazing: bool


# --- Phase bookkeeping ---

def snap_phase(t, ph: Phases):
    """Phase of ``t`` in [0, 2*pi), snapped onto t0..t3 (or 0) within TOL_ROOT."""
    r = mod_2pi(t)
    for boundary in (ph.t0, ph.t1, ph.t2, ph.t3):
        if abs(r - boundary) < TOL_ROOT:
            return boundary
    if 2 * pi_like(t) - r < TOL_ROOT:
        return r * 0
    return r


def _cycle_start(t, r):
    """Instant of phase 0 in the cycle containing ``t`` (``r`` is t's phase)."""
    return t - r


def _check_release(theta, ph: Phases):
    if not ph.t2 <= theta < ph.t3:
        raise InvalidPhase(f"release phase {theta} outside [t2, t3) = [{ph.t2}, {ph.t3})")


# --- Contact: first zero of G1 ---

def contact_windows(theta: float, p: Params) -> list[tuple[float, float]]:
    """Intervals of s = t - theta where a contact is possible.

    G1 = P(s) - a sin t with P(s) = b s^2 + a cos(theta) s + a sin(theta), so a
    zero needs |P(s)| <= a.  Beyond P(s) = a the gap is positive, which also
    bounds the search.
    """
    a, b = p.a, p.b
    B, C = a * math.cos(theta), a * math.sin(theta)
    s_max = (-B + math.sqrt(B * B - 4 * b * (C - a))) / (2 * b)
    pad = 1e-9 * (1.0 + s_max)
    windows = [(0.0, s_max + pad)]
    if B < 0.0:
        disc = B * B - 4 * b * (C + a)
        if disc > 0.0:
            s2 = (-B + math.sqrt(disc)) / (2 * b)
            s1 = (C + a) / (b * s2)
            if s2 - s1 > 4 * pad:
                windows = [(0.0, s1 + pad), (s2 - pad, s_max + pad)]
    return windows


def _contact_double(theta: float, after: float, p: Params) -> Hit:
    def g(t):
        return eval_G1(theta, t, p)

    def dg(t):
        return eval_G1_dt(theta, t, p)

    tol_graze = TOL_GRAZE * p.a
    for lo, hi in contact_windows(theta, p):
        start = max(theta + lo, after)
        end = theta + hi
        if end <= start:
            continue
        try:
            hit = first_root_after(g, start, end - start, H_SCAN, df=dg, tol=TOL_ROOT, tol_graze=tol_graze)
        except NoRootInHorizon:
            continue
        return Hit(hit.t, hit.grazing)
    raise NoRootInHorizon(f"no contact after release at {theta}")


def _polish(f, df, t_double: float, like):
    """Polish a double-precision root of ``f`` to the precision of ``like``."""
    ctx = like.context
    t = ctx.mpf(t_double)
    w = _POLISH_HALF_WIDTH
    for _ in range(8):
        lo, hi = t - w, t + w
        flo, fhi = f(lo), f(hi)
        if (flo > 0) != (fhi > 0):
            return polish_root(f, df, t, lo, hi)
        w *= 10
    raise NoRootInHorizon(f"cannot bracket root near {t_double} in extended precision")


def _skip_tangency(theta, t, p: Params) -> float:
    """First grid point after a tangential contact where the gap is clearly open."""
    limit = 2 * TOL_GRAZE * p.a
    step = H_SCAN / 16
    s = t + step
    for _ in range(1 << 16):
        if eval_G1(theta, s, p) < -limit:
            return s
        step = min(2 * step, H_SCAN)
        s += step
    return s


def next_hit_T1(theta, p: Params) -> Hit:
    """First instant after the release ``theta`` at which the mass reaches the
    delimiter again.  The result is an instant, not a phase."""
    ph = phases_like(theta, p)
    _check_release(theta, ph)
    return _next_contact(theta, theta, p)


def _next_contact(theta, after, p: Params) -> Hit:
    hit = _contact_double(float(theta), float(after), p)
    if not is_hp(theta):
        return hit
    if hit.grazing:
        return Hit(theta.context.mpf(hit.theta1), True)
    t = _polish(lambda t: eval_G1(theta, t, p), lambda t: eval_G1_dt(theta, t, p), hit.theta1, theta)
    return Hit(t, False)


# --- Progression stop: first zero of G2 ---

def _progression_horizon(x1: float, p: Params) -> float:
    if p.c >= 0.0:
        raise NoRootInHorizon("progression never stops: q <= 2b")
    return (abs(x1) + 2 * p.a) / (-2 * p.c) + 10 * H_SCAN


def _first_velocity_zero(v, t_start: float, x1: float, p: Params, ph: Phases) -> float:
    """First instant after ``t_start`` where a progression velocity ``v`` vanishes
    for good.  Tangential zeros at phase t0 (force rising through q) do not stop
    the motion and are stepped over."""
    horizon = _progression_horizon(x1, p)
    start = t_start
    end = t_start + horizon
    while True:
        hit = first_root_after(
            v, start, end - start, H_SCAN,
            df=lambda t: force(t, p) - p.q, tol=TOL_ROOT, tol_graze=TOL_GRAZE * p.a,
        )
        if hit.grazing and force(hit.t, p) - p.q >= -TOL_GRAZE * p.a:
            start = hit.t + H_SCAN
            continue
        return hit.t


def progression_stop(theta, theta1, p: Params):
    """End of the progression that starts with the contact at ``theta1``."""
    x1 = eval_G1_dt(theta, theta1, p)
    if x1 < -TOL_V * p.a:
        raise ValueError(f"negative impact velocity {x1} at {theta1}")
    if x1 <= TOL_V * p.a and force(theta1, p) - p.q <= 0:
        return theta1
    ph = derived_phases(p)

    def v(t):
        return eval_G2(float(theta), float(theta1), t, p)

    t2 = _first_velocity_zero(v, float(theta1), float(x1), p, ph)
    if not is_hp(theta):
        return t2
    return _polish(lambda t: eval_G2(theta, theta1, t, p), lambda t: force(t, p) - p.q, t2, theta)


# --- Progression from rest at t0 ---

@functools.lru_cache(maxsize=256)
def _rest_stop_offset(p: Params, dps: int | None):
    ph = derived_phases(p)
    t0 = ph.t0
    t4 = _first_velocity_zero(lambda t: rest_start_velocity(t, t0, p), t0, 0.0, p, ph)
    if dps is None:
        return t4 - t0
    hp = derived_phases(p, dps)
    t0h = hp.t0
    t4h = _polish(lambda t: rest_start_velocity(t, t0h, p), lambda t: force(t, p) - p.q, t4, t0h)
    return t4h - t0h


def rest_start_stop(k: int, p: Params, dps: int | None = None):
    """Stop instant t4 of the progression that starts from rest at t0 + 2*pi*k."""
    ph = derived_phases(p, dps)
    t_start = ph.t0 + 2 * k * pi_like(ph.t0)
    return t_start + _rest_stop_offset(p, dps)


class Lemma1Check(NamedTuple):
    holds: bool
    margin: float
    sufficient_margin: float
    sufficient_holds: bool


def check_lemma1(p: Params) -> Lemma1Check:
    """Does a progression started from rest at t0 stop before t2?

    ``margin`` is the progression velocity reached at t2 (negative means it
    has stopped earlier); ``sufficient_margin`` is the cruder bound obtained by
    replacing t2 with pi.
    """
    ph = derived_phases(p)
    a = p.a
    margin = -a * math.cos(ph.t2) + a * math.cos(ph.t0) + 2 * p.c * (ph.t2 - ph.t0)
    sufficient = a + a * math.cos(ph.t0) - (p.q - 2 * p.b) * (math.pi - ph.t0)
    return Lemma1Check(margin < 0.0, margin, sufficient, sufficient < 0.0)


def lemma1_reference_bound(a: float, t0: float) -> float:
    """a (1 + cos t0 - sin t0 (pi - t0)); negative exactly when t0 > theta0."""
    return a * (1.0 + math.cos(t0) - math.sin(t0) * (math.pi - t0))


# --- The return map ---

def return_T(theta, p: Params) -> ReturnResult:
    """One application of the return map from the release phase ``theta``."""
    ph = phases_like(theta, p)
    _check_release(theta, ph)
    zero = theta * 0
    events: list[TransitionEvent] = []
    delta_y = zero
    grazing = False

    after = theta
    while True:
        hit = _next_contact(theta, after, p)
        theta1 = hit.theta1
        r1 = snap_phase(theta1, ph)
        if not hit.grazing:
            break
        grazing = True
        if ph.t2 <= r1 < ph.t3:
            # instantaneous stop, the mass falls back: free flight goes on
            after = _skip_tangency(float(theta), float(theta1), p)
            continue
        break

    x1 = eval_G1_dt(theta, theta1, p) if not hit.grazing else zero
    if hit.grazing and not ph.t0 <= r1 < ph.t2:
        # zero-velocity contact in [t3, 2pi) u [0, t0): stop, then restart at t0
        events.append(TransitionEvent(theta1, EventKind.FREE_TO_STOP, zero, zero))
        return _rest_start_branch(theta, theta1, None, r1, ph, p, events, delta_y, grazing, prime=True)

    if x1 < 0:
        x1 = zero
    events.append(TransitionEvent(theta1, EventKind.FREE_TO_PROG, zero, x1))
    theta2 = theta1 if hit.grazing and force(theta1, p) <= p.q else progression_stop(theta, theta1, p)
    y2 = prog_flow(theta1, zero, x1, theta2, p)[0]
    delta_y = delta_y + y2
    r2 = snap_phase(theta2, ph)

    if ph.t2 <= r2 < ph.t3:
        events.append(TransitionEvent(theta2, EventKind.PROG_TO_FREE, y2, zero))
        return ReturnResult(theta, r2, theta1, theta2, Scenario.A, tuple(events), delta_y, grazing)
    if ph.t1 <= r2 < ph.t2:
        events.append(TransitionEvent(theta2, EventKind.PROG_TO_STOP, y2, zero))
        release = _cycle_start(theta2, r2) + ph.t2
        events.append(TransitionEvent(release, EventKind.STOP_TO_FREE, y2, zero))
        return ReturnResult(theta, ph.t2, theta1, theta2, Scenario.B, tuple(events), delta_y, grazing)
    if ph.t0 < r2 < ph.t1:
        raise RuntimeError(f"progression stopped at phase {r2} inside (t0, t1)")
    events.append(TransitionEvent(theta2, EventKind.PROG_TO_STOP, y2, zero))
    return _rest_start_branch(theta, theta1, theta2, r2, ph, p, events, delta_y, grazing, prime=False)


def _rest_start_branch(theta, theta1, theta2, r_stop, ph, p, events, delta_y, grazing, prime):
    t_stop = theta2 if theta2 is not None else theta1
    base = _cycle_start(t_stop, r_stop)
    t0k = base + ph.t0 if r_stop < ph.t0 else base + 2 * pi_like(t_stop) + ph.t0
    dps = t_stop.context.dps if is_hp(t_stop) else None
    t4 = t0k + _rest_stop_offset(p, dps)
    y_stop = delta_y
    events.append(TransitionEvent(t0k, EventKind.STOP_TO_PROG, y_stop, y_stop * 0))
    y4 = y_stop + prog_flow(t0k, y_stop * 0, y_stop * 0, t4, p)[0]
    delta_y = y4
    r4 = snap_phase(t4, ph)
    zero = y4 * 0

    if t4 - t0k <= ph.t2 - ph.t0 + TOL_ROOT:
        events.append(TransitionEvent(t4, EventKind.PROG_TO_STOP, y4, zero))
        events.append(TransitionEvent(t0k - ph.t0 + ph.t2, EventKind.STOP_TO_FREE, y4, zero))
        scenario = Scenario.CPRIME if prime else Scenario.C
        return ReturnResult(theta, ph.t2, theta1, theta2, scenario, tuple(events), delta_y, grazing, t4)

    scenario = Scenario.DPRIME if prime else Scenario.D
    if ph.t2 <= r4 < ph.t3:
        events.append(TransitionEvent(t4, EventKind.PROG_TO_FREE, y4, zero))
        return ReturnResult(theta, r4, theta1, theta2, scenario, tuple(events), delta_y, grazing, t4)
    if ph.t1 <= r4 < ph.t2:
        events.append(TransitionEvent(t4, EventKind.PROG_TO_STOP, y4, zero))
        events.append(TransitionEvent(_cycle_start(t4, r4) + ph.t2, EventKind.STOP_TO_FREE, y4, zero))
        return ReturnResult(theta, ph.t2, theta1, theta2, scenario, tuple(events), delta_y, grazing, t4)
    raise NoReturn(
        f"progression from rest at t0 stops at phase {float(r4):.6g} in [t3, t0): "
        "the same cycle repeats forever and no release follows"
    )


def T(theta, p: Params):
    """Image of a release phase under the return map."""
    return return_T(theta, p).theta_out


def release_segment(p: Params, dps: int | None = None) -> tuple:
    ph = derived_phases(p, dps)
    return ph.t2, ph.t3


__all__ = [
    "EventKind",
    "Hit",
    "InvalidPhase",
    "Lemma1Check",
    "NoReturn",
    "ReturnResult",
    "Scenario",
    "T",
    "TransitionEvent",
    "check_lemma1",
    "contact_windows",
    "hp_context",
    "lemma1_reference_bound",
    "next_hit_T1",
    "progression_stop",
    "release_segment",
    "rest_start_stop",
    "return_T",
    "snap_phase",
]
