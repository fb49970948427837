"""Brute-force event simulator used to cross-check the return map.

The closed-form flows are exact, so the simulator only has to localise
regime changes.  It walks a uniform grid of step ``dt`` (evaluated in numpy
chunks), brackets the first exit condition of the active regime and bisects
it to ``tol_event``.  None of the root finding in :mod:`drychaos.dynamics` or
:mod:`drychaos.return_map` is used here.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import MotionState, Params, Regime, free_flow, prog_flow
from .return_map import EventKind, Scenario, TransitionEvent

_CHUNK = 8192
_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


class HorizonExceeded(RuntimeError):
    pass


class PenetrationDetected(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    dt: float = 1e-4
    t_max: float | None = None  # default: 8*pi*(1 + a/b) past the start
    tol_event: float = 1e-10
    tol_graze: float = 1e-9  # scaled by a
    tol_v: float = 1e-10  # scaled by a
    record_samples: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.tol_event < self.dt:
            raise ValueError("tol_event must lie in (0, dt)")
        if self.t_max is not None and not self.t_max > 0:
            raise ValueError("t_max must be positive")

    def horizon(self, p: Params) -> float:
        return self.t_max if self.t_max is not None else 8 * math.pi * (1 + p.a / p.b)


@dataclass
class Trajectory:
    samples: list[tuple[float, float, float, float, str]] = field(default_factory=list)
    events: list[TransitionEvent] = field(default_factory=list)
    final: MotionState | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "v", "y", "regime"])
        for t, x, v, y, regime in self.samples:
            w.writerow([repr(t), repr(x), repr(v), repr(y), regime])
        return buf.getvalue()


def _force(t, p: Params):
    return p.a * np.sin(t) + 2 * p.b


def _bisect_first(g, lo: float, hi: float, tol: float) -> float:
    """Point just past the first sign change of g from g(lo) < 0 to g(hi) >= 0."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def _golden_max(g, lo: float, hi: float, tol: float) -> float:
    x1, x2 = hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo)
    g1, g2 = g(x1), g(x2)
    while hi - lo > tol:
        if g1 > g2:
            hi, x2, g2 = x2, x1, g1
            x1 = hi - _GOLDEN * (hi - lo)
            g1 = g(x1)
        else:
            lo, x1, g1 = x1, x2, g2
            x2 = lo + _GOLDEN * (hi - lo)
            g2 = g(x2)
    return 0.5 * (lo + hi)


def _scan(g, t_start: float, t_end: float, cfg: OracleConfig, tangency_tol: float | None):
    """First grid bracket where ``g`` becomes >= 0 on (t_start, t_end].

    Returns (t_event, tangential) or None.  With ``tangency_tol`` set, discrete
    local maxima of g close to zero are refined so that contacts which touch
    the threshold between grid points are not lost.
    """
    dt = cfg.dt
    n_total = int(math.ceil((t_end - t_start) / dt))
    k = 1
    prev_t = np.array([t_start])
    prev_g = np.array([-np.inf])
    while k <= n_total:
        kk = np.arange(k, min(k + _CHUNK, n_total + 1))
        ts = np.minimum(t_start + kk * dt, t_end)
        gs = np.asarray(g(ts), dtype=float)
        tt = np.concatenate([prev_t, ts])
        gg = np.concatenate([prev_g, gs])
        hit = np.flatnonzero(gs >= 0)
        i_hit = int(hit[0]) + len(prev_t) if hit.size else len(gg)

        if tangency_tol is not None:
            i = np.arange(1, min(i_hit, len(gg) - 1))
            # the release point itself is not a peak: prev_g starts at -inf
            peaks = i[np.isfinite(gg[i - 1]) & (gg[i] > gg[i - 1]) & (gg[i] >= gg[i + 1])]
            for j in peaks:
                curv = abs(gg[j - 1] - 2 * gg[j] + gg[j + 1])
                if gg[j] < -(tangency_tol + 2 * curv):
                    continue
                lo = float(tt[j - 1])
                tm = _golden_max(lambda t: float(g(t)), lo, float(tt[j + 1]), cfg.tol_event)
                gm = float(g(tm))
                if gm >= 0:
                    return _bisect_first(lambda t: float(g(t)), lo, tm, cfg.tol_event), False
                if gm >= -tangency_tol:
                    return tm, True

        if i_hit < len(gg):
            lo = float(tt[i_hit - 1])
            return _bisect_first(lambda t: float(g(t)), lo, float(tt[i_hit]), cfg.tol_event), False
        prev_t, prev_g = tt[-2:], gg[-2:]
        k = int(kk[-1]) + 1
    return None


def _check_open_end(until, message: str) -> None:
    if until is not None:
        raise HorizonExceeded(message)


def simulate(initial: MotionState, cfg: OracleConfig, p: Params, until=None) -> Trajectory:
    """Follow the motion from ``initial`` through its regime changes.

    ``until`` is an optional predicate on each new :class:`TransitionEvent`;
    the simulation ends right after the first event for which it is true.
    Without it the run ends at the horizon; with it, reaching the horizon
    first raises :class:`HorizonExceeded`.
    """
    initial.check(cfg.tol_event)
    traj = Trajectory()
    t_end = initial.t + cfg.horizon(p)
    state = initial
    tol_v = cfg.tol_v * p.a

    def emit(t, kind, x, v):
        ev = TransitionEvent(t, kind, x, v)
        traj.events.append(ev)
        return until is not None and until(ev)

    def record(ts, xs, vs, ys, regime):
        if cfg.record_samples:
            for row in zip(ts.tolist(), xs.tolist(), vs.tolist(), ys.tolist()):
                traj.samples.append((*row, regime.value))

    while True:
        t, x, v, y = state.t, state.x, state.v, state.y
        if state.regime is Regime.FREE:
            def gap(s, t=t, x=x, v=v, y=y):
                return free_flow(t, x, v, s, p)[0] - y

            found = _scan(gap, t, t_end, cfg, cfg.tol_graze * p.a)
            if found is None:
                _check_open_end(until, f"no regime change before t = {t_end}")
                found = (t_end, False)
            tc, tangential = found
            if cfg.record_samples:
                ts = np.append(np.arange(t, tc, cfg.dt), tc)
                xs, vs = free_flow(t, x, v, ts, p)
                if np.any(xs > y + 10 * cfg.tol_event):
                    raise PenetrationDetected(f"x > y during free flight before {tc}")
                record(ts, xs, vs, np.full_like(ts, y), Regime.FREE)
            vc = float(free_flow(t, x, v, tc, p)[1])
            fc = float(_force(tc, p))
            if tc == t_end:
                traj.final = MotionState(tc, float(free_flow(t, x, v, tc, p)[0]), vc, y, Regime.FREE)
                return traj
            if vc > tol_v:
                if emit(tc, EventKind.FREE_TO_PROG, y, vc):
                    break
                state = MotionState(tc, y, vc, y, Regime.PROGRESSION)
            elif fc > p.q:
                if emit(tc, EventKind.FREE_TO_PROG, y, 0.0):
                    break
                state = MotionState(tc, y, 0.0, y, Regime.PROGRESSION)
            elif fc >= 0:
                if emit(tc, EventKind.FREE_TO_STOP, y, 0.0):
                    break
                state = MotionState(tc, y, 0.0, y, Regime.STOP)
            elif tangential:
                # touches the delimiter and falls back: nothing switches
                state = MotionState(tc, y, 0.0, y, Regime.FREE)
            else:
                # zero-velocity impact with F < 0: instantaneous stop, mass falls back
                if emit(tc, EventKind.FREE_TO_PROG, y, 0.0) or emit(tc, EventKind.PROG_TO_FREE, y, 0.0):
                    break
                state = MotionState(tc, y, 0.0, y, Regime.FREE)

        elif state.regime is Regime.PROGRESSION:
            if v <= tol_v and _force(t, p) <= p.q:
                tv = t
            else:
                def neg_velocity(s, t=t, x=x, v=v):
                    return -prog_flow(t, x, v, s, p)[1]

                found = _scan(neg_velocity, t, t_end, cfg, None)
                if found is None:
                    _check_open_end(until, f"progression does not stop before t = {t_end}")
                    found = (t_end, False)
                tv = found[0]
            xv = float(prog_flow(t, x, v, tv, p)[0])
            if cfg.record_samples and tv > t:
                ts = np.append(np.arange(t, tv, cfg.dt), tv)
                xs, vs = prog_flow(t, x, v, ts, p)
                record(ts, xs, vs, xs, Regime.PROGRESSION)
            if tv == t_end:
                traj.final = MotionState(tv, xv, float(prog_flow(t, x, v, tv, p)[1]), xv, Regime.PROGRESSION)
                return traj
            if _force(tv, p) < 0:
                if emit(tv, EventKind.PROG_TO_FREE, xv, 0.0):
                    break
                state = MotionState(tv, xv, 0.0, xv, Regime.FREE)
            else:
                if emit(tv, EventKind.PROG_TO_STOP, xv, 0.0):
                    break
                state = MotionState(tv, xv, 0.0, xv, Regime.STOP)

        else:
            def outside(s):
                # F in [0, q] keeps the mass at rest
                f = _force(s, p)
                return np.maximum(f - p.q, -f)

            found = _scan(outside, t, t_end, cfg, None)
            if found is None:
                _check_open_end(until, f"stop lasts past t = {t_end}")
                found = (t_end, False)
            ts_ = found[0]
            if cfg.record_samples:
                ts = np.append(np.arange(t, ts_, cfg.dt), ts_)
                z = np.zeros_like(ts)
                record(ts, z + x, z, z + y, Regime.STOP)
            if ts_ == t_end:
                traj.final = MotionState(ts_, x, 0.0, y, Regime.STOP)
                return traj
            if _force(ts_, p) > 0.5 * p.q:
                if emit(ts_, EventKind.STOP_TO_PROG, x, 0.0):
                    break
                state = MotionState(ts_, x, 0.0, y, Regime.PROGRESSION)
            else:
                if emit(ts_, EventKind.STOP_TO_FREE, x, 0.0):
                    break
                state = MotionState(ts_, x, 0.0, y, Regime.FREE)
    last = traj.events[-1]
    regime = {
        EventKind.FREE_TO_PROG: Regime.PROGRESSION,
        EventKind.STOP_TO_PROG: Regime.PROGRESSION,
        EventKind.PROG_TO_FREE: Regime.FREE,
        EventKind.STOP_TO_FREE: Regime.FREE,
        EventKind.FREE_TO_STOP: Regime.STOP,
        EventKind.PROG_TO_STOP: Regime.STOP,
    }[last.kind]
    traj.final = MotionState(last.t, last.x, last.v, last.x, regime)
    return traj


def _phase(t: float) -> float:
    r = math.fmod(t, 2 * math.pi)
    return r + 2 * math.pi if r < 0 else r


def _release_phases(p: Params):
    s2 = math.asin(2 * p.b / p.a)
    return math.pi + s2, 2 * math.pi - s2


@dataclass(frozen=True)
class OracleReturn:
    theta_out: float
    scenario: Scenario
    events: tuple[TransitionEvent, ...]


def oracle_return_detail(theta: float, cfg: OracleConfig, p: Params) -> OracleReturn:
    t2, t3 = _release_phases(p)
    if not t2 <= theta < t3:
        raise ValueError(f"release phase {theta} outside [t2, t3)")

    def lands_in_release(ev: TransitionEvent) -> bool:
        if ev.kind not in (EventKind.PROG_TO_FREE, EventKind.STOP_TO_FREE):
            return False
        r = _phase(ev.t)
        # a bisected release at t2 may sit a hair before it
        return t2 - 1e-8 <= r < t3

    traj = simulate(MotionState(theta, 0.0, 0.0, 0.0, Regime.FREE), cfg, p, until=lands_in_release)
    events = tuple(traj.events)
    r = _phase(events[-1].t)
    if r < t2:
        r = t2
    return OracleReturn(r, infer_scenario(events), events)


def oracle_return(theta: float, cfg: OracleConfig, p: Params) -> float:
    """Phase of the next release into free flight, found by simulation."""
    return oracle_return_detail(theta, cfg, p).theta_out


def infer_scenario(events) -> Scenario:
    """Scenario label read off the event log of one excursion."""
    kinds = [e.kind for e in events]
    first = kinds[0]
    if EventKind.STOP_TO_PROG not in kinds:
        if kinds[-1] is EventKind.PROG_TO_FREE:
            return Scenario.A
        return Scenario.B
    prime = first is EventKind.FREE_TO_STOP
    i0 = kinds.index(EventKind.STOP_TO_PROG)
    restart = events[i0].t
    last = events[-1]
    same_cycle = last.kind is EventKind.STOP_TO_FREE and last.t - restart < 2 * math.pi and (
        kinds[i0 + 1] is EventKind.PROG_TO_STOP
    )
    if same_cycle:
        return Scenario.CPRIME if prime else Scenario.C
    return Scenario.DPRIME if prime else Scenario.D


__all__ = [
    "HorizonExceeded",
    "OracleConfig",
    "OracleReturn",
    "PenetrationDetected",
    "Trajectory",
    "infer_scenario",
    "oracle_return",
    "oracle_return_detail",
    "simulate",
]
