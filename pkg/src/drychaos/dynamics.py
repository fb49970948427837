"""Parameters, phase constants, closed-form flows and root finding.

The system is a unit mass driven by ``F(t) = a sin t + 2b`` that can push a
one-way delimiter carrying dry friction of magnitude ``q``.  Everything here
is a pure function of its inputs.  Scalars may be Python floats, numpy
arrays or mpmath numbers from a dedicated :func:`hp_context`; the flows and
the contact functions dispatch on the argument type so the same formulas
serve the double-precision scan and the extended-precision refinement.
"""

from __future__ import annotations

import configparser
import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple

import mpmath
import numpy as np

TOL_ROOT = 1e-12
TOL_GRAZE = 1e-9  # scaled by the force amplitude a
H_SCAN = 1e-3
TWO_PI = 2.0 * math.pi

_SCAN_CHUNK = 4096


class NoSuchPhase(ValueError):
    """Zeros of F or F - q do not exist for these parameters."""


class NoRootInHorizon(RuntimeError):
    """No sign change and no grazing dip before the end of the horizon."""


# --- Numeric backends ---

@functools.lru_cache(maxsize=None)
def hp_context(dps: int) -> mpmath.ctx_mp.MPContext:
    """Private mpmath context with ``dps`` decimal digits.

    Each precision gets its own context so no global mpmath state is touched;
    numbers created by a context carry it along in arithmetic.
    """
    ctx = mpmath.MPContext()
    ctx.dps = dps
    return ctx


def is_hp(x) -> bool:
    return hasattr(x, "context") and hasattr(x, "_mpf_")


def _lib(*xs):
    for x in xs:
        if is_hp(x):
            return x.context
    for x in xs:
        if isinstance(x, np.ndarray):
            return np
    return math


def pi_like(x):
    return x.context.pi if is_hp(x) else math.pi


def to_hp(x, dps: int):
    ctx = hp_context(dps)
    if is_hp(x):
        return ctx.mpf(x)
    return ctx.mpf(float(x))


def mod_2pi(t):
    """Reduce an instant to its phase in [0, 2*pi)."""
    if is_hp(t):
        ctx = t.context
        two_pi = 2 * ctx.pi
        return t - two_pi * ctx.floor(t / two_pi)
    r = math.fmod(t, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r


# --- Parameters and phase constants ---

def _bisect_theta0() -> float:
    def f(th):
        return math.pi - th - 1.0 / math.tan(th / 2.0)

    lo, hi = 1e-6, math.pi / 2 - 1e-6
    flo = f(lo)
    while hi - lo > 1e-16 * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


THETA0 = _bisect_theta0()


@dataclass(frozen=True)
class Params:
    """System constants: force amplitude ``a``, half the constant force ``b``,
    and the maximal dry-friction force ``q`` (all nondimensional)."""

    a: float
    b: float
    q: float

    def __post_init__(self):
        for name in ("a", "b", "q"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"parameter {name} must be a positive finite number, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def c(self) -> float:
        return self.b - self.q / 2.0

    @property
    def standard(self) -> bool:
        """Chaos regime: b < a/2 and a sin(theta0) < q < a."""
        return self.b < self.a / 2.0 and self.a * math.sin(THETA0) < self.q < self.a

    @property
    def relaxed(self) -> bool:
        """Weaker regime sufficient for superstability of t2 under inclusion (21)."""
        return self.q < self.a

    @property
    def regime(self) -> str:
        a, b, q = self.a, self.b, self.q
        if q >= a + 2 * b:
            return "eventual-stop"
        if q <= 2 * b:
            return "eternal-progression"
        if 2 * b >= a:
            return "no-free-motion"
        if self.standard:
            return "standard"
        if self.relaxed:
            return "relaxed"
        return "outside"

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "Params":
        missing = [k for k in ("a", "b", "q") if k not in values]
        if missing:
            raise ValueError(f"missing parameter(s): {', '.join(missing)}")
        return cls(float(values["a"]), float(values["b"]), float(values["q"]))

    @classmethod
    def from_text(cls, text: str, section: str = "params") -> "Params":
        """Parse ``a=..``, ``b=..``, ``q=..`` lines, optionally under ``[params]``."""
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if not any(line.strip().startswith("[") for line in text.splitlines()):
            text = f"[{section}]\n{text}"
        parser.read_string(text)
        return cls.from_mapping(parser[section])


@dataclass(frozen=True)
class Phases:
    theta0: float
    t0: float
    t1: float
    t2: float
    t3: float
    c: float


@functools.lru_cache(maxsize=256)
def _phases_cached(p: Params, dps: int | None) -> Phases:
    a, b, q = p.a, p.b, p.q
    if 2 * b >= a:
        raise NoSuchPhase(f"F(t) = a sin t + 2b has no zeros: 2b = {2 * b} >= a = {a} (no free motion)")
    if not -a < q - 2 * b < a:
        raise NoSuchPhase(f"F(t) - q has no zeros: q - 2b = {q - 2 * b} outside (-a, a)")
    if dps is None:
        m, pi = math, math.pi
        a_, b_, q_ = a, b, q
    else:
        m = hp_context(dps)
        pi = m.pi
        a_, b_, q_ = m.mpf(a), m.mpf(b), m.mpf(q)
    s0 = m.asin((q_ - 2 * b_) / a_)
    s2 = m.asin(2 * b_ / a_)
    t0 = mod_2pi(s0)
    return Phases(
        theta0=THETA0,
        t0=t0,
        t1=pi - s0,
        t2=pi + s2,
        t3=2 * pi - s2,
        c=b_ - q_ / 2,
    )


def derived_phases(p: Params, dps: int | None = None) -> Phases:
    """Phase constants t0 < t1 (zeros of F - q) and t2 < t3 (zeros of F).

    With ``dps`` set the phases are mpmath numbers at that precision.
    """
    return _phases_cached(p, dps)


def phases_like(x, p: Params) -> Phases:
    """Phases in the same number type as ``x``."""
    if is_hp(x):
        return derived_phases(p, x.context.dps)
    return derived_phases(p)


def force(t, p: Params):
    m = _lib(t)
    return p.a * m.sin(t) + 2 * p.b


# --- Mechanical state ---

class Regime(str, enum.Enum):
    FREE = "Free"
    PROGRESSION = "Progression"
    STOP = "Stop"


@dataclass(frozen=True)
class MotionState:
    t: float
    x: float
    v: float
    y: float
    regime: Regime

    def check(self, tol: float = 1e-9) -> None:
        if self.x > self.y + tol:
            raise ValueError(f"mass ahead of delimiter: x={self.x} > y={self.y}")
        if self.regime is not Regime.FREE and abs(self.x - self.y) > tol:
            raise ValueError(f"{self.regime.value} requires x = y")
        if self.regime is Regime.STOP and abs(self.v) > tol:
            raise ValueError("Stop requires zero velocity")
        if self.regime is Regime.PROGRESSION and self.v < -tol:
            raise ValueError("Progression requires non-negative velocity")


# --- Closed-form flows ---

def _flow(theta, x0, x1, t, a, k):
    m = _lib(theta, t)
    s = t - theta
    ct = m.cos(theta)
    x = -a * m.sin(t) + k * s * s + (x1 + a * ct) * s + x0 + a * m.sin(theta)
    v = -a * m.cos(t) + 2 * k * s + x1 + a * ct
    return x, v


def free_flow(theta, x0, x1, t, p: Params):
    """Free motion from ``x(theta) = x0``, ``x'(theta) = x1``; returns (x, v) at t."""
    return _flow(theta, x0, x1, t, p.a, p.b)


def prog_flow(theta, x0, x1, t, p: Params):
    """Motion with progression (mass pushing the delimiter against friction)."""
    return _flow(theta, x0, x1, t, p.a, p.c)


# --- Contact and progression-stop functions ---

def _sin_minus_id(s, m):
    """sin(s) - s without cancellation for small |s|."""
    if m is np:
        s = np.asarray(s, dtype=float)
        s2 = s * s
        series = -s * s2 * (1 / 6 - s2 * (1 / 120 - s2 * (1 / 5040 - s2 * (1 / 362880 - s2 * (
            1 / 39916800 - s2 * (1 / 6227020800 - s2 / 1307674368000))))))
        return np.where(np.abs(s) < 0.5, series, np.sin(s) - s)
    if m is math and abs(s) < 0.5:
        s2 = s * s
        return -s * s2 * (1 / 6 - s2 * (1 / 120 - s2 * (1 / 5040 - s2 * (1 / 362880 - s2 * (
            1 / 39916800 - s2 * (1 / 6227020800 - s2 / 1307674368000))))))
    return m.sin(s) - s


def eval_G1(theta, t, p: Params):
    """Gap between the free-flight position and the delimiter after a release
    at ``theta`` with zero velocity: b s^2 - a sin t + a cos(theta) s + a sin(theta),
    s = t - theta.  Evaluated in a cancellation-free form."""
    m = _lib(theta, t)
    s = t - theta
    half = m.sin(s / 2)
    return p.b * s * s + 2 * p.a * m.sin(theta) * half * half - p.a * m.cos(theta) * _sin_minus_id(s, m)


def eval_G1_dt(theta, t, p: Params):
    """Partial derivative of G1 in t: 2b s - a cos t + a cos(theta); the
    impact velocity when evaluated at a contact."""
    m = _lib(theta, t)
    s = t - theta
    return 2 * p.b * s + 2 * p.a * m.sin(theta + s / 2) * m.sin(s / 2)


def eval_G1_dtheta(theta, t, p: Params):
    m = _lib(theta, t)
    return -(2 * p.b + p.a * m.sin(theta)) * (t - theta)


def eval_G2(theta, theta1, theta2, p: Params):
    """Progression velocity at ``theta2`` after a contact at ``theta1`` that
    followed a release at ``theta``:
    2b(theta1 - theta) + a cos(theta) + 2c(theta2 - theta1) - a cos(theta2)."""
    m = _lib(theta, theta1, theta2)
    u = theta2 - theta1
    return eval_G1_dt(theta, theta1, p) + 2 * p.c * u + 2 * p.a * m.sin(theta1 + u / 2) * m.sin(u / 2)


def eval_G2_dt(theta2, p: Params):
    """Derivative of G2 in its last argument, F(theta2) - q."""
    return force(theta2, p) - p.q


def rest_start_velocity(t, t_start, p: Params):
    """Progression velocity after a start from rest at ``t_start`` (phase t0)."""
    m = _lib(t, t_start)
    u = t - t_start
    return 2 * p.c * u + 2 * p.a * m.sin(t_start + u / 2) * m.sin(u / 2)


# --- Root finding ---

class RootHit(NamedTuple):
    t: float
    grazing: bool


def _evaluate(f, ts: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(ts), dtype=float)
        if out.shape == ts.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(f(float(t))) for t in ts])


def _bisect(f, lo: float, hi: float, flo: float, tol: float) -> float:
    slo = flo > 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == slo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _numeric_derivative(f, h: float):
    def df(t):
        return (f(t + h) - f(t - h)) / (2.0 * h)
    return df


def _extremum(f, df, lo: float, hi: float, sign: float, tol: float) -> float:
    """Locate the point of [lo, hi] where ``sign * f`` is smallest."""
    dlo, dhi = df(lo), df(hi)
    if sign * dlo < 0.0 < sign * dhi:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if sign * df(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    # no derivative sign change: golden-section on sign*f
    g = 0.5 * (math.sqrt(5.0) - 1.0)
    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    f1, f2 = sign * f(x1), sign * f(x2)
    while hi - lo > tol:
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - g * (hi - lo)
            f1 = sign * f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + g * (hi - lo)
            f2 = sign * f(x2)
    return 0.5 * (lo + hi)


def _touches(f, t: float, delta: float) -> bool:
    """A zero hit exactly on the grid is tangential when f keeps its sign across it."""
    return float(f(t - delta)) * float(f(t + delta)) > 0.0


def first_root_after(
    f: Callable,
    t_start: float,
    horizon: float,
    h_scan: float = H_SCAN,
    *,
    df: Callable | None = None,
    tol: float = TOL_ROOT,
    tol_graze: float = TOL_GRAZE,
) -> RootHit:
    """Smallest zero of ``f`` in (t_start, t_start + horizon].

    The interval is scanned on a grid of step ``h_scan`` for a sign change,
    which is then bisected to ``tol``.  Interior local minima of |f| whose
    depth cannot be resolved by the grid are refined through the derivative;
    a refined extremum that reaches zero either hides a pair of close roots
    (the first one is returned) or touches zero tangentially, in which case the
    hit is flagged as grazing.  ``f`` may accept numpy arrays; scalar-only
    callables are evaluated point by point.
    """
    if horizon <= 0.0 or h_scan <= 0.0:
        raise ValueError("horizon and h_scan must be positive")
    t_start = float(t_start)
    t_end = t_start + horizon
    if df is None:
        df = _numeric_derivative(f, min(1e-7, 0.01 * h_scan))

    f_start = float(f(t_start))
    if abs(f_start) <= tol_graze:
        t_ref = t_start + 1e-6 * min(h_scan, horizon)
        f_ref = float(f(t_ref))
    else:
        t_ref, f_ref = t_start, f_start
    if f_ref == 0.0:
        return RootHit(t_ref, _touches(f, t_ref, 1e-6 * h_scan))

    n_total = max(1, int(math.ceil(horizon / h_scan)))
    tt_prev = np.array([t_ref])
    ff_prev = np.array([f_ref])
    k = 1
    while k <= n_total:
        kk = np.arange(k, min(k + _SCAN_CHUNK, n_total + 1))
        ts = np.minimum(t_start + kk * h_scan, t_end)
        fs = _evaluate(f, ts)
        tt = np.concatenate([tt_prev, ts])
        ff = np.concatenate([ff_prev, fs])
        offset = len(tt_prev)

        crossing = np.nonzero((ff[:-1] * ff[1:] < 0.0) | (ff[1:] == 0.0))[0]
        crossing = crossing[crossing >= offset - 1]
        i_cross = int(crossing[0]) if crossing.size else len(ff)

        af = np.abs(ff)
        lo_i = max(1, offset - 1)
        hi_i = min(i_cross, len(ff) - 2)
        for i in range(lo_i, hi_i + 1):
            if not (af[i] <= af[i - 1] and af[i] <= af[i + 1]):
                continue
            if ff[i - 1] * ff[i] <= 0.0 or ff[i] * ff[i + 1] <= 0.0:
                continue
            curvature = abs(ff[i - 1] - 2.0 * ff[i] + ff[i + 1])
            if af[i] > tol_graze + 2.0 * curvature:
                continue
            sign = 1.0 if ff[i] > 0.0 else -1.0
            te = _extremum(f, df, float(tt[i - 1]), float(tt[i + 1]), sign, tol)
            fe = float(f(te))
            if sign * fe <= 0.0:
                if abs(fe) <= tol_graze:
                    return RootHit(te, True)
                return RootHit(_bisect(f, float(tt[i - 1]), te, float(ff[i - 1]), tol), False)
            if abs(fe) <= tol_graze:
                return RootHit(te, True)

        if i_cross < len(ff):
            lo, hi = float(tt[i_cross]), float(tt[i_cross + 1])
            if ff[i_cross + 1] == 0.0:
                return RootHit(hi, _touches(f, hi, 1e-6 * h_scan))
            return RootHit(_bisect(f, lo, hi, float(ff[i_cross]), tol), False)

        tt_prev, ff_prev = tt[-2:], ff[-2:]
        k = int(kk[-1]) + 1
    raise NoRootInHorizon(f"no root in ({t_start}, {t_end}]")


def polish_root(f: Callable, df: Callable, guess, lo, hi, maxiter: int = 80):
    """Refine a simple root bracketed by [lo, hi] in the precision of ``lo``.

    Newton steps are taken from ``guess`` and replaced by bisection whenever
    they leave the current bracket.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError("polish_root: bracket has no sign change")
    if is_hp(lo):
        ctx = lo.context
        eps = ctx.mpf(10) ** (-(ctx.dps - 2))
        floor = ctx.mpf(10) ** (-(ctx.dps // 2))
    else:
        eps = 4e-16
        floor = 1e-8
    t = guess
    scale = max(1, abs(t))
    prev_step = None
    for _ in range(maxiter):
        ft = f(t)
        if ft == 0:
            return t
        if (ft > 0) == (flo > 0):
            lo, flo = t, ft
        else:
            hi = t
        d = df(t)
        tn = t - ft / d if d != 0 else None
        if tn is not None and abs(tn - t) <= eps * scale:
            return tn
        if tn is None or not lo <= tn <= hi:
            tn = (lo + hi) / 2
        step = abs(tn - t)
        if step <= eps * scale or hi - lo <= eps * scale:
            return tn
        # Newton no longer contracting at a tiny step: f is at its rounding floor
        if prev_step is not None and step < floor * scale and step > prev_step / 2:
            return tn
        prev_step = step
        t = tn
    return t
