"""Chaos certification for the return map and the superstability test of t2.

Pipeline: locate the jumps of the next-hit map T1, pick two continuity
branches of T whose images cover [t2, 3*pi/2], and use the inverse branches
to build nested intervals for symbol words, periodic points and itineraries.

T expands by a large factor on the covering branches, so forward iteration
loses about three decimal digits per step.  Every construction that chains
several steps (shadow intervals, periodic points, itineraries of shadow
points) therefore runs in an mpmath context of ``HP_DPS`` digits, and the
nested intervals are built backwards through the contracting inverse
branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.ndimage import median_filter
from scipy.optimize import brentq, newton

from .dynamics import (
    TOL_ROOT,
    NoRootInHorizon,
    Params,
    derived_phases,
    eval_G1_dt,
    force,
    hp_context,
    is_hp,
)
from .return_map import (
    NoReturn,
    Scenario,
    check_lemma1,
    next_hit_T1,
    progression_stop,
    return_T,
    snap_phase,
)

HP_DPS = 60
TOL_ORBIT = 1e-10
TOL_DISC = 1e-6
JUMP_FACTOR = 10.0
LOCAL_WINDOW = 21

L0 = (101 * math.pi / 100, 3 * math.pi / 2)
L2 = (101 * math.pi / 100, 51 * math.pi / 50)
TARGET_HI = 3 * math.pi / 2


def arc_L1(p: Params) -> tuple[float, float]:
    return 197 * math.pi / 100, derived_phases(p).t3


class ScanTooCoarse(RuntimeError):
    pass


class CoveringNotFound(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


class NoSignChange(RuntimeError):
    pass


class LengthMismatch(ValueError):
    pass


# --- Discontinuities of T1 ---

@dataclass(frozen=True)
class Discontinuity:
    z: float
    t1_left: float  # T1(z - 0)
    t1_right: float  # T1(z + 0)
    tangency: float  # instant where the free flight touches the delimiter
    residual: float  # tangency equation with b eliminated
    curvature: float  # d2 G1 / dt2 at the tangency

    @property
    def jump(self) -> float:
        return self.t1_left - self.t1_right


@dataclass(frozen=True)
class DiscontinuitySet:
    segment: tuple[float, float]
    n_scan: int
    points: tuple[Discontinuity, ...]
    threshold: float  # smallest local jump threshold of the scan

    @property
    def zs(self) -> list[float]:
        return [d.z for d in self.points]

    @property
    def residuals(self) -> list[float]:
        return [d.residual for d in self.points]

    def __len__(self) -> int:
        return len(self.points)


def _t1(theta: float, p: Params) -> float:
    return float(next_hit_T1(theta, p).theta1)


def tangency_residual(z: float, tau: float) -> float:
    """|2 (sin tau - sin z)/(tau - z) - cos z - cos tau|: the condition for a
    double root of G1 once b has been eliminated through G1 = 0."""
    s = tau - z
    return abs(2.0 * (math.sin(tau) - math.sin(z)) / s - math.cos(z) - math.cos(tau))


def _tangency_point(z: float, guess: float, p: Params) -> float:
    """Local maximum of G1(z, .) next to ``guess`` (Newton on dG1/dt)."""
    t = guess
    for _ in range(60):
        f2 = float(force(t, p))
        if f2 == 0.0:
            break
        step = float(eval_G1_dt(z, t, p)) / f2
        t -= step
        if abs(step) < 1e-15 * max(1.0, abs(t)):
            break
    return t


def _has_jump(lo: float, hi: float, p: Params, threshold: float, n: int = 8) -> bool:
    xs = np.linspace(lo, hi, n + 1)
    vs = np.array([_t1(float(x), p) for x in xs])
    return bool(np.any(np.abs(np.diff(vs)) > threshold))


def _probe_smooth_cells(grid, values, flagged, p: Params, jump_factor: float, n_probe: int = 64) -> None:
    """Midpoint test on unflagged cells.  When jumps sit in most cells the
    local median is itself a jump and hides them; a smooth cell splits its
    change of T1 evenly, a cell with a hidden jump puts it in one half."""
    cells = np.flatnonzero(~flagged)
    if cells.size == 0:
        return
    pick = cells[np.unique(np.linspace(0, cells.size - 1, min(n_probe, cells.size)).astype(int))]
    for j in pick:
        mid = _t1(0.5 * float(grid[j] + grid[j + 1]), p)
        h1, h2 = abs(mid - values[j]), abs(values[j + 1] - mid)
        if max(h1, h2) > jump_factor * max(min(h1, h2), 1e-15):
            raise ScanTooCoarse(f"T1 jumps inside the unflagged scan cell [{grid[j]}, {grid[j + 1]}]")


def find_discontinuities(
    segment: tuple[float, float],
    n_scan: int,
    p: Params,
    jump_factor: float = JUMP_FACTOR,
    check_cells: bool = True,
) -> DiscontinuitySet:
    """Locate the jumps of T1 on ``segment``.

    T1 is sampled on ``n_scan`` points; a neighbour difference larger than
    ``jump_factor`` times the median of the nearby differences marks a jump,
    which is then bisected down to ``TOL_ROOT``.  The median is local because
    the smooth slope of T1 varies by orders of magnitude along [t2, t3) when
    b is small.
    """
    ph = derived_phases(p)
    lo, hi = float(segment[0]), float(segment[1])
    if not (ph.t2 <= lo < hi < ph.t3):
        raise ValueError(f"segment [{lo}, {hi}] must lie inside [t2, t3)")
    if n_scan < 100:
        raise ValueError("n_scan must be at least 100")
    grid = np.linspace(lo, hi, n_scan)
    values = np.array([_t1(float(x), p) for x in grid])
    diffs = np.diff(values)
    local = jump_factor * median_filter(np.abs(diffs), size=LOCAL_WINDOW, mode="nearest")
    flagged = np.abs(diffs) > local
    if check_cells:
        _probe_smooth_cells(grid, values, flagged, p, jump_factor)
    points = []
    for j in np.flatnonzero(flagged):
        threshold = float(local[j])
        a, b = float(grid[j]), float(grid[j + 1])
        va, vb = float(values[j]), float(values[j + 1])
        while b - a > TOL_ROOT:
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            vm = _t1(mid, p)
            if abs(vm - va) <= abs(vb - vm):
                a, va = mid, vm
            else:
                b, vb = mid, vm
        z = b
        if check_cells and (
            _has_jump(float(grid[j]), a - TOL_ROOT, p, threshold)
            or _has_jump(b + TOL_ROOT, float(grid[j + 1]), p, threshold)
        ):
            raise ScanTooCoarse(f"more than one jump of T1 in the scan cell [{grid[j]}, {grid[j + 1]}]")
        tau = _tangency_point(z, vb, p)
        points.append(
            Discontinuity(
                z=z,
                t1_left=va,
                t1_right=vb,
                tangency=tau,
                residual=tangency_residual(z, tau),
                curvature=float(force(tau, p)),
            )
        )
    return DiscontinuitySet((lo, hi), n_scan, tuple(points), float(local.min()))


def monotone_between(disc: DiscontinuitySet, p: Params, n: int = 100, margin: float = 1e-8) -> bool:
    """T1 strictly decreasing on an ``n``-point grid inside each gap between
    consecutive discontinuities (and the end pieces of the segment)."""
    edges = [disc.segment[0], *disc.zs, disc.segment[1]]
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= 4 * margin:
            continue
        xs = np.linspace(lo + margin, hi - margin, n)
        vs = np.array([_t1(float(x), p) for x in xs])
        if not np.all(np.diff(vs) < 0):
            return False
    return True


# --- Continuity branches and the covering pair ---

@dataclass(frozen=True)
class Branch:
    """Segment J of a continuity branch on which T runs monotonically over
    the whole target [t2, 3*pi/2].  ``cycle`` fixes the lift: on J,
    T(theta) = theta2(theta) - 2*pi*cycle."""

    lo: object
    hi: object
    cycle: int
    z_left: float
    z_right: float
    decreasing: bool = True

    @property
    def dps(self) -> int:
        return self.lo.context.dps

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.lo), float(self.hi)

    @property
    def width(self) -> float:
        return float(self.hi - self.lo)

    def contains(self, x) -> bool:
        if is_hp(x):
            return self.lo <= x <= self.hi
        return float(self.lo) <= x <= float(self.hi)


@dataclass(frozen=True)
class CoveringPair:
    J0: Branch
    J1: Branch
    target: tuple[float, float]
    discontinuities: DiscontinuitySet | None = None

    def branch(self, symbol: int) -> Branch:
        if symbol == 0:
            return self.J0
        if symbol == 1:
            return self.J1
        raise ValueError(f"symbol must be 0 or 1, got {symbol!r}")

    @property
    def dps(self) -> int:
        return self.J0.dps

    def symbol_of(self, x) -> int | None:
        if self.J0.contains(x):
            return 0
        if self.J1.contains(x):
            return 1
        return None


def lift(branch_cycle: int, theta, p: Params):
    """Smooth continuation of T across the B plateau: theta2 - 2*pi*cycle."""
    r = return_T(theta, p)
    if r.theta2 is None:
        raise NoRootInHorizon(f"no progression after the contact from {theta}")
    two_pi = 2 * (theta.context.pi if is_hp(theta) else math.pi)
    return r.theta2 - two_pi * branch_cycle


def _hp_root(f, lo, hi, guess=None):
    """Root of a monotone ``f`` bracketed by the hp numbers [lo, hi]."""
    ctx = lo.context
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NoSignChange(f"no sign change on [{lo}, {hi}]")
    if guess is not None:
        # narrow the bracket around a double-precision guess first
        w = ctx.mpf(1e-12) * max(1, abs(guess))
        a, b = max(lo, guess - w), min(hi, guess + w)
        fa, fb = f(a), f(b)
        if (fa > 0) != (fb > 0):
            lo, hi = a, b
    x = ctx.findroot(f, (lo, hi), solver="illinois", verify=False, maxsteps=200)
    if not lo <= x <= hi:
        raise NoSignChange(f"root finder left the bracket [{lo}, {hi}]")
    return x


def _float_root(f, lo: float, hi: float) -> float:
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def _inverse(f, a: float, b: float, fa: float, fb: float) -> float:
    """Root of a smooth monotone f on [a, b]: secant from the chord, brentq
    if that strays."""
    x0 = a - fa * (b - a) / (fb - fa)
    try:
        x = newton(f, x0, x1=x0 + 1e-7 * (b - a), tol=1e-15, maxiter=12)
        if min(a, b) <= x <= max(a, b):
            return float(x)
    except RuntimeError:
        pass
    return _float_root(f, min(a, b), max(a, b))


def _monotone_runs(L: np.ndarray, jump_factor: float = JUMP_FACTOR) -> list[tuple[int, int]]:
    """Index ranges [i, j] over which the sampled lift moves in one direction
    without a step that looks like a jump."""
    d = np.diff(L)
    if d.size == 0:
        return []
    scale = float(np.median(np.abs(d)))
    ok = np.abs(d) <= jump_factor * max(scale, 1e-300)
    runs, i = [], 0
    for k in range(d.size):
        if not ok[k] or (k > i and np.sign(d[k]) != np.sign(d[k - 1])) or d[k] == 0:
            if k > i:
                runs.append((i, k))
            i = k + 1 if not ok[k] or d[k] == 0 else k
    if d.size > i:
        runs.append((i, d.size))
    return runs


def _branch_segments(zl: float, zr: float, p: Params, dps: int, n: int) -> list[Branch] | str:
    """Covering segments inside the continuity branch (zl, zr), in order, or
    a reason why there is none.

    The lift theta2 is continuous on a branch.  Wherever a monotone run of it
    crosses a whole window [t2, 3*pi/2] + 2*pi*k, the preimage of that window
    is a segment J with T(J) = [t2, 3*pi/2].
    """
    ph = derived_phases(p)
    t2, hi_target = ph.t2, TARGET_HI
    width = zr - zl
    margin = max(1e-8, 1e-6 * width)
    uniform = np.linspace(zl + margin, zr - margin, n)
    edges = np.geomspace(margin, width / 4, n // 4)
    xs = np.unique(np.concatenate([uniform, zl + edges, zr - edges]))
    L = np.empty(xs.size)
    for i, x in enumerate(xs):
        try:
            r = return_T(float(x), p)
        except (NoReturn, NoRootInHorizon) as exc:
            return f"return map failed inside branch: {exc}"
        if r.theta2 is None:
            return "no progression from part of the branch"
        L[i] = float(r.theta2)

    ctx = hp_context(dps)
    hp_ph = derived_phases(p, dps)
    two_pi = 2 * math.pi
    found: list[Branch] = []
    for i, j in _monotone_runs(L):
        seg_x, seg_l = xs[i : j + 1], L[i : j + 1]
        lo_l, hi_l = float(seg_l.min()), float(seg_l.max())
        decreasing = seg_l[-1] < seg_l[0]
        for k in range(math.ceil((lo_l - t2) / two_pi), math.floor((hi_l - hi_target) / two_pi) + 1):
            y_lo, y_hi = t2 + two_pi * k, hi_target + two_pi * k
            if not (lo_l < y_lo and y_hi < hi_l):
                continue
            ends = []
            for y in (y_hi, y_lo):
                # first sample pair bracketing y
                c = np.flatnonzero((seg_l[:-1] - y) * (seg_l[1:] - y) <= 0)
                if c.size == 0:
                    break
                m = int(c[0])
                ends.append(_float_root(lambda x, y=y: float(lift(0, float(x), p)) - y, seg_x[m], seg_x[m + 1]))
            if len(ends) < 2:
                continue
            alpha, beta = ends
            span = abs(beta - alpha)
            pad = ctx.mpf(span) * ctx.mpf("1e-3")
            try:
                a_hp = _hp_root(lambda x: lift(k, x, p) - 3 * ctx.pi / 2, ctx.mpf(alpha) - pad, ctx.mpf(alpha) + pad, ctx.mpf(alpha))
                b_hp = _hp_root(lambda x: lift(k, x, p) - hp_ph.t2, ctx.mpf(beta) - pad, ctx.mpf(beta) + pad, ctx.mpf(beta))
            except (NoSignChange, NoRootInHorizon, NoReturn):
                continue
            tol = ctx.mpf(10) ** (-(dps // 2))
            if abs(lift(k, a_hp, p) - 3 * ctx.pi / 2) > tol or abs(lift(k, b_hp, p) - hp_ph.t2) > tol:
                continue  # a hidden jump inside the bracket
            lo_hp, hi_hp = (a_hp, b_hp) if a_hp < b_hp else (b_hp, a_hp)
            found.append(Branch(lo_hp, hi_hp, k, zl, zr, decreasing=decreasing))
    if not found:
        return "no monotone run of the lift crosses a window [t2, 3*pi/2] + 2*pi*k"
    return sorted(found, key=lambda br: br.lo)


def find_covering_pair(
    p: Params,
    segment: tuple[float, float] | None = None,
    n_scan: int = 2000,
    n_branch: int = 400,
    dps: int = HP_DPS,
    disc: DiscontinuitySet | None = None,
) -> CoveringPair:
    """Two disjoint segments J0, J1 in [t2, 3*pi/2] with T(Ji) = [t2, 3*pi/2].

    Continuity branches are the pieces of ``segment`` (default: the whole of
    [t2, 3*pi/2]) cut at the jumps of T1.  On each branch the lift of T is
    sampled, and every monotone pass through a window [t2, 3*pi/2] + 2*pi*k
    gives a covering segment whose end points are solved in extended
    precision.  The two leftmost segments are returned.
    """
    ph = derived_phases(p)
    if segment is None:
        segment = (ph.t2 + 1e-9, TARGET_HI)
    diagnostics: dict = {"segment": list(segment), "regime": p.regime}
    if not p.standard:
        diagnostics["reason"] = "parameters outside the standard regime"
    lemma1 = check_lemma1(p)
    diagnostics["lemma1_margin"] = lemma1.margin
    if disc is None:
        disc = find_discontinuities(segment, n_scan, p)
    zs = disc.zs
    diagnostics["discontinuities"] = len(zs)
    found: list[Branch] = []
    rejected = []
    edges = [float(segment[0]), *zs, float(segment[1])]
    for zl, zr in zip(edges[:-1], edges[1:]):
        res = _branch_segments(zl, zr, p, dps, n_branch)
        if isinstance(res, str):
            rejected.append({"branch": [zl, zr], "reason": res})
            continue
        found.extend(res)
        if len(found) >= 2:
            break
    diagnostics["rejected_branches"] = rejected
    if len(found) < 2:
        raise CoveringNotFound(
            f"found {len(found)} covering segment(s) among {len(zs) + 1} continuity branches", diagnostics
        )
    return CoveringPair(found[0], found[1], (ph.t2, TARGET_HI), disc)


@dataclass(frozen=True)
class CoveringCertificate:
    n_targets: int
    max_error: tuple[float, float]
    passed: bool
    tolerance: float


def certify_covering(cover: CoveringPair, p: Params, n_targets: int = 1000, tol: float = 1e-8) -> CoveringCertificate:
    """For ``n_targets`` equally spaced y in [t2, 3*pi/2], find theta in each
    Ji with |T(theta) - y| < tol."""
    t2, t_hi = cover.target
    targets = np.linspace(t2, t_hi, n_targets)
    worst = []
    for J in (cover.J0, cover.J1):
        lo, hi = J.bounds
        grid = np.linspace(lo, hi, max(65, n_targets // 8))
        lifted = np.array([float(lift(J.cycle, float(x), p)) for x in grid])
        if J.decreasing:
            g_asc, l_asc = grid[::-1], lifted[::-1]
        else:
            g_asc, l_asc = grid, lifted
        err = 0.0
        for y in targets:
            k = int(np.clip(np.searchsorted(l_asc, y), 1, len(l_asc) - 1))
            a, b = g_asc[k - 1], g_asc[k]
            fa, fb = l_asc[k - 1] - y, l_asc[k] - y
            if fa == 0.0:
                x = a
            elif fb == 0.0:
                x = b
            elif (fa > 0) == (fb > 0):
                # target at an end of the range, lost to rounding of the float bounds
                x = a if abs(fa) < abs(fb) else b
            else:
                x = _inverse(lambda s: float(lift(J.cycle, s, p)) - y, a, b, fa, fb)
            x = min(max(x, lo), hi)
            err = max(err, abs(float(return_T(x, p).theta_out) - y))
        worst.append(err)
    return CoveringCertificate(n_targets, (worst[0], worst[1]), max(worst) < tol, tol)


# --- Symbol words ---

@dataclass(frozen=True)
class SymbolWord:
    symbols: tuple[int, ...]

    def __post_init__(self):
        syms = tuple(int(s) for s in self.symbols)
        if any(s not in (0, 1) for s in syms):
            raise ValueError("symbols must be 0 or 1")
        object.__setattr__(self, "symbols", syms)

    @classmethod
    def parse(cls, text: str) -> "SymbolWord":
        text = text.strip()
        if not text or any(ch not in "01" for ch in text):
            raise ValueError(f"not a binary word: {text!r}")
        return cls(tuple(int(ch) for ch in text))

    def __len__(self) -> int:
        return len(self.symbols)

    def __str__(self) -> str:
        return "".join(map(str, self.symbols))

    def shift(self) -> "SymbolWord":
        return SymbolWord(self.symbols[1:])


@dataclass(frozen=True)
class Escape:
    """The orbit leaves J0 u J1 at step ``j``; ``prefix`` holds the symbols before."""

    j: int
    prefix: SymbolWord


def symbol_distance(s1: SymbolWord, s2: SymbolWord) -> float:
    """Partial sum of sum_k 2^-k |s1_k - s2_k| over the common length."""
    if len(s1) != len(s2):
        raise LengthMismatch(f"word lengths differ: {len(s1)} != {len(s2)}")
    return math.fsum(math.ldexp(1.0, -k) for k, (x, y) in enumerate(zip(s1.symbols, s2.symbols)) if x != y)


def _as_word(word) -> SymbolWord:
    if isinstance(word, SymbolWord):
        return word
    if isinstance(word, str):
        return SymbolWord.parse(word)
    return SymbolWord(tuple(word))


def itinerary(p0, k: int, cover: CoveringPair, p: Params) -> SymbolWord | Escape:
    """Symbols of p0, T(p0), ..., T^(k-1)(p0) with respect to (J0, J1)."""
    if k < 1:
        raise ValueError("k must be positive")
    x = p0
    out: list[int] = []
    for j in range(k):
        s = cover.symbol_of(x)
        if s is None:
            return Escape(j, SymbolWord(tuple(out)))
        out.append(s)
        if j < k - 1:
            x = return_T(x, p).theta_out
    return SymbolWord(tuple(out))


class ShadowBuilder:
    """Nested intervals for symbol words, built backwards through the inverse
    branches and cached by word suffix (suffixes are shared between words)."""

    def __init__(self, cover: CoveringPair, p: Params):
        self.cover = cover
        self.p = p
        self._preimages: dict = {}
        self._intervals: dict = {}
        self._tables: dict = {}

    def _table(self, symbol: int):
        """Lift sampled in doubles on J_symbol, ordered by increasing value."""
        if symbol not in self._tables:
            J = self.cover.branch(symbol)
            lo, hi = J.bounds
            xs = np.linspace(lo, hi, 129)
            ls = np.array([float(lift(J.cycle, float(x), self.p)) for x in xs])
            order = np.argsort(ls)
            self._tables[symbol] = (xs[order], ls[order])
        return self._tables[symbol]

    def _guess(self, symbol: int, y) -> float:
        J = self.cover.branch(symbol)
        xs, ls = self._table(symbol)
        yf = float(y)
        k = int(np.clip(np.searchsorted(ls, yf), 1, len(ls) - 1))
        fa, fb = ls[k - 1] - yf, ls[k] - yf
        if (fa > 0) == (fb > 0):
            return float(xs[k - 1] if abs(fa) < abs(fb) else xs[k])
        return _inverse(lambda t: float(lift(J.cycle, t, self.p)) - yf, xs[k - 1], xs[k], fa, fb)

    def preimage(self, symbol: int, y):
        """The theta in J_symbol with T(theta) = y (y in [t2, 3*pi/2])."""
        key = (symbol, y)
        if key not in self._preimages:
            J = self.cover.branch(symbol)
            ctx = J.lo.context
            guess = ctx.mpf(self._guess(symbol, y))
            self._preimages[key] = _hp_root(lambda t: lift(J.cycle, t, self.p) - y, J.lo, J.hi, guess)
        return self._preimages[key]

    def interval(self, word) -> tuple:
        word = _as_word(word)
        if len(word) < 1:
            raise ValueError("word must be non-empty")
        syms = word.symbols
        if syms in self._intervals:
            return self._intervals[syms]
        if len(syms) == 1:
            J = self.cover.branch(syms[0])
            res = (J.lo, J.hi)
        else:
            lo, hi = self.interval(SymbolWord(syms[1:]))
            a, b = self.preimage(syms[0], lo), self.preimage(syms[0], hi)
            res = (a, b) if a <= b else (b, a)
        self._intervals[syms] = res
        return res


def shadow_point(word, cover: CoveringPair, p: Params, builder: ShadowBuilder | None = None) -> tuple:
    """Interval [lo, hi] (extended precision) of points whose first len(word)
    symbols are ``word``."""
    builder = builder or ShadowBuilder(cover, p)
    return builder.interval(word)


# --- Periodic points ---

@dataclass(frozen=True)
class PeriodicOrbit:
    p: object
    m: int
    word: SymbolWord
    residual: float
    orbit: tuple = field(default=(), compare=False)
    minimal: bool = True
    itinerary_ok: bool = True
    separation: float = math.inf  # min_j |T^j(p) - p| over 1 <= j < m

    def certified(self, tol_orbit: float = TOL_ORBIT) -> bool:
        return self.residual < tol_orbit and self.minimal and self.itinerary_ok


def default_word(m: int) -> SymbolWord:
    """0...01: m - 1 zeros then a one."""
    if m < 1:
        raise ValueError("period must be positive")
    return SymbolWord((0,) * (m - 1) + (1,))


def periodic_point(
    m: int,
    cover: CoveringPair,
    p: Params,
    word=None,
    builder: ShadowBuilder | None = None,
) -> PeriodicOrbit:
    """Point of period m with itinerary ``word`` repeated (default 0...01).

    T^m maps the shadow interval I of the word onto [t2, 3*pi/2], which
    contains I, so T^m(x) - x changes sign on I; the composed lifts are
    smooth there and the root is found by bracketing.
    """
    word = default_word(m) if word is None else _as_word(word)
    if len(word) != m:
        raise LengthMismatch(f"word length {len(word)} != period {m}")
    builder = builder or ShadowBuilder(cover, p)
    lo, hi = builder.interval(word)
    cycles = [cover.branch(s).cycle for s in word.symbols]

    def f(x):
        y = x
        for c in cycles:
            y = lift(c, y, p)
        return y - x

    flo, fhi = f(lo), f(hi)
    if (flo > 0) == (fhi > 0):
        raise NoSignChange(f"T^{m}(x) - x has one sign on [{lo}, {hi}]: {float(flo)}, {float(fhi)}")
    x0 = _hp_root(f, lo, hi)

    orbit = [x0]
    x = x0
    for _ in range(m):
        x = return_T(x, p).theta_out
        orbit.append(x)
    residual = float(abs(orbit[m] - x0))
    separation = min((float(abs(orbit[j] - x0)) for j in range(1, m)), default=math.inf)
    floor = 10.0 ** -(x0.context.dps - 10)
    got = itinerary(x0, m, cover, p)
    itinerary_ok = isinstance(got, SymbolWord) and got == word
    minimal = itinerary_ok and is_primitive(word) and separation > 10 * max(residual, floor)
    return PeriodicOrbit(
        p=x0,
        m=m,
        word=word,
        residual=residual,
        orbit=tuple(orbit[:m]),
        minimal=minimal,
        itinerary_ok=itinerary_ok,
        separation=separation,
    )


def is_primitive(word: SymbolWord) -> bool:
    """True when the word is not a power of a shorter word, so a point with
    this periodic itinerary cannot have a smaller period."""
    syms = _as_word(word).symbols
    m = len(syms)
    return all(syms != syms[d:] + syms[:d] for d in range(1, m) if m % d == 0)


# --- Superstability of t2 ---

@dataclass(frozen=True)
class SuperstableReport:
    condition21: bool
    condition22: bool
    robust: bool
    theta1: float
    theta2: float
    theta2_phase: float
    impact_velocity: float
    stop_derivative: float
    epsilon_est: float
    lemma1_holds: bool

    @property
    def superstable(self) -> bool:
        """An inclusion holds and a right neighbourhood of t2 was certified."""
        return (self.condition21 or self.condition22) and self.epsilon_est > 0.0


def _constant_t2(lo: float, eps: float, p: Params, n: int, t2: float) -> bool:
    xs = lo + eps * (np.arange(1, n + 1) / (n + 1))
    for x in xs:
        try:
            if abs(float(return_T(float(x), p).theta_out) - t2) > 1e-12:
                return False
        except (NoReturn, NoRootInHorizon):
            return False
    return True


def superstable_check(
    p: Params,
    eps_start: float = 1e-6,
    n_samples: int = 20,
    n_verify: int = 100,
    tol: float = 1e-9,
) -> SuperstableReport:
    """Is t2 a superstable fixed point of T?

    theta1 = T1(t2) and theta2 is the end of the progression that follows.
    Inclusion (t1, t2) or (t3, 2*pi) u [0, t0) for theta2 mod 2*pi makes a
    right neighbourhood of t2 map onto t2.  The width of that neighbourhood is
    estimated by doubling from ``eps_start`` while T is t2 at ``n_samples``
    interior points, bisecting the boundary, and finally shrinking until
    ``n_verify`` samples agree.
    """
    ph = derived_phases(p)
    t2 = ph.t2
    hit = next_hit_T1(t2, p)
    theta1 = float(hit.theta1)
    v1 = float(eval_G1_dt(t2, theta1, p))
    theta2 = float(progression_stop(t2, theta1, p))
    r2 = float(snap_phase(theta2, ph))
    cond21 = ph.t1 < r2 < ph.t2
    cond22 = ph.t3 < r2 or r2 < ph.t0
    dstop = float(force(theta2, p)) - p.q
    robust = abs(v1) > tol * p.a and abs(dstop) > tol * p.a

    eps = 0.0
    if cond21 or cond22:
        limit = ph.t3 - t2
        good, bad = 0.0, None
        e = eps_start
        while e < limit:
            if _constant_t2(t2, e, p, n_samples, t2):
                good = e
                e *= 2.0
            else:
                bad = e
                break
        if bad is None:
            bad = limit
        if good > 0.0:
            for _ in range(40):
                if bad - good <= 1e-3 * good:
                    break
                mid = 0.5 * (good + bad)
                if _constant_t2(t2, mid, p, n_samples, t2):
                    good = mid
                else:
                    bad = mid
            eps = good
            while eps > 0.0 and not _constant_t2(t2, eps, p, n_verify, t2):
                eps *= 0.5
                if eps < eps_start * 1e-6:
                    eps = 0.0
    return SuperstableReport(cond21, cond22, robust, theta1, theta2, r2, v1, dstop, eps, check_lemma1(p).holds)


def superstable_search(a: float, bs: Sequence[float], qs: Sequence[float], **kwargs) -> list[tuple[Params, SuperstableReport]]:
    """All (b, q) grid cells where t2 is superstable (inclusion plus a
    certified neighbourhood)."""
    out = []
    for b in bs:
        for q in qs:
            try:
                p = Params(a, b, q)
                derived_phases(p)
            except ValueError:
                continue
            try:
                rep = superstable_check(p, **kwargs)
            except (NoRootInHorizon, NoReturn, ValueError):
                continue
            if rep.superstable:
                out.append((p, rep))
    return out


__all__ = [
    "Branch",
    "CoveringCertificate",
    "CoveringNotFound",
    "CoveringPair",
    "Discontinuity",
    "DiscontinuitySet",
    "Escape",
    "HP_DPS",
    "L0",
    "L2",
    "LengthMismatch",
    "NoSignChange",
    "PeriodicOrbit",
    "ScanTooCoarse",
    "ShadowBuilder",
    "SuperstableReport",
    "SymbolWord",
    "TARGET_HI",
    "TOL_ORBIT",
    "arc_L1",
    "certify_covering",
    "default_word",
    "find_covering_pair",
    "find_discontinuities",
    "itinerary",
    "lift",
    "monotone_between",
    "is_primitive",
    "periodic_point",
    "shadow_point",
    "superstable_check",
    "superstable_search",
    "symbol_distance",
    "tangency_residual",
]
