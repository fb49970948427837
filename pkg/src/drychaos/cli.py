"""Command-line front end.

Every subcommand reads ``a``, ``b``, ``q`` from the ``[params]`` section of an
optional ``--config`` file and its own options from a section named after the
command; flags given on the command line win.  Results go to ``--out`` (or
stdout) as CSV or JSON.  Outputs carry a schema string and are deterministic
for a fixed configuration, including the seed of any random sampling.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable

import numpy as np

from . import analysis as an
from .dynamics import (
    H_SCAN,
    THETA0,
    TOL_GRAZE,
    TOL_ROOT,
    NoRootInHorizon,
    NoSuchPhase,
    Params,
    derived_phases,
    is_hp,
)
from .oracle import OracleConfig, oracle_return, oracle_return_detail
from .return_map import TOL_V, NoReturn, check_lemma1, next_hit_T1, return_T

SCHEMA_PREFIX = "drychaos"
SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    pass


# --- Config handling ---

# option name -> (type, default); shared by every command
COMMON = {
    "seed": (int, 0),
    "jobs": (int, 1),
    "format": (str, None),
}

OPTIONS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "phases": {},
    "return-map": {
        "n": (int, 1000),
        "lo": (float, None),
        "hi": (float, None),
        "check_fraction": (float, 0.01),
        "oracle_tol": (float, 1e-6),
    },
    "certify": {
        "m_max": (int, 8),
        "n_targets": (int, 1000),
        "n_words": (int, 20),
        "word_len": (int, 12),
        "n_semiconj": (int, 100),
        "semiconj_len": (int, 8),
        "n_scan": (int, 2000),
        "dps": (int, an.HP_DPS),
        "cover_tol": (float, 1e-8),
        "orbit_tol": (float, 1e-8),
    },
    "superstable": {
        "search": (bool, False),
        "b_min": (float, 0.001),
        "b_max": (float, 0.2),
        "n_b": (int, 20),
        "q_min": (float, 0.73),
        "q_max": (float, 0.99),
        "n_q": (int, 10),
        "verify": (int, 100),
        "eps_start": (float, 1e-6),
    },
    "sweep": {
        "b_min": (float, 1e-3),
        "b_max": (float, 0.2),
        "n_b": (int, 12),
        "q_values": (str, "0.8"),
        "n_scan": (int, 1000),
        "covering": (bool, True),
    },
    "validate": {
        "n": (int, 100),
        "dt": (float, 1e-4),
        "tol": (float, 1e-6),
    },
}


def _to_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _convert(kind, raw, name):
    try:
        if kind is bool:
            return _to_bool(raw)
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def resolve(args: argparse.Namespace) -> tuple[Params, dict]:
    """Merge built-in defaults, the config file and command-line flags."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    file_params = dict(parser["params"]) if parser.has_section("params") else {}
    section = dict(parser[args.command]) if parser.has_section(args.command) else {}

    values = {}
    for key in ("a", "b", "q"):
        raw = getattr(args, key)
        if raw is None:
            raw = file_params.get(key)
        if raw is None:
            raise ConfigError(f"parameter {key} not given (use --{key} or a [params] section)")
        values[key] = _convert(float, raw, key)
    try:
        params = Params(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    opts = {}
    for name, (kind, default) in {**COMMON, **OPTIONS[args.command]}.items():
        raw = getattr(args, name, None)
        if raw is None:
            raw = section.get(name, section.get(name.replace("_", "-")))
        opts[name] = default if raw is None else _convert(kind, raw, name)
    if opts["jobs"] < 1:
        raise ConfigError("jobs must be at least 1")
    for name, value in opts.items():
        if (name.startswith("n") or name.endswith("tol")) and isinstance(value, (int, float)) and not isinstance(value, bool):
            if value < 0:
                raise ConfigError(f"{name} must be non-negative")
    return params, opts


# --- Output ---

def fmt(x) -> str:
    """17 significant digits for doubles, full precision for mpmath numbers."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if is_hp(x):
        return x.context.nstr(x, x.context.dps, strip_zeros=False)
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def jsonable(obj):
    if obj is None or isinstance(obj, (str, bool, int)):
        return obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if is_hp(obj):
        return fmt(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return str(obj)


def schema(command: str) -> str:
    return f"{SCHEMA_PREFIX}/{command}/v{SCHEMA_VERSION}"


def params_dict(p: Params) -> dict:
    return {"a": p.a, "b": p.b, "q": p.q}


def render_json(command: str, p: Params, results, metadata: dict) -> str:
    doc = {
        "schema_version": schema(command),
        "params": params_dict(p),
        "results": results,
        "metadata": metadata,
    }
    return json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"


def render_csv(command: str, header: list[str], rows: Iterable[list]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={schema(command)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _metadata(opts: dict, extra: dict | None = None) -> dict:
    meta = {
        "seed": opts["seed"],
        "tolerances": {
            "tol_root": TOL_ROOT,
            "tol_graze": TOL_GRAZE,
            "tol_v": TOL_V,
            "h_scan": H_SCAN,
            "tol_orbit": an.TOL_ORBIT,
        },
    }
    if extra:
        meta.update(extra)
    return meta


def _pool_map(fn, items: list, jobs: int) -> list:
    """Ordered map, in worker processes when jobs > 1."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# --- phases ---

def cmd_phases(p: Params, opts: dict):
    result: dict[str, Any] = {
        "regime": p.regime,
        "standard": p.standard,
        "relaxed": p.relaxed,
        "c": p.c,
        "theta0": THETA0,
        "sin_theta0": math.sin(THETA0),
    }
    try:
        ph = derived_phases(p)
        result.update(t0=ph.t0, t1=ph.t1, t2=ph.t2, t3=ph.t3)
        lemma = check_lemma1(p)
        result.update(lemma1_holds=lemma.holds, lemma1_margin=lemma.margin, lemma1_sufficient_margin=lemma.sufficient_margin)
    except NoSuchPhase as exc:
        result["phases_error"] = str(exc)
    rows = [[k, v] for k, v in result.items()]
    return result, (["key", "value"], rows), EXIT_OK


# --- return-map ---

def _return_row(args):
    theta, p = args
    try:
        r = return_T(theta, p)
        t1 = float(r.theta1)
        return [theta, float(r.theta_out), r.scenario.value, float(r.delta_y), r.grazing, t1, ""]
    except (NoReturn, NoRootInHorizon, RuntimeError) as exc:
        return [theta, None, None, None, None, None, f"{type(exc).__name__}: {exc}"]


def cmd_return_map(p: Params, opts: dict):
    ph = derived_phases(p)
    lo = ph.t2 if opts["lo"] is None else opts["lo"]
    hi = ph.t3 if opts["hi"] is None else opts["hi"]
    if not ph.t2 <= lo < hi <= ph.t3:
        raise ConfigError("grid must satisfy t2 <= lo < hi <= t3")
    n = opts["n"]
    grid = [float(x) for x in np.linspace(lo, hi, n, endpoint=False)] if n > 0 else []
    rows = _pool_map(_return_row, [(x, p) for x in grid], opts["jobs"])

    # discontinuity-adjacent rows: neighbours whose first hits jump
    t1 = np.array([np.nan if r[5] is None else r[5] for r in rows])
    near = np.zeros(len(rows), dtype=bool)
    if len(rows) > 2:
        d = np.abs(np.diff(t1))
        finite = d[np.isfinite(d)]
        if finite.size:
            jumps = np.flatnonzero(d > 10 * np.median(finite))
            near[jumps] = True
            near[jumps + 1] = True

    rng = random.Random(opts["seed"])
    k = int(round(opts["check_fraction"] * len(rows)))
    picks = sorted(rng.sample(range(len(rows)), k)) if k else []
    cfg = OracleConfig()
    checks = {}
    for i in picks:
        if rows[i][1] is None:
            continue
        checks[i] = abs(oracle_return(rows[i][0], cfg, p) - rows[i][1])
    worst = max(checks.values(), default=0.0)

    header = ["theta", "theta_out", "scenario", "delta_y", "grazing", "near_discontinuity", "oracle_diff", "error"]
    table = [[r[0], r[1], r[2], r[3], r[4], bool(near[i]), checks.get(i), r[6]] for i, r in enumerate(rows)]
    results = {
        "rows": [dict(zip(header, row)) for row in table],
        "oracle_checks": len(checks),
        "oracle_max_diff": worst,
    }
    status = EXIT_OK if worst < opts["oracle_tol"] else EXIT_FAILED
    return results, (header, table), status


# --- certify ---

def _word_rows(words, cover, p, builder):
    out = []
    for w in words:
        lo, hi = an.shadow_point(w, cover, p, builder)
        mid = (lo + hi) / 2
        got = an.itinerary(mid, len(w), cover, p)
        out.append({
            "word": str(w),
            "interval": [lo, hi],
            "width": float(hi - lo),
            "itinerary": str(got) if isinstance(got, an.SymbolWord) else f"escape@{got.j}",
            "match": isinstance(got, an.SymbolWord) and got == w,
        })
    return out


def cmd_certify(p: Params, opts: dict):
    """Full chaos pipeline; stops at the first failing stage and names it."""
    stages: dict[str, Any] = {}
    results: dict[str, Any] = {"stages": stages, "passed": False, "failed_stage": None}

    def fail(stage: str, detail):
        stages[stage] = {"passed": False, "detail": detail}
        results["failed_stage"] = stage
        return results, _certify_table(results), EXIT_FAILED

    if not p.standard:
        return fail("params", f"parameters are in the {p.regime!r} regime, not the standard one")
    try:
        derived_phases(p)
    except NoSuchPhase as exc:
        return fail("params", str(exc))

    lemma = check_lemma1(p)
    # recorded up front, enforced once the constructive stages are through
    stages["lemma1"] = {"passed": lemma.holds, "margin": lemma.margin, "sufficient_margin": lemma.sufficient_margin}

    try:
        cover = an.find_covering_pair(p, n_scan=opts["n_scan"], dps=opts["dps"])
    except an.CoveringNotFound as exc:
        return fail("CoveringNotFound", {"message": str(exc), **exc.diagnostics})
    except an.ScanTooCoarse as exc:
        return fail("ScanTooCoarse", str(exc))
    disc = cover.discontinuities
    stages["discontinuities"] = {
        "passed": True,
        "segment": list(disc.segment),
        "count": len(disc),
        "points": disc.zs,
        "max_residual": max(disc.residuals, default=0.0),
    }
    J0, J1 = cover.J0, cover.J1
    disjoint = J0.hi < J1.lo or J1.hi < J0.lo
    stages["covering_pair"] = {
        "passed": disjoint,
        "J0": [J0.lo, J0.hi],
        "J1": [J1.lo, J1.hi],
        "target": list(cover.target),
    }
    if not disjoint:
        return fail("covering_pair", "J0 and J1 overlap")

    cert = an.certify_covering(cover, p, opts["n_targets"], opts["cover_tol"])
    stages["covering_certificate"] = {
        "passed": cert.passed,
        "n_targets": cert.n_targets,
        "max_error": list(cert.max_error),
        "tolerance": cert.tolerance,
    }
    if not cert.passed:
        return fail("covering_certificate", list(cert.max_error))

    builder = an.ShadowBuilder(cover, p)
    orbits = []
    for m in range(1, opts["m_max"] + 1):
        try:
            orb = an.periodic_point(m, cover, p, builder=builder)
        except an.NoSignChange as exc:
            return fail("periodic_orbits", f"m={m}: {exc}")
        orbits.append({
            "m": m,
            "word": str(orb.word),
            "p": orb.p,
            "residual": orb.residual,
            "separation": orb.separation,
            "minimal": orb.minimal,
            "itinerary_ok": orb.itinerary_ok,
        })
    orbits_ok = all(o["residual"] < opts["orbit_tol"] and o["minimal"] and o["itinerary_ok"] for o in orbits)
    stages["periodic_orbits"] = {"passed": orbits_ok, "orbits": orbits}
    if not orbits_ok:
        return fail("periodic_orbits", "residual, minimality or itinerary check failed")

    rng = random.Random(opts["seed"])
    words = [an.SymbolWord(tuple(rng.randrange(2) for _ in range(opts["word_len"]))) for _ in range(opts["n_words"])]
    shadows = _word_rows(words, cover, p, builder)
    shadows_ok = all(s["match"] for s in shadows)
    stages["shadow_words"] = {"passed": shadows_ok, "words": shadows}
    if not shadows_ok:
        return fail("shadow_words", "a shadow point does not realise its word")

    k = opts["semiconj_len"]
    checks = []
    for _ in range(opts["n_semiconj"]):
        w = an.SymbolWord(tuple(rng.randrange(2) for _ in range(k)))
        lo, hi = an.shadow_point(w, cover, p, builder)
        u = rng.random()
        x = lo + (hi - lo) * lo.context.mpf(u)
        it = an.itinerary(x, k, cover, p)
        it_img = an.itinerary(return_T(x, p).theta_out, k - 1, cover, p)
        ok = isinstance(it, an.SymbolWord) and isinstance(it_img, an.SymbolWord) and it_img == it.shift() and it == w
        checks.append(ok)
    semiconj_ok = all(checks)
    stages["semi_conjugacy"] = {"passed": semiconj_ok, "n_points": len(checks), "failures": checks.count(False), "word_len": k}
    if not semiconj_ok:
        return fail("semi_conjugacy", f"{checks.count(False)} of {len(checks)} points")

    if not lemma.holds:
        results["failed_stage"] = "lemma1"
        return results, _certify_table(results), EXIT_FAILED
    results["passed"] = True
    return results, _certify_table(results), EXIT_OK


def _certify_table(results: dict):
    rows = []
    for name, stage in results["stages"].items():
        detail = {k: v for k, v in stage.items() if k != "passed"}
        rows.append([name, stage["passed"], json.dumps(jsonable(detail), sort_keys=True)])
    return ["stage", "passed", "detail"], rows


# --- superstable ---

def _superstable_cell(args):
    p, eps_start = args
    try:
        derived_phases(p)
        rep = an.superstable_check(p, eps_start=eps_start)
    except (NoSuchPhase, NoRootInHorizon, NoReturn, ValueError, RuntimeError) as exc:
        return None, f"{type(exc).__name__}: {exc}"
    return rep, ""


def _report_dict(p: Params, rep: an.SuperstableReport) -> dict:
    return {
        "a": p.a,
        "b": p.b,
        "q": p.q,
        "regime": p.regime,
        "condition21": rep.condition21,
        "condition22": rep.condition22,
        "robust": rep.robust,
        "lemma1_holds": rep.lemma1_holds,
        "theta1": rep.theta1,
        "theta2": rep.theta2,
        "theta2_phase": rep.theta2_phase,
        "impact_velocity": rep.impact_velocity,
        "stop_derivative": rep.stop_derivative,
        "epsilon_est": rep.epsilon_est,
        "superstable": rep.superstable,
    }


def verify_bracket(p: Params, eps: float, n: int) -> int:
    """Number of oracle runs from (t2, t2 + eps) that do not return to t2."""
    if n <= 0 or eps <= 0:
        return 0
    ph = derived_phases(p)
    cfg = OracleConfig()
    xs = ph.t2 + eps * np.arange(1, n + 1) / (n + 1)
    return sum(abs(oracle_return(float(x), cfg, p) - ph.t2) > 1e-6 for x in xs)


def cmd_superstable(p: Params, opts: dict):
    if opts["search"]:
        bs = np.geomspace(opts["b_min"], opts["b_max"], opts["n_b"]) if opts["n_b"] > 0 else []
        qs = np.linspace(opts["q_min"], opts["q_max"], opts["n_q"]) if opts["n_q"] > 0 else []
        cells = []
        for b in bs:
            for q in qs:
                try:
                    cells.append(Params(p.a, float(b), float(q)))
                except ValueError:
                    continue
        reps = _pool_map(_superstable_cell, [(c, opts["eps_start"]) for c in cells], opts["jobs"])
        passing = [_report_dict(c, rep) for c, (rep, _) in zip(cells, reps) if rep is not None and rep.superstable]
        if passing and opts["verify"] > 0:
            first = passing[0]
            cell = Params(first["a"], first["b"], first["q"])
            first["oracle_failures"] = verify_bracket(cell, first["epsilon_est"], opts["verify"])
            first["oracle_checks"] = opts["verify"]
        results = {"cells": len(cells), "passing": passing}
        header = list(_report_dict(p, an.SuperstableReport(False, False, False, 0, 0, 0, 0, 0, 0, False)).keys())
        table = [[row[h] for h in header] for row in passing]
        status = EXIT_OK
        if passing and passing[0].get("oracle_failures", 0):
            status = EXIT_FAILED
        return results, (header, table), status

    rep, err = _superstable_cell((p, opts["eps_start"]))
    if rep is None:
        raise ConfigError(err)
    row = _report_dict(p, rep)
    if rep.superstable and opts["verify"] > 0:
        row["oracle_failures"] = verify_bracket(p, rep.epsilon_est, opts["verify"])
        row["oracle_checks"] = opts["verify"]
    status = EXIT_FAILED if row.get("oracle_failures", 0) else EXIT_OK
    return row, (list(row.keys()), [list(row.values())]), status


# --- sweep ---

SWEEP_REFINE = 4  # scans at n_scan, 2*n_scan, ... before giving up


def _sweep_row(args):
    p, n_scan, covering = args
    row: dict[str, Any] = {"a": p.a, "b": p.b, "q": p.q, "regime": p.regime}
    try:
        derived_phases(p)
    except NoSuchPhase as exc:
        row["status"] = f"NoSuchPhase: {exc}"
        return row
    lemma = check_lemma1(p)
    row["lemma1_holds"] = lemma.holds
    row["lemma1_margin"] = lemma.margin
    try:
        rep = an.superstable_check(p)
        row["condition21"] = rep.condition21
        row["condition22"] = rep.condition22
        row["superstable"] = rep.superstable
    except (NoRootInHorizon, NoReturn, RuntimeError) as exc:
        row["status"] = f"superstable: {type(exc).__name__}"
    if not covering or not p.standard:
        row.setdefault("status", "ok")
        return row
    try:
        ph = derived_phases(p)
        disc = None
        for attempt in range(SWEEP_REFINE):
            try:
                disc = an.find_discontinuities((ph.t2 + 1e-9, an.TARGET_HI), n_scan << attempt, p)
                break
            except an.ScanTooCoarse:
                if attempt == SWEEP_REFINE - 1:
                    raise
        row["discontinuities"] = len(disc)
        row["n_scan"] = disc.n_scan
        an.find_covering_pair(p, disc=disc)
        row["covering_found"] = True
    except an.CoveringNotFound:
        row["covering_found"] = False
    except (an.ScanTooCoarse, NoRootInHorizon, NoReturn, RuntimeError) as exc:
        row["covering_found"] = False
        row["status"] = f"covering: {type(exc).__name__}"
    row.setdefault("status", "ok")
    return row


SWEEP_HEADER = [
    "a", "b", "q", "regime", "lemma1_holds", "lemma1_margin", "discontinuities", "n_scan",
    "covering_found", "condition21", "condition22", "superstable", "status",
]


def cmd_sweep(p: Params, opts: dict):
    if opts["b_min"] <= 0 or opts["b_max"] < opts["b_min"]:
        raise ConfigError("sweep needs 0 < b_min <= b_max")
    qs = [float(x) for x in str(opts["q_values"]).replace(",", " ").split()]
    if opts["n_b"] < 1 or not qs:
        raise ConfigError("sweep ranges must be non-empty")
    bs = np.geomspace(opts["b_min"], opts["b_max"], opts["n_b"])
    items = []
    for q in qs:
        for b in bs:
            try:
                items.append((Params(p.a, float(b), q), opts["n_scan"], opts["covering"]))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
    rows = _pool_map(_sweep_row, items, opts["jobs"])
    thresholds = {}
    for q in qs:
        ok = [r["b"] for r in rows if r["q"] == q and r.get("covering_found")]
        thresholds[repr(q)] = max(ok) if ok else None
    table = [[r.get(h) for h in SWEEP_HEADER] for r in rows]
    return {"rows": rows, "covering_threshold_b": thresholds}, (SWEEP_HEADER, table), EXIT_OK


# --- validate ---

def cmd_validate(p: Params, opts: dict):
    ph = derived_phases(p)
    rng = random.Random(opts["seed"])
    cfg = OracleConfig(dt=opts["dt"])
    rows = []
    for _ in range(opts["n"]):
        theta = rng.uniform(ph.t2, ph.t3)
        r = return_T(theta, p)
        o = oracle_return_detail(theta, cfg, p)
        diff = abs(float(r.theta_out) - o.theta_out)
        rows.append([theta, float(r.theta_out), o.theta_out, diff, r.scenario.value, o.scenario.value,
                     diff < opts["tol"] and r.scenario == o.scenario])
    hit = next_hit_T1(ph.t2, p)
    header = ["theta", "theta_out", "oracle_theta_out", "diff", "scenario", "oracle_scenario", "agree"]
    results = {
        "rows": [dict(zip(header, row)) for row in rows],
        "max_diff": max((row[3] for row in rows), default=0.0),
        "disagreements": sum(not row[6] for row in rows),
        "first_hit_from_t2": float(hit.theta1),
    }
    status = EXIT_OK if results["disagreements"] == 0 else EXIT_FAILED
    return results, (header, rows), status


COMMANDS = {
    "phases": cmd_phases,
    "return-map": cmd_return_map,
    "certify": cmd_certify,
    "superstable": cmd_superstable,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}

DEFAULT_FORMAT = {
    "phases": "json",
    "return-map": "csv",
    "certify": "json",
    "superstable": "json",
    "sweep": "csv",
    "validate": "json",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drychaos", description="Return-map analysis of a forced mass with a dry-friction delimiter.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key=value file with [params] and [%s] sections" % name)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=["csv", "json"], default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--timings", action="store_true", help="record wall-clock time in the metadata (breaks byte-identical output)")
        sp.add_argument("-a", type=str, default=None)
        sp.add_argument("-b", type=str, default=None)
        sp.add_argument("-q", type=str, default=None)
        for opt, (kind, _default) in OPTIONS[name].items():
            flag = "--" + opt.replace("_", "-")
            if kind is bool:
                sp.add_argument(flag, dest=opt, type=_to_bool, default=None, metavar="BOOL")
            else:
                sp.add_argument(flag, dest=opt, type=kind, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        params, opts = resolve(args)
        results, (header, rows), status = COMMANDS[args.command](params, opts)
    except (ConfigError, NoSuchPhase) as exc:
        print(f"drychaos {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    fmt_name = opts["format"] or DEFAULT_FORMAT[args.command]
    if fmt_name == "json":
        extra = {"command": args.command, "options": {k: v for k, v in opts.items() if k not in ("format", "jobs")}}
        if args.timings:
            extra["timings"] = {"wall_seconds": time.perf_counter() - started}
        text = render_json(args.command, params, results, _metadata(opts, extra))
    else:
        text = render_csv(args.command, header, rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if status != EXIT_OK:
        failed = results.get("failed_stage") if isinstance(results, dict) else None
        msg = f"failed stage: {failed}" if failed else "checks failed"
        print(f"drychaos {args.command}: {msg}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
