# src/cli.py
# Command-line front end: one subcommand per family of checks.
#
# Map:
#   [CL-1] argument parsing (+ --config files, flags win)
#   [CL-2] subcommand handlers -> (payload, checks)
#   [CL-3] output (json / csv), manifests, exit codes
from __future__ import annotations

import argparse
import random
import sys
import time
from datetime import datetime
from pathlib import Path

import orjson
import pandas as pd
from sympy import isprime

from . import __version__
from .config import SEED, read_run_file
from .errors import CheckFailed, InternalError, InvalidParameter, KZError

SUBCOMMANDS = ("qsol", "verify-kz", "limit-check", "gm-check", "pairing", "hasse-witt", "cartier-map",
               "unit-root-check", "cartier", "p-curvature", "local-solve", "report")


# ---------------- [CL-1] parsing ----------------
def _odd_prime(v: str) -> int:
    try:
        p = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{v!r} is not an integer")
    if p == 2 or not isprime(p):
        raise argparse.ArgumentTypeError(f"{p} is not an odd prime")
    return p


def _positive(v: str) -> int:
    try:
        k = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{v!r} is not an integer")
    if k < 1:
        raise argparse.ArgumentTypeError(f"{k} must be >= 1")
    return k


def _point(v: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in v.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"{v!r} is not a comma-separated list of integers")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=_odd_prime)
    common.add_argument("--s", type=_positive)
    common.add_argument("--g", type=_positive)
    common.add_argument("--point", "--at", dest="point", type=_point)
    common.add_argument("--samples", type=_positive)
    common.add_argument("--degree", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--config", help="key-value file mirroring the long flags")
    common.add_argument("--quiet", action="store_true")
    common.add_argument("--no-store", action="store_true", help="do not append the run to the history DB")

    ap = argparse.ArgumentParser(prog="kzpadic", description="p-adic KZ / hyperelliptic crystal checks")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "p-curvature":
            sp.add_argument("--connection", choices=("kz", "gm"))
        if name == "cartier":
            sp.add_argument("--iterate", type=_positive)
            sp.add_argument("--input", help="JSON file with the components of a closed 1-form")
            sp.add_argument("--vars", type=_positive)
        if name == "local-solve":
            sp.add_argument("--match", action="store_true")
    return ap


DEFAULTS = {"s": 1, "g": 1, "samples": 3, "format": "json", "connection": "kz", "iterate": 1, "vars": 2}
INT_KEYS = {"p", "s", "g", "samples", "degree", "seed", "iterate", "vars"}


def resolve_args(ns: argparse.Namespace) -> dict:
    """Merge --config values under the command-line flags, then defaults."""
    args = {k: v for k, v in vars(ns).items() if v is not None}
    if ns.config:
        try:
            values = read_run_file(ns.config)
        except FileNotFoundError as e:
            raise InvalidParameter(str(e)) from None
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key in args or key == "sigma":
                continue
            if key in INT_KEYS:
                args.setdefault(key, int(raw))
            elif key == "point":
                args.setdefault(key, _point(raw))
            else:
                args.setdefault(key, raw)
    for k, v in DEFAULTS.items():
        args.setdefault(k, v)
    args.setdefault("seed", SEED)
    if args["format"] not in ("json", "csv"):
        raise InvalidParameter(f"unknown format {args['format']!r}")
    if "p" in args and (args["p"] == 2 or not isprime(int(args["p"]))):
        raise InvalidParameter(f"{args['p']} is not an odd prime")
    return args


def _need(args: dict, *keys: str) -> None:
    missing = [k for k in keys if args.get(k) is None]
    if missing:
        raise InvalidParameter(f"missing --{', --'.join(missing)}")


def _points(args: dict) -> list[tuple[int, ...]]:
    from .crystalmap import sample_ordinary_points

    if args.get("point"):
        return [tuple(args["point"])]
    return sample_ordinary_points(args["p"], args["g"], args["samples"], args["seed"])


def _sigma(args: dict) -> int:
    """Measure σ once per run; the value is carried in args and the payload."""
    if args.get("sigma") is None:
        from .suite import measured_sigma

        args["sigma"] = measured_sigma(args["g"], args["seed"], args["quiet"])["sigma"]
    return args["sigma"]


def _check(name: str, r: dict, modulus: str | None = None, degree: int | None = None) -> dict:
    return {"name": name, "pass": bool(r["pass"]), "modulus": modulus, "degree": degree, "detail": r}


# ---------------- [CL-2] handlers ----------------
def cmd_qsol(args: dict) -> tuple[dict, list[dict]]:
    from .exactring import to_json_obj
    from .hypersol import q_solutions

    _need(args, "p", "s", "g")
    p, s, g = args["p"], args["s"], args["g"]
    sol = q_solutions(p, s, g, point=args.get("point"), quiet=args["quiet"])
    out = {"p": p, "s": s, "g": g, "modulus": f"{p}^{s}", "meta": sol.meta}
    if sol.point is not None:
        out["point"] = list(sol.point)
        out["matrix"] = sol.matrix()
    else:
        out["solutions"] = [[to_json_obj(e) for e in v] for v in sol.vectors]
    return out, []


def cmd_verify_kz(args: dict):
    from .hypersol import verify_thm_v2

    _need(args, "p", "s", "g")
    r = verify_thm_v2(args["p"], args["s"], args["g"], points=_points(args), quiet=args["quiet"])
    return r, [_check("kz_residuals", r, f"{args['p']}^{args['s']}")]


def cmd_limit_check(args: dict):
    from .hypersol import limit_consistency

    _need(args, "p", "s", "g")
    r = limit_consistency(args["p"], args["s"], args["g"], _points(args))
    return r, [_check("limit_consistency", r, r["modulus"])]


def cmd_gm_check(args: dict):
    from .derham import duality_check, gm_identities, measure_sigma
    from .suite import rational_points

    g = args["g"]
    pts = [tuple(args["point"])] if args.get("point") else rational_points(g, args["samples"], args["seed"])
    sig = measure_sigma(g, pts, quiet=args["quiet"])
    ident = gm_identities(2 * g + 1)
    dual = duality_check(g, sig["sigma"])
    out = {"g": g, "sigma": sig["sigma"], "sigma_points": sig["points"], "identities": ident, "duality": dual}
    return out, [_check("gm_identities", ident), _check("duality", dual)]


def cmd_pairing(args: dict):
    from .derham import CurveData, lagrangian_survey, pairing_leibniz_check, poincare_pairing
    from .suite import rational_points

    _need(args, "p", "s", "g")
    p, s, g = args["p"], args["s"], args["g"]
    pts = _points(args)
    sigma = _sigma(args)
    lag = lagrangian_survey(p, s, g, pts)
    leib = pairing_leibniz_check(g, rational_points(g, 1, args["seed"]), sigma)
    P = poincare_pairing(CurveData(2 * g + 1, pts[0]))
    out = {"p": p, "s": s, "g": g, "modulus": f"{p}^{s}", "sigma": sigma, "lagrangian": lag, "leibniz": leib,
           "point": list(pts[0]), "matrix": P}
    checks = [_check("lagrangian", lag, f"{p}^{s}"),
              _check("pairing_leibniz", leib)]
    return out, checks


def cmd_hasse_witt(args: dict):
    from .crystalmap import det_certificate, hasse_witt, hasse_witt_at
    from .exactring import to_json_obj

    _need(args, "p", "g")
    p, g = args["p"], args["g"]
    if args.get("point"):
        A = [[x % p for x in row] for row in hasse_witt_at(p, g, args["point"])]
        return {"p": p, "g": g, "point": list(args["point"]), "modulus": f"{p}^1", "matrix": A}, []
    A = hasse_witt(p, g)
    cert = det_certificate(p, g, args["seed"])
    out = {"p": p, "g": g, "modulus": f"{p}^1",
           "entries": [[to_json_obj(e) for e in row] for row in A.reduce()], "certificate": cert}
    return out, [_check("det_certificate", cert, f"{p}^1")]


def cmd_cartier_map(args: dict):
    from .crystalmap import cartier_matrix_at, exact_forms_check

    _need(args, "p", "s", "g")
    p, s, g = args["p"], args["s"], args["g"]
    pt = _points(args)[0]
    C = cartier_matrix_at(p, s, g, pt)
    ex = exact_forms_check(p, s, g, pt)
    return ({"p": p, "s": s, "g": g, "point": list(pt), "modulus": f"{p}^{s}", "matrix": C, "exact_forms": ex},
            [_check("exact_forms", ex, f"{p}^{s}")])


def cmd_unit_root_check(args: dict):
    from .crystalmap import kernel_flatness, unit_root_check

    _need(args, "p", "s", "g")
    p, s, g = args["p"], args["s"], args["g"]
    r = unit_root_check(p, s, g, _points(args))
    checks = [_check("unit_root", r, f"{p}^{s}")]
    out = {"unit_root": r}
    if p ** s <= 49:
        out["sigma"] = _sigma(args)
        kf = kernel_flatness(p, s, g, out["sigma"], quiet=args["quiet"])
        out["kernel_flatness"] = kf
        checks.append(_check("kernel_flatness", kf, f"{p}^{s}"))
    return out, checks


def _read_form(path: str, p: int):
    from .cartierop import TruncOneForm
    from .exactring import series_from_json

    data = orjson.loads(Path(path).read_bytes())
    comps = data["components"] if isinstance(data, dict) else data
    return TruncOneForm.of([series_from_json(c, p) for c in comps])


def cmd_cartier(args: dict):
    from .cartierop import (dlog_fixed_point, iterate_cartier, lemma_cd_check, random_series,
                            random_witness, witness_form)
    from .exactring import to_json_obj

    _need(args, "p")
    p, s = args["p"], args["s"]
    if args.get("input"):
        eta = _read_form(args["input"], p)
        steps = iterate_cartier(eta, args["iterate"])
        out = {"p": p, "cutoff": eta.cutoff, "steps": [
            {"certified_degree": st.cutoff, "components": [to_json_obj(c) for c in st.components],
             "zero": st.is_zero()} for st in steps]}
        return out, []
    rng = random.Random(args["seed"])
    n = args["vars"]
    cutoff = args.get("degree") or p ** (s + 1) + 1
    rows = []
    for _ in range(args["samples"]):
        w = random_witness(n, cutoff, p, s, rng)
        rows.append(lemma_cd_check(witness_form(w, s), s, w))
    dl = [dlog_fixed_point(random_series(n, 2 * p, p, 1, rng, unit=True)) for _ in range(args["samples"])]
    out = {"p": p, "s": s, "vars": n, "witnesses": rows, "dlog_fixed_point": dl}
    deg = rows[0]["certified_degrees"][-1] if rows else None
    return out, [_check("lemma_cd", {"pass": all(r["pass"] for r in rows)}, f"{p}^1", deg),
                 _check("dlog_fixed_point", {"pass": all(dl)}, f"{p}^1")]


def cmd_p_curvature(args: dict):
    from .pcurvature import (annihilation_check, gm_connection, image_span_rank,
                             kodaira_spencer_check, kz_connection, p_curvature_at)

    _need(args, "p", "g")
    p, g = args["p"], args["g"]
    conn = kz_connection(p, g) if args["connection"] == "kz" else gm_connection(p, g, _sigma(args))
    if args.get("point"):
        pt = tuple(args["point"])
        mats = [p_curvature_at(conn, i, pt) for i in range(1, conn.n + 1)]
        out = {"p": p, "g": g, "connection": conn.kind, "point": list(pt), "modulus": f"{p}^1",
               "psi": mats, "matrix": mats[0]}
        if conn.kind == "gm":
            out["sigma"] = args["sigma"]
        return out, []
    pts = _points(args)
    ann = annihilation_check(p, g, points=pts, quiet=args["quiet"])
    sigma = _sigma(args)
    ranks = [image_span_rank(p, g, pt, sigma) for pt in pts]
    ks = [kodaira_spencer_check(p, g, pt, sigma) for pt in pts]
    out = {"p": p, "g": g, "sigma": sigma, "annihilation": ann, "image_ranks": ranks, "kodaira_spencer": ks}
    return out, [_check("annihilation", ann, f"{p}^1"),
                 _check("image_span_rank", {"pass": all(r == g for r in ranks), "ranks": ranks}, f"{p}^1"),
                 _check("kodaira_spencer", {"pass": all(r["pass"] for r in ks), "points": ks}, f"{p}^1")]


def cmd_local_solve(args: dict):
    from .localflat import BasePoint, integral_lattice, lattice_profile, match_hypergeometric
    from .suite import local_degree

    _need(args, "p", "s", "g")
    p, s, g = args["p"], args["s"], args["g"]
    a = BasePoint.of(_points(args)[0], p)
    N = local_degree(args)
    lat = integral_lattice(a, N, s, quiet=args["quiet"])
    profile = lattice_profile(a, s, sorted({max(1, N - p), N}))
    out = {"p": p, "s": s, "g": g, "point": list(a.coords), "degree": N, "modulus": f"{p}^{s}",
           "lattice": lat.to_dict(), "rank_profile": profile, "matrix": [list(v) for v in lat.vectors()]}
    checks = [_check("lattice_rank", {"pass": lat.rank == g, "rank": lat.rank}, f"{p}^{s}", N)]
    if args.get("match"):
        m = match_hypergeometric(a, s, N, quiet=args["quiet"])
        out["match"] = m
        checks.append(_check("quasi_constant_match", m, f"{p}^{s}", N))
    return out, checks


def cmd_report(args: dict):
    from . import suite

    _need(args, "p", "s", "g")
    params = {k: args[k] for k in ("p", "s", "g", "samples", "seed") if k in args}
    if args.get("degree"):
        params["degree"] = args["degree"]
    params["sigma"] = _sigma(args)
    results = suite.run(params, quiet=args["quiet"])
    return {"params": params, "sigma": params["sigma"], "checks": [r["name"] for r in results]}, results


HANDLERS = {
    "qsol": cmd_qsol, "verify-kz": cmd_verify_kz, "limit-check": cmd_limit_check, "gm-check": cmd_gm_check,
    "pairing": cmd_pairing, "hasse-witt": cmd_hasse_witt, "cartier-map": cmd_cartier_map,
    "unit-root-check": cmd_unit_root_check, "cartier": cmd_cartier, "p-curvature": cmd_p_curvature,
    "local-solve": cmd_local_solve, "report": cmd_report,
}


# ---------------- [CL-3] output ----------------
def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def render_csv(matrix) -> str:
    df = pd.DataFrame([[str(x) for x in row] for row in matrix])
    df.columns = [f"c{j + 1}" for j in range(df.shape[1])]
    df.index = [f"r{i + 1}" for i in range(df.shape[0])]
    return df.to_csv()


def emit(payload: dict, fmt: str) -> None:
    from .exactring import dumps

    if fmt == "csv":
        result = payload.get("result", payload)
        if "matrix" not in result:
            raise InvalidParameter("--format csv needs a subcommand with a matrix output (e.g. --point)")
        sys.stdout.write(render_csv(result["matrix"]))
    else:
        sys.stdout.write(dumps(payload, indent=True).decode() + "\n")
    sys.stdout.flush()


def _store(manifest: dict, quiet: bool) -> None:
    from .db import init_db, store_run

    try:
        run_id = store_run(manifest, init_db())
        if not quiet:
            print(f"[db] stored run {run_id}", file=sys.stderr, flush=True)
    except Exception as e:   # history is best-effort
        print(f"[db] WARN: {e}", file=sys.stderr, flush=True)


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    started = datetime.now().astimezone()
    t0 = time.perf_counter()
    quiet = bool(ns.quiet)
    if not quiet:
        print(f"[launcher] start {ns.command} {started.isoformat()}", file=sys.stderr, flush=True)
    args: dict = {"quiet": quiet}
    try:
        args = resolve_args(ns)
        payload, checks = HANDLERS[ns.command](args)
        verdict = "pass" if all(c["pass"] for c in checks) else "fail"
        code = 0 if verdict == "pass" else CheckFailed.exit_code
        report = {"tool_version": __version__, "subcommand": ns.command, "verdict": verdict,
                  "result": payload, "checks": checks}
        emit(_strip_timing(report), args["format"])
    except Exception as e:
        if not isinstance(e, KZError):
            e = InternalError(f"{type(e).__name__}: {e}")
        code = e.exit_code
        verdict = "error"
        checks = []
        payload = {"error": type(e).__name__, "message": str(e), "exit": code}
        sys.stdout.write(orjson.dumps(payload).decode() + "\n")
        print(f"[launcher] error {type(e).__name__}: {e}", file=sys.stderr, flush=True)
    wall = round(time.perf_counter() - t0, 3)
    manifest = {
        "tool_version": __version__, "started_at": started.isoformat(), "subcommand": ns.command,
        "params": {k: v for k, v in args.items() if k not in ("config", "quiet", "no_store", "command")},
        "sigma": payload.get("sigma"), "checks": checks, "verdict": verdict,
        "exit_code": code, "wall_seconds": wall,
    }
    if ns.command == "report" and verdict != "error":
        from . import report as report_mod

        out = report_mod.run(manifest)
        if not quiet:
            print(f"Report written to {out}", file=sys.stderr, flush=True)
    if not ns.no_store:
        _store(manifest, quiet)
    if not quiet:
        print(f"[launcher] done in {wall:.1f}s (exit {code})", file=sys.stderr, flush=True)
    return code


if __name__ == "__main__":
    sys.exit(main())
