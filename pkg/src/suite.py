# src/suite.py
# Acceptance suite: a fixed registry of checks run for one (p, s, g).
#
# Map:
#   [SU-1] sampling helpers
#   [SU-2] checks (one function per registry entry)
#   [SU-3] registry + run()
from __future__ import annotations

import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

from .config import SEED, SUITE, WORKERS
from .errors import InvalidParameter, KZError


def _log(msg: str, quiet: bool = False) -> None:
    if not quiet:
        print(f"[suite] {msg}", file=sys.stderr, flush=True)


# ---------------- [SU-1] sampling ----------------
def rational_points(g: int, count: int, seed: int) -> list[tuple[int, ...]]:
    """Distinct integer points for checks over Q (no residue condition)."""
    rng = random.Random(seed)
    n = 2 * g + 1
    return [tuple(rng.sample(range(-12, 13), n)) for _ in range(count)]


def ordinary_points(params: dict, count: int | None = None) -> list[tuple[int, ...]]:
    from .crystalmap import sample_ordinary_points

    return sample_ordinary_points(params["p"], params["g"], count or params["samples"], params["seed"])


def measured_sigma(g: int, seed: int, quiet: bool = True) -> dict:
    """σ measured once by differentiation at two seeded rational points."""
    from .derham import measure_sigma

    return measure_sigma(g, rational_points(g, 2, seed), quiet)


def _result(name: str, passed: bool, detail: dict, modulus: str | None = None,
            degree: int | None = None) -> dict:
    return {"name": name, "pass": bool(passed), "modulus": modulus, "degree": degree, "detail": detail}


# ---------------- [SU-2] checks ----------------
DLOG_SERIES = 50


def check_kz_residuals(params: dict) -> dict:
    from .hypersol import verify_thm_v2

    p, s, g = params["p"], params["s"], params["g"]
    r = verify_thm_v2(p, s, g, points=ordinary_points(params))
    return _result("kz_residuals", r["pass"], r, f"{p}^{s}")


def check_limit(params: dict) -> dict:
    from .hypersol import limit_consistency

    p, s, g = params["p"], params["s"], params["g"]
    r = limit_consistency(p, s, g, ordinary_points(params))
    return _result("limit_consistency", r["pass"], r, f"{p}^{s}")


def check_hasse_witt(params: dict) -> dict:
    from .crystalmap import det_certificate, hasse_witt, hasse_witt_at

    p, g = params["p"], params["g"]
    A = hasse_witt(p, g)
    pts = ordinary_points(params)
    agree = all(
        [[x % p for x in row] for row in A.at(pt)] == [[x % p for x in row] for row in hasse_witt_at(p, g, pt)]
        for pt in pts)
    cert = det_certificate(p, g, params["seed"])
    return _result("hasse_witt", agree and cert["pass"],
                   {"points": [list(pt) for pt in pts], "symbolic_matches_points": agree,
                    "certificate": cert}, f"{p}^1")


def check_unit_root(params: dict) -> dict:
    from .crystalmap import unit_root_check

    p, s, g = params["p"], params["s"], params["g"]
    r = unit_root_check(p, s, g, ordinary_points(params))
    return _result("unit_root", r["pass"], r, f"{p}^{s}")


def check_kernel_flatness(params: dict) -> dict:
    from .crystalmap import kernel_flatness

    p, s, g = params["p"], params["s"], params["g"]
    r = kernel_flatness(p, s, g, sigma=params["sigma"])
    return _result("kernel_flatness", r["pass"], r, f"{p}^{s}")


def check_gauss_manin(params: dict) -> dict:
    from .derham import duality_check, gm_identities

    g = params["g"]
    ident = gm_identities(2 * g + 1)
    dual = duality_check(g, params["sigma"])
    return _result("gauss_manin", ident["pass"] and dual["pass"],
                   {"sigma": params["sigma"], "identities": ident, "duality": dual})


def check_pairing(params: dict) -> dict:
    from .derham import lagrangian_survey, pairing_leibniz_check

    p, s, g = params["p"], params["s"], params["g"]
    lag = lagrangian_survey(p, s, g, ordinary_points(params))
    leib = pairing_leibniz_check(g, rational_points(g, 1, params["seed"]), params["sigma"])
    return _result("pairing", lag["pass"] and leib["pass"],
                   {"lagrangian": lag, "leibniz": leib}, f"{p}^{s}")


def check_lemma_cd(params: dict) -> dict:
    from .cartierop import lemma_cd_check, random_witness, witness_form

    p, s = params["p"], params["s"]
    nvars = 2 if p ** (s + 1) <= 125 else 1
    cutoff = p ** (s + 1) + 1
    rng = random.Random(params["seed"])
    rows = []
    for _ in range(params["samples"]):
        w = random_witness(nvars, cutoff, p, s, rng)
        r = lemma_cd_check(witness_form(w, s), s, w)
        rows.append({"certified_degrees": r["certified_degrees"], "pass": r["pass"]})
    return _result("lemma_cd", all(r["pass"] for r in rows), {"vars": nvars, "cutoff": cutoff, "samples": rows},
                   f"{p}^1", rows[0]["certified_degrees"][-1] if rows else None)


def check_dlog(params: dict) -> dict:
    from .cartierop import dlog_fixed_point, random_series

    p = params["p"]
    rng = random.Random(params["seed"])
    cutoff = 2 * p
    ok = [dlog_fixed_point(random_series(2, cutoff, p, 1, rng, unit=True)) for _ in range(DLOG_SERIES)]
    return _result("dlog_fixed_point", all(ok), {"cutoff": cutoff, "results": ok}, f"{p}^1", (cutoff - p) // p)


def check_p_curvature(params: dict) -> dict:
    from .exactring import DiagRational, z_vars
    from .pcurvature import (annihilation_check, image_span_rank, p_curvature,
                             scalar_connection)

    p, g = params["p"], params["g"]
    pts = ordinary_points(params)
    ann = annihilation_check(p, g, points=pts)
    ranks = [image_span_rank(p, g, pt, params["sigma"]) for pt in pts]
    wilson = scalar_connection(p, 2, [DiagRational.inv_diff(1, 2, z_vars(2), p),
                                       DiagRational.inv_diff(2, 1, z_vars(2), p)])
    wilson_zero = p_curvature(wilson, 1)[0][0].is_zero_mod(p)
    return _result("p_curvature", ann["pass"] and all(r == g for r in ranks) and wilson_zero,
                   {"annihilation": ann, "image_ranks": ranks, "wilson_zero": wilson_zero}, f"{p}^1")


def local_degree(params: dict) -> int:
    """2p for g = 1, p for g = 2; at least p^s when s >= 2."""
    if params.get("degree"):
        return params["degree"]
    p, s = params["p"], params.get("s", 1)
    N = 2 * p if params["g"] == 1 else p
    return max(N, p ** s) if s >= 2 else N


def check_local(params: dict) -> dict:
    from .localflat import BasePoint, integral_lattice, match_hypergeometric

    p, s, g = params["p"], params["s"], params["g"]
    N = local_degree(params)
    a = BasePoint.of(ordinary_points(params, 1)[0], p)
    lat = integral_lattice(a, N, s)
    detail = {"point": list(a.coords), "lattice": lat.to_dict()}
    ok = lat.rank == g and lat.free
    if ok:
        detail["match"] = match_hypergeometric(a, s, N)
    return _result("local_flat", ok, detail, f"{p}^{s}", N)


# ---------------- [SU-3] registry ----------------
Check = Callable[[dict], dict]

SIGMA_CHECKS = {"kernel_flatness", "gauss_manin", "pairing", "p_curvature"}

REGISTRY: list[tuple[str, Check, Callable[[dict], bool]]] = [
    ("kz_residuals", check_kz_residuals, lambda q: True),
    ("limit_consistency", check_limit, lambda q: (q["p"] ** (q["s"] + 1)).bit_length() < 62),
    ("hasse_witt", check_hasse_witt, lambda q: True),
    ("unit_root", check_unit_root, lambda q: True),
    ("kernel_flatness", check_kernel_flatness, lambda q: q["p"] ** q["s"] <= 49),
    ("gauss_manin", check_gauss_manin, lambda q: q["g"] <= 2),
    ("pairing", check_pairing, lambda q: True),
    ("lemma_cd", check_lemma_cd, lambda q: q["s"] <= 2),
    ("dlog_fixed_point", check_dlog, lambda q: True),
    ("p_curvature", check_p_curvature, lambda q: q["s"] == 1),
    ("local_flat", check_local, lambda q: q["g"] <= 2 and (q["s"] == 1 or q["p"] ** q["s"] <= 25)),
]


def _run_one(name: str, fn: Check, params: dict) -> dict:
    t0 = time.perf_counter()
    try:
        out = fn(params)
    except KZError as e:
        out = _result(name, False, {"error": type(e).__name__, "message": str(e)})
    out["seconds"] = round(time.perf_counter() - t0, 3)
    return out


def run(params: dict, quiet: bool = False) -> list[dict]:
    """Every applicable registered check, in registry order."""
    from .hypersol import regime_guard

    p, s, g = params["p"], params["s"], params["g"]
    regime_guard(p, s, g)
    if p <= 2 * g + 1:
        raise InvalidParameter(f"the suite samples points with distinct residues and needs p > n = {2 * g + 1}")
    params = {"samples": 3, "seed": SEED, **params}
    wanted = set(SUITE)
    plan = [(name, fn) for name, fn, ok in REGISTRY if ok(params) and (not wanted or name in wanted)]
    if "sigma" not in params and any(name in SIGMA_CHECKS for name, _ in plan):
        params["sigma"] = measured_sigma(g, params["seed"], quiet)["sigma"]
    skipped = [name for name, _, _ in REGISTRY if name not in {n for n, _ in plan}]
    for name in skipped:
        _log(f"skip {name}", quiet)
    if WORKERS > 1:
        with ProcessPoolExecutor(max_workers=WORKERS) as pool:
            futures = [pool.submit(_run_one, name, fn, params) for name, fn in plan]
            results = [f.result() for f in futures]
    else:
        results = []
        for name, fn in plan:
            if not quiet:
                print(f"==> {name}", file=sys.stderr, flush=True)
            results.append(_run_one(name, fn, params))
    for r in results:
        _log(f"{r['name']}: {'pass' if r['pass'] else 'FAIL'} ({r['seconds']}s)", quiet)
    return results

