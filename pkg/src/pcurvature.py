# src/pcurvature.py
# p-curvature of ∇_i = ∂_i + B_i (column vectors) mod p.
from __future__ import annotations

import random
import sys
from dataclasses import dataclass
from typing import Sequence

from .config import MAX_PRIME
from .errors import InvalidParameter, NonInvertibleDifference
from .exactring import DiagRational, Factor, SparsePoly, check_modulus, d_dz, poly_pow, z_vars
from .modlinalg import rank_mod_p, transpose

Matrix = list[list[DiagRational]]


def _log(msg: str, quiet: bool = False) -> None:
    if not quiet:
        print(f"[pcurvature] {msg}", file=sys.stderr, flush=True)


# ---------------- connections ----------------
@dataclass
class ConnectionData:
    p: int
    n: int                    # number of z variables
    B: list[Matrix]           # B[i-1] for ∂_i
    kind: str = "custom"

    @property
    def rank(self) -> int:
        return len(self.B[0])

    def matrix(self, i: int) -> Matrix:
        return self.B[i - 1]


def _check_prime(p: int) -> None:
    check_modulus(p, 1)
    if p > MAX_PRIME:
        raise InvalidParameter(f"p = {p} exceeds the p-curvature bound {MAX_PRIME}")


def gaudin_matrix(i: int, n: int, modulus: int | None = None) -> Matrix:
    """H_i as an n×n matrix acting on column vectors."""
    vs = z_vars(n)
    zero = DiagRational.of(0, vs, modulus)
    H = [[zero] * n for _ in range(n)]
    for j in range(1, n + 1):
        if j == i:
            continue
        d = DiagRational.inv_diff(i, j, vs, modulus)
        H[j - 1][i - 1] = d
        H[j - 1][j - 1] = -d
        H[i - 1][j - 1] = d
        H[i - 1][i - 1] = H[i - 1][i - 1] - d
    return H


def kz_connection(p: int, g: int) -> ConnectionData:
    """B_i = −H_i/2, so flat sections solve 2∂_iI = H_iI."""
    _check_prime(p)
    n = 2 * g + 1
    half = pow(2, -1, p)
    B = [[[e * (-half) for e in row] for row in gaudin_matrix(i, n, p)] for i in range(1, n + 1)]
    return ConnectionData(p, n, B, "kz")


def gm_connection(p: int, g: int, sigma: int) -> ConnectionData:
    """B_i = σ·(connection formula matrix) on the basis [ω_1..ω_{n−1}]."""
    from .derham import gm_matrix

    _check_prime(p)
    n = 2 * g + 1
    B = [[[e * sigma for e in row] for row in gm_matrix(i, n, p)] for i in range(1, n + 1)]
    return ConnectionData(p, n, B, "gm")


def scalar_connection(p: int, n: int, entries: Sequence[DiagRational]) -> ConnectionData:
    """Rank-one connection d + Σ b_i dz_i."""
    _check_prime(p)
    return ConnectionData(p, n, [[[e.with_modulus(p)]] for e in entries], "scalar")


# ---------------- algebra on matrices ----------------
def _mat_mul(A: Matrix, B: Matrix) -> Matrix:
    out = []
    for row in A:
        r = []
        for c in range(len(B[0])):
            acc = row[0] * B[0][c]
            for k in range(1, len(B)):
                acc = acc + row[k] * B[k][c]
            r.append(acc)
        out.append(r)
    return out


def _mat_vec(A, v):
    out = []
    for row in A:
        acc = row[0] * v[0]
        for k in range(1, len(v)):
            acc = acc + row[k] * v[k]
        out.append(acc)
    return out


def integrability(conn: ConnectionData) -> dict:
    """∂_iB_j − ∂_jB_i + [B_i, B_j] = 0 for every pair."""
    bad = []
    for i in range(1, conn.n + 1):
        for j in range(i + 1, conn.n + 1):
            Bi, Bj = conn.matrix(i), conn.matrix(j)
            BiBj, BjBi = _mat_mul(Bi, Bj), _mat_mul(Bj, Bi)
            for r in range(conn.rank):
                for c in range(conn.rank):
                    e = d_dz(Bj[r][c], i) - d_dz(Bi[r][c], j) + BiBj[r][c] - BjBi[r][c]
                    if not e.is_zero():
                        bad.append([i, j])
                        break
                else:
                    continue
                break
    return {"pairs_failed": bad, "pass": not bad}


# ---------------- common-denominator recursion ----------------
def _common_denominator(M: Matrix) -> dict[Factor, int]:
    den: dict[Factor, int] = {}
    for row in M:
        for e in row:
            for f, k in e.den.items():
                den[f] = max(den.get(f, 0), k)
    return den


def _den_poly(den: dict[Factor, int], vars, p: int) -> SparsePoly:
    out = SparsePoly.const(1, vars, p)
    for f, k in sorted(den.items(), key=lambda kv: kv[0].label):
        out = out * poly_pow(f.poly.with_modulus(p), k)
    return out


def _numerators(M: Matrix, den: dict[Factor, int], vars, p: int) -> list[list[SparsePoly]]:
    out = []
    for row in M:
        r = []
        for e in row:
            extra = {f: k - e.den.get(f, 0) for f, k in den.items()}
            r.append((e.num.with_modulus(p) * _den_poly(extra, vars, p)).lift(vars))
        out.append(r)
    return out


def _recursion(N1: list[list[SparsePoly]], D: SparsePoly, var: str, p: int) -> list[list[SparsePoly]]:
    """N_{k+1} = D·∂N_k − k·∂D·N_k + N_1·N_k, so that B^{(k)} = N_k / D^k."""
    dD = D.diff(var)
    Nk = N1
    size = len(N1)
    for k in range(1, p):
        nxt = []
        for r in range(size):
            row = []
            for c in range(size):
                acc = D * Nk[r][c].diff(var) - dD * Nk[r][c] * k
                for m in range(size):
                    acc = acc + N1[r][m] * Nk[m][c]
                row.append(acc)
            nxt.append(row)
        Nk = nxt
    return Nk


def p_curvature(conn: ConnectionData, i: int) -> Matrix:
    """ψ_i = B_i^{(p)} with B^{(1)} = B_i and B^{(k+1)} = ∂_iB^{(k)} + B_i·B^{(k)}."""
    p = conn.p
    vars = z_vars(conn.n)
    Bi = conn.matrix(i)
    den = _common_denominator(Bi)
    D = _den_poly(den, vars, p)
    N = _recursion(_numerators(Bi, den, vars, p), D, f"z{i}", p)
    big = {f: k * p for f, k in den.items()}
    return [[DiagRational(e, big) for e in row] for row in N]


def _specialize(poly: SparsePoly, keep: str, point: Sequence[int]) -> SparsePoly:
    values = {f"z{k}": a for k, a in enumerate(point, 1) if f"z{k}" != keep and f"z{k}" in poly.vars}
    out = poly.substitute(values) if values else poly
    return out.lift((keep,)) if out.vars != (keep,) else out


def p_curvature_at(conn: ConnectionData, i: int, point: Sequence[int]) -> list[list[int]]:
    """ψ_i at an integer point mod p, with z_j (j ≠ i) specialized before the recursion."""
    p = conn.p
    var = f"z{i}"
    vars = z_vars(conn.n)
    Bi = conn.matrix(i)
    den = _common_denominator(Bi)
    D = _specialize(_den_poly(den, vars, p), var, point)
    N1 = [[_specialize(e, var, point) for e in row] for row in _numerators(Bi, den, vars, p)]
    N = _recursion(N1, D, var, p)
    at = {var: point[i - 1]}
    dval = int(D.evaluate(at)) % p
    if dval == 0:
        raise NonInvertibleDifference(f"connection denominator vanishes mod {p} at {tuple(point)}")
    scale = pow(pow(dval, p, p), -1, p)
    return [[(int(e.evaluate(at)) * scale) % p for e in row] for row in N]


def operator_power(conn: ConnectionData, i: int, v: Sequence[DiagRational], times: int | None = None) -> list[DiagRational]:
    """(∂_i + B_i)^times applied to v (times defaults to p)."""
    Bi = conn.matrix(i)
    cur = [DiagRational.of(e).with_modulus(conn.p) for e in v]
    for _ in range(conn.p if times is None else times):
        Bv = _mat_vec(Bi, cur)
        cur = [d_dz(e, i) + b for e, b in zip(cur, Bv)]
    return cur


def linearity_certificate(conn: ConnectionData, i: int, vectors: Sequence[Sequence[DiagRational]]) -> bool:
    """ψ_i·v equals the p-th operator power on each v (two code paths)."""
    psi = p_curvature(conn, i)
    p = conn.p
    for v in vectors:
        lhs = operator_power(conn, i, v)
        rhs = _mat_vec(psi, [DiagRational.of(e).with_modulus(p) for e in v])
        if not all((a - b).is_zero_mod(p) for a, b in zip(lhs, rhs)):
            return False
    return True


# ---------------- checks ----------------
def annihilation_check(p: int, g: int, points: Sequence[Sequence[int]] | None = None,
                       quiet: bool = True) -> dict:
    """ψ_i^{KZ}·Q^{1,ℓ} ≡ 0 mod p: symbolically, or at the given points."""
    from .hypersol import check_point, q_solutions

    n = 2 * g + 1
    if p <= n:
        raise InvalidParameter(f"annihilation check needs p > n = {n}")
    conn = kz_connection(p, g)
    rows = []
    if points is None:
        sol = q_solutions(p, 1, g)
        for i in range(1, n + 1):
            psi = p_curvature(conn, i)
            for ell, Q in enumerate(sol.vectors, 1):
                vec = _mat_vec(psi, [DiagRational.of(e) for e in Q])
                rows.append({"i": i, "l": ell, "pass": all(e.is_zero_mod(p) for e in vec)})
            _log(f"psi_{i} computed symbolically", quiet)
    else:
        for pt in points:
            pt = tuple(int(a) for a in pt)
            check_point(pt, p)
            Qm = q_solutions(p, 1, g, point=pt).matrix()
            for i in range(1, n + 1):
                psi = p_curvature_at(conn, i, pt)
                for ell, q in enumerate(Qm, 1):
                    vec = [sum(a * b for a, b in zip(row, q)) % p for row in psi]
                    rows.append({"point": list(pt), "i": i, "l": ell, "pass": not any(vec)})
    return {"p": p, "g": g, "modulus": f"{p}^1", "checks": rows, "pass": all(r["pass"] for r in rows)}


def image_span_rank(p: int, g: int, point: Sequence[int], sigma: int) -> int:
    """Rank over F_p of all columns of all ψ_i^{GM}(point)."""
    conn = gm_connection(p, g, sigma)
    cols = []
    for i in range(1, conn.n + 1):
        cols.extend(transpose(p_curvature_at(conn, i, point)))
    return rank_mod_p(cols, p)


def kodaira_spencer_check(p: int, g: int, point: Sequence[int], sigma: int) -> dict:
    """span{ψ_i^{GM}[dx/y]} against the span of all p-curvature images."""
    from .derham import CurveData, FormRep, _frac_mod, reduce_to_basis, to_poly

    conn = gm_connection(p, g, sigma)
    curve = CurveData(conn.n, tuple(point))
    c = [_frac_mod(a, p) for a in reduce_to_basis(FormRep(to_poly(1), 0), curve, p).coeffs]
    cols, images = [], []
    for i in range(1, conn.n + 1):
        psi = p_curvature_at(conn, i, point)
        cols.extend(transpose(psi))
        images.append([sum(a * b for a, b in zip(row, c)) % p for row in psi])
    r_all = rank_mod_p(cols, p)
    r_ks = rank_mod_p(images, p)
    return {"point": list(point), "rank_all": r_all, "rank_dx_over_y": r_ks, "pass": r_all == r_ks}


def negative_control(p: int, g: int, point: Sequence[int], seed: int = 0) -> bool:
    """A random constant vector is not killed by every ψ_i^{KZ} at the point."""
    rng = random.Random(seed)
    n = 2 * g + 1
    v = [rng.randrange(p) for _ in range(n - 1)]
    v.append((-sum(v)) % p)
    conn = kz_connection(p, g)
    for i in range(1, n + 1):
        psi = p_curvature_at(conn, i, point)
        if any(sum(a * b for a, b in zip(row, v)) % p for row in psi):
            return True
    return False
