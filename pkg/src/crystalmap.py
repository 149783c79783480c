# src/crystalmap.py
# Hasse–Witt matrix, the generalized Cartier map C_s and its kernel.
from __future__ import annotations

import random
import sys
from dataclasses import dataclass
from typing import Sequence

from .config import MAX_RESAMPLE, SEED
from .errors import CheckFailed, NonOrdinaryPoint, ResidueCollision
from .exactring import (X, DiagRational, SparsePoly, check_modulus, coeff_of, poly_pow,
                        product_coefficient, z_vars)
from .hypersol import check_point, curve_polynomial, master_polynomial, q_solutions, regime_guard
from .modlinalg import det_mod, normalized_kernel, rank_mod_p


def _log(msg: str, quiet: bool = False) -> None:
    if not quiet:
        print(f"[crystalmap] {msg}", file=sys.stderr, flush=True)


# ---------------- Hasse–Witt ----------------
@dataclass
class HasseWittMatrix:
    p: int
    g: int
    entries: list[list[SparsePoly]]

    def reduce(self) -> list[list[SparsePoly]]:
        return [[e.with_modulus(self.p) for e in row] for row in self.entries]

    def at(self, point: Sequence[int]) -> list[list[int]]:
        values = {f"z{k}": a for k, a in enumerate(point, 1)}
        return [[int(e.evaluate(values)) for e in row] for row in self.entries]


def _hw_entries(fe: SparsePoly, p: int, g: int) -> list[list[SparsePoly]]:
    return [[coeff_of(fe, X, ell * p - m) for m in range(1, g + 1)] for ell in range(1, g + 1)]


def hasse_witt(p: int, g: int) -> HasseWittMatrix:
    """A_{ℓm} = coefficient of x^{ℓp−m} in f^{(p−1)/2}, symbolic over Z."""
    check_modulus(p, 1)
    f = curve_polynomial(2 * g + 1)
    return HasseWittMatrix(p, g, _hw_entries(poly_pow(f, (p - 1) // 2), p, g))


def hasse_witt_at(p: int, g: int, point: Sequence[int]) -> list[list[int]]:
    f = curve_polynomial(2 * g + 1, point)
    fe = poly_pow(f, (p - 1) // 2)
    return [[int(e.constant_term()) for e in row] for row in _hw_entries(fe, p, g)]


def det_at(p: int, g: int, point: Sequence[int]) -> int:
    """Exact det A(point) over Z."""
    return int(det_mod(hasse_witt_at(p, g, point)))


def is_ordinary(p: int, g: int, point: Sequence[int]) -> bool:
    res = [a % p for a in point]
    return len(set(res)) == len(res) and det_at(p, g, point) % p != 0


def sample_ordinary_points(p: int, g: int, count: int, seed: int | None = None,
                           max_tries: int | None = None) -> list[tuple[int, ...]]:
    """Seeded rejection sampling of points with distinct residues and det A a unit."""
    n = 2 * g + 1
    if n > p:
        raise ResidueCollision(f"n = {n} residues cannot be distinct mod p = {p}")
    rng = random.Random(SEED if seed is None else seed)
    budget = MAX_RESAMPLE if max_tries is None else max_tries
    out: list[tuple[int, ...]] = []
    tries = 0
    while len(out) < count:
        if tries >= budget:
            raise NonOrdinaryPoint(f"no ordinary point found for p={p}, g={g} after {tries} tries")
        tries += 1
        pt = tuple(rng.sample(range(p), n))
        if det_at(p, g, pt) % p:
            out.append(pt)
    return out


def det_certificate(p: int, g: int, seed: int | None = None) -> dict:
    """A point where det A is a unit mod p: det A mod p is not the zero polynomial."""
    pt = sample_ordinary_points(p, g, 1, seed)[0]
    return {"p": p, "g": g, "point": list(pt), "det_mod_p": det_at(p, g, pt) % p, "pass": True}


# ---------------- Cartier matrix ----------------
@dataclass
class CartierMatrix:
    p: int
    s: int
    g: int
    rows: list[list[SparsePoly]]

    @property
    def modulus(self) -> int:
        return self.p ** self.s

    def at(self, point: Sequence[int]) -> list[list[int]]:
        values = {f"z{k}": a for k, a in enumerate(point, 1)}
        return [[int(e.evaluate(values)) % self.modulus for e in row] for row in self.rows]


def _cofactor_coefficient(n: int, i: int, e: int, N: int, modulus: int) -> SparsePoly:
    """Coefficient of x^N in (x − z_i)^{e−1}·Π_{k≠i}(x − z_k)^e, by compositions."""
    bounds = [e - 1 if k == i else e for k in range(1, n + 1)]
    return product_coefficient(z_vars(n), bounds, N, modulus)


def cartier_matrix(p: int, s: int, g: int) -> CartierMatrix:
    """Row ℓ, column i: c_{ℓp^s−1,i}(z) mod p^s, computed independently of hypersol."""
    q = check_modulus(p, s)
    regime_guard(p, s, g)
    n = 2 * g + 1
    e = (q - 1) // 2
    rows = [[_cofactor_coefficient(n, i, e, ell * q - 1, q) for i in range(1, n + 1)]
            for ell in range(1, g + 1)]
    return CartierMatrix(p, s, g, rows)


def cartier_matrix_at(p: int, s: int, g: int, point: Sequence[int]) -> list[list[int]]:
    return q_solutions(p, s, g, point=point).matrix()


def cartier_of_form(R: SparsePoly, p: int, s: int, g: int, point: Sequence[int] | None = None) -> list[SparsePoly]:
    """C_s(R(x)·dx/y): coefficients of x^{ℓp^s−1} in R·Φ_s for ℓ = 1..g."""
    q = check_modulus(p, s)
    regime_guard(p, s, g)
    phi = master_polynomial(p, s, 2 * g + 1, point).poly
    prod = phi * R.with_modulus(q) if R.modulus != q else phi * R
    return [coeff_of(prod, X, ell * q - 1) for ell in range(1, g + 1)]


def exact_numerator(a: int, g: int, point: Sequence[int] | None = None, modulus: int | None = None) -> SparsePoly:
    """Numerator of 2·d(x^a y) = (2a x^{a−1} f + x^a f′)·dx/y."""
    f = curve_polynomial(2 * g + 1, point, modulus)
    x = SparsePoly.var(X, f.vars, modulus)
    out = poly_pow(x, a) * f.diff(X)
    if a:
        out = out + poly_pow(x, a - 1) * f * (2 * a)
    return out


def exact_forms_check(p: int, s: int, g: int, point: Sequence[int] | None = None) -> dict:
    """C_s kills d(x^a y) for 0 ≤ a ≤ 2g+1."""
    q = check_modulus(p, s)
    rows = []
    for a in range(0, 2 * g + 2):
        vals = cartier_of_form(exact_numerator(a, g, point, q), p, s, g, point)
        rows.append({"a": a, "pass": all(v.is_zero() for v in vals)})
    return {"p": p, "s": s, "g": g, "modulus": f"{p}^{s}", "forms": rows,
            "pass": all(r["pass"] for r in rows)}


# ---------------- kernel of C_s ----------------
def kernel_cs(p: int, s: int, g: int, point: Sequence[int]) -> list[list[int]]:
    """Normalized free basis of ker C_s in the coordinates of [ω_1..ω_{n−1}]."""
    check_modulus(p, s)
    point = tuple(int(a) for a in point)
    check_point(point, p)
    C = cartier_matrix_at(p, s, g, point)
    n = 2 * g + 1
    Cp = [row[: n - 1] for row in C]
    return normalized_kernel(Cp, p, s)


def _poly_det(M: list[list[SparsePoly]]) -> SparsePoly:
    if len(M) == 1:
        return M[0][0]
    out = None
    for c in range(len(M)):
        minor = [row[:c] + row[c + 1:] for row in M[1:]]
        term = M[0][c] * _poly_det(minor)
        if c % 2:
            term = -term
        out = term if out is None else out + term
    return out


def _poly_adj(M: list[list[SparsePoly]]) -> list[list[SparsePoly]]:
    k = len(M)
    if k == 1:
        return [[SparsePoly.const(1, M[0][0].vars, M[0][0].modulus)]]
    adj = [[None] * k for _ in range(k)]
    for r in range(k):
        for c in range(k):
            minor = [row[:c] + row[c + 1:] for i, row in enumerate(M) if i != r]
            d = _poly_det(minor)
            adj[c][r] = -d if (r + c) % 2 else d
    return adj


def polynomial_kernel(C: CartierMatrix) -> list[list[SparsePoly]]:
    """
    κ′_f = det(M)·e_f − adj(M)·C′_f for each free column f ≥ g, with M the
    leading g×g block of C′. Polynomial entries; κ′/det M spans ker C_s on D_s.
    """
    g = C.g
    n = 2 * g + 1
    Cp = [row[: n - 1] for row in C.rows]
    M = [row[:g] for row in Cp]
    det = _poly_det(M)
    adj = _poly_adj(M)
    out = []
    for f in range(g, n - 1):
        col = [Cp[r][f] for r in range(g)]
        vec = []
        for j in range(n - 1):
            if j < g:
                acc = None
                for r in range(g):
                    t = adj[j][r] * col[r]
                    acc = t if acc is None else acc + t
                vec.append(-acc)
            else:
                vec.append(det if j == f else det * 0)
        out.append(vec)
    return out


def kernel_flatness(p: int, s: int, g: int, sigma: int, quiet: bool = True) -> dict:
    """C′·(∂_iκ′ + σM_iκ′) ≡ 0 mod p^s for every kernel vector κ′ and every i."""
    from .derham import gm_matrix
    from .exactring import d_dz

    C = cartier_matrix(p, s, g)
    q = C.modulus
    n = 2 * g + 1
    Cp = [row[: n - 1] for row in C.rows]
    kernel = polynomial_kernel(C)
    for vec in kernel:
        for r in range(g):
            acc = Cp[r][0] * vec[0]
            for j in range(1, n - 1):
                acc = acc + Cp[r][j] * vec[j]
            if not acc.is_zero():
                raise CheckFailed("polynomial kernel vector is not killed by C_s")
    results = []
    for i in range(1, n + 1):
        Mi = gm_matrix(i, n, q)
        ok = True
        for m, vec in enumerate(kernel, 1):
            nab = []
            for r in range(n - 1):
                acc = d_dz(vec[r], i)
                for c in range(n - 1):
                    acc = acc + Mi[r][c] * vec[c] * sigma
                nab.append(acc)
            for ell in range(g):
                total = DiagRational.of(0, z_vars(n), q)
                for j in range(n - 1):
                    total = total + nab[j] * Cp[ell][j]
                ok = ok and total.is_zero_mod(q)
        results.append({"i": i, "pass": ok})
        _log(f"nabla_{i} preserves ker C_{s}: {ok}", quiet)
    return {"p": p, "s": s, "g": g, "sigma": sigma, "modulus": f"{p}^{s}",
            "kernel_rank": len(kernel), "equations": results,
            "pass": all(r["pass"] for r in results)}


def unit_root_check(p: int, s: int, g: int, points: Sequence[Sequence[int]]) -> dict:
    """Onto-ness of C_s, kernel rank g and the exact-form test at each point."""
    n = 2 * g + 1
    q = check_modulus(p, s)
    rows = []
    for pt in points:
        pt = tuple(int(a) for a in pt)
        C = cartier_matrix_at(p, s, g, pt)
        Cp = [row[: n - 1] for row in C]
        onto = rank_mod_p(Cp, p) == g
        ker = normalized_kernel(Cp, p, s) if onto else []
        exact = exact_forms_check(p, s, g, pt)["pass"]
        killed = all(sum(Cp[r][j] * v[j] for j in range(n - 1)) % q == 0 for v in ker for r in range(g))
        rows.append({"point": list(pt), "onto": onto, "kernel_rank": len(ker),
                     "kernel_killed": killed, "exact_forms": exact,
                     "pass": onto and len(ker) == g and killed and exact})
    return {"p": p, "s": s, "g": g, "modulus": f"{p}^{s}", "points": rows,
            "pass": all(r["pass"] for r in rows)}

