# src/hypersol.py
# ------------------------------------------------------------------
# [HS-1] master polynomial Φ_s = f^{(p^s−1)/2}
# [HS-2] Q^{s,ℓ}: coefficient of x^{ℓp^s−1} in Φ_s/(x − z_i)
# [HS-3] checks: KZ residuals, rank at points, s → s+1 consistency
# ------------------------------------------------------------------
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DegenerateRegime, InternalError, InvalidParameter, NonOrdinaryPoint, ResidueCollision
from .exactring import (
    X,
    SparsePoly,
    check_modulus,
    coeff_of,
    linear_factors_product,
    poly_pow,
    product_coefficient,
    z_vars,
)
from .kzsystem import KZVector, verify_flatness
from .modlinalg import in_span, rank_mod_p

# Above this p^s (or from n = 7) the symbolic construction reads coefficients directly.
WINDOW_THRESHOLD = 25


def _log(msg: str, quiet: bool = False) -> None:
    if not quiet:
        print(f"[hypersol] {msg}", file=sys.stderr, flush=True)


# ---------------- [HS-1] ----------------
@dataclass
class MasterPolynomial:
    p: int
    s: int
    n: int
    poly: SparsePoly
    point: tuple[int, ...] | None = None

    @property
    def exponent(self) -> int:
        return (self.p ** self.s - 1) // 2

    @property
    def x_degree(self) -> int:
        return self.n * self.exponent


def _curve_vars(n: int, point) -> tuple[str, ...]:
    return (X,) if point is not None else z_vars(n) + (X,)


def curve_polynomial(n: int, point: Sequence[int] | None = None, modulus: int | None = None) -> SparsePoly:
    """f = Π_k (x − z_k), symbolic or at an integer point."""
    roots = list(point) if point is not None else list(z_vars(n))
    if point is not None and len(roots) != n:
        raise InvalidParameter(f"point has {len(roots)} coordinates, expected {n}")
    return linear_factors_product(_curve_vars(n, point), roots, modulus)


def master_polynomial(p: int, s: int, n: int, point: Sequence[int] | None = None,
                      exact: bool = False) -> MasterPolynomial:
    q = check_modulus(p, s)
    if n < 3 or n % 2 == 0:
        raise InvalidParameter(f"n must be odd and >= 3, got {n}")
    f = curve_polynomial(n, point, None if exact else q)
    phi = poly_pow(f, (q - 1) // 2)
    return MasterPolynomial(p, s, n, phi, tuple(point) if point is not None else None)


# ---------------- [HS-2] ----------------
@dataclass
class HyperSolutionSet:
    p: int
    s: int
    g: int
    vectors: list[KZVector]
    point: tuple[int, ...] | None = None
    exact: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return 2 * self.g + 1

    @property
    def modulus(self) -> int:
        return self.p ** self.s

    def matrix(self) -> list[list[int]]:
        """g×n values at the point (point mode only)."""
        if self.point is None:
            raise InvalidParameter("matrix() needs a specialized solution set; call specialize() first")
        m = self.modulus
        return [[int(e.constant_term()) % m for e in v] for v in self.vectors]


def regime_guard(p: int, s: int, g: int) -> None:
    q = p ** s
    n = 2 * g + 1
    top = n * (q - 1) // 2 - 1          # deg_x Φ_s/(x − z_i)
    for ell in range(1, g + 1):
        if ell * q - 1 > top:
            raise DegenerateRegime(
                f"l={ell} needs x^{ell * q - 1} but deg_x Phi_s/(x-z_i) = {top} (p^s={q} < 2g+1={n})"
            )


def expected_z_degree(p: int, s: int, g: int, ell: int) -> int:
    """Φ_s/(x − z_i) is homogeneous of degree n(q−1)/2 − 1 in (x, z)."""
    q = p ** s
    return (2 * g + 1) * (q - 1) // 2 - ell * q


def _divide_linear(phi: SparsePoly, root) -> list[SparsePoly]:
    """Synthetic division of Φ by (x − root); returns quotient coefficients by x-degree."""
    D = phi.degree(X)
    a = [coeff_of(phi, X, k) for k in range(D + 1)]
    b: list[SparsePoly] = [None] * D
    b[D - 1] = a[D]
    for k in range(D - 1, 0, -1):
        b[k - 1] = a[k] + b[k] * root
    rem = a[0] + b[0] * root
    if not rem.is_zero():
        raise InternalError("nonzero remainder dividing the master polynomial by (x - z_i)")
    return b


def _q_full(p, s, g, point, exact) -> list[KZVector]:
    n = 2 * g + 1
    q = p ** s
    mp = master_polynomial(p, s, n, point, exact)
    phi = mp.poly
    rest = tuple(v for v in phi.vars if v != X)
    vectors = []
    quotients = []
    for i in range(1, n + 1):
        root = (SparsePoly.var(f"z{i}", rest, phi.modulus) if point is None
                else SparsePoly.const(point[i - 1], rest, phi.modulus))
        quotients.append(_divide_linear(phi, root))
    for ell in range(1, g + 1):
        k = ell * q - 1
        vectors.append(KZVector([quo[k] for quo in quotients], q))
    return vectors


def _q_windowed(p, s, g) -> list[KZVector]:
    """
    Symbolic Q from the reversed product Π(1 − z_k x)^e truncated at x-degree
    D − q: φ_m is its coefficient of x^{D−m} and Q_i = Σ_{m≥ℓq} φ_m z_i^{m−ℓq}.
    """
    n = 2 * g + 1
    q = p ** s
    e = (q - 1) // 2
    D = n * e
    cutoff = D - q
    vs = z_vars(n) + (X,)
    rev = SparsePoly.const(1, vs, q)
    for k in range(1, n + 1):
        lin = SparsePoly(vs, {tuple(1 if v == X or v == f"z{k}" else 0 for v in vs): -1,
                              (0,) * len(vs): 1}, q)
        rev = rev.mul_trunc(poly_pow(lin, e, cutoff=cutoff, var=X), var=X, cutoff=cutoff)
    phi = {m: coeff_of(rev, X, D - m) for m in range(q, D + 1)}
    zs = z_vars(n)
    vectors = []
    for ell in range(1, g + 1):
        entries = []
        for i in range(1, n + 1):
            zi = SparsePoly.var(f"z{i}", zs, q)
            acc = SparsePoly.zero(zs, q)
            for m in range(D, ell * q - 1, -1):
                acc = acc * zi + phi[m].lift(zs)
            entries.append(acc)
        vectors.append(KZVector(entries, q))
    return vectors


def _q_coefficients(p, s, g) -> list[KZVector]:
    """Symbolic Q read off term by term: Q_i is the x^{ℓq−1} coefficient of (x − z_i)^{e−1}Π_{k≠i}(x − z_k)^e."""
    n = 2 * g + 1
    q = p ** s
    e = (q - 1) // 2
    zs = z_vars(n)
    vectors = []
    for ell in range(1, g + 1):
        entries = [product_coefficient(zs, [e - 1 if k == i else e for k in range(1, n + 1)], ell * q - 1, q)
                   for i in range(1, n + 1)]
        vectors.append(KZVector(entries, q))
    return vectors


METHODS = ("full", "windowed", "coefficients")


def default_method(p: int, s: int, g: int) -> str:
    return "coefficients" if p ** s > WINDOW_THRESHOLD or 2 * g + 1 >= 7 else "full"


def q_solutions(p: int, s: int, g: int, point: Sequence[int] | None = None,
                exact: bool = False, windowed: bool | None = None,
                quiet: bool = True, method: str | None = None) -> HyperSolutionSet:
    """
    The p^s-hypergeometric solutions Q^{s,1..g}. With ``point`` the z_k are
    specialized before powering; with ``exact`` coefficients stay in Z.
    ``windowed`` is shorthand for method="windowed" (True) or "full" (False).
    """
    q = check_modulus(p, s)
    if g < 1:
        raise InvalidParameter("g must be >= 1")
    regime_guard(p, s, g)
    if point is not None:
        point = tuple(int(a) for a in point)
    if method is None and windowed is not None:
        method = "windowed" if windowed else "full"
    if method is None:
        method = "full" if point is not None or exact else default_method(p, s, g)
    if method not in METHODS:
        raise InvalidParameter(f"unknown construction {method!r}; expected one of {', '.join(METHODS)}")
    if method != "full" and (point is not None or exact):
        raise InvalidParameter(f"the {method} construction is symbolic mod p^s only")
    if method == "windowed":
        vectors = _q_windowed(p, s, g)
    elif method == "coefficients":
        vectors = _q_coefficients(p, s, g)
    else:
        vectors = _q_full(p, s, g, point, exact)
    for ell, v in enumerate(vectors, 1):
        _log(f"built Q^{{{s},{ell}}} ({sum(len(e) for e in v)} terms, {method})", quiet)
    return HyperSolutionSet(p, s, g, vectors, point, exact, {"method": method, "windowed": method == "windowed"})


def specialize(sol: HyperSolutionSet, point: Sequence[int]) -> HyperSolutionSet:
    """Evaluate every entry at an integer point (mod p^s)."""
    point = tuple(int(a) for a in point)
    if len(point) != sol.n:
        raise InvalidParameter(f"point has {len(point)} coordinates, expected {sol.n}")
    values = {f"z{k}": a for k, a in enumerate(point, 1)}
    m = sol.modulus
    vectors = []
    for v in sol.vectors:
        ents = [SparsePoly.const(e.with_modulus(m).evaluate(values) if e.vars else e.constant_term(), (), m)
                for e in v]
        vectors.append(KZVector(ents, m))
    return HyperSolutionSet(sol.p, sol.s, sol.g, vectors, point, False, dict(sol.meta))


# ---------------- [HS-3] ----------------
def check_point(point: Sequence[int], p: int) -> None:
    res = [a % p for a in point]
    if len(set(res)) != len(res):
        raise ResidueCollision(f"point {tuple(point)} has colliding residues mod {p}")


def verify_thm_v2(p: int, s: int, g: int, points: Iterable[Sequence[int]] | None = None,
                  samples: int = 3, seed: int | None = None, quiet: bool = True) -> dict:
    """
    (a) every 2∂_iQ − H_iQ vanishes mod p^s as a cleared-denominator identity;
    (b) the g×n matrix of Q-values has rank g mod p at ordinary points.
    """
    from .crystalmap import sample_ordinary_points

    sol = q_solutions(p, s, g, quiet=quiet)
    q = p ** s
    residuals = []
    for ell, v in enumerate(sol.vectors, 1):
        for rec in verify_flatness(v, p, s):
            residuals.append({"l": ell, **rec})
        _log(f"residuals for Q^{{{s},{ell}}} checked", quiet)
    sums_ok = all(_sum_zero(v, q) for v in sol.vectors)
    pts = [tuple(a) for a in points] if points is not None else sample_ordinary_points(p, g, samples, seed)
    ranks = []
    for pt in pts:
        check_point(pt, p)
        r = rank_mod_p(specialize(sol, pt).matrix(), p)
        ranks.append({"point": list(pt), "rank": r, "pass": r == g})
    passed = all(r["pass"] for r in residuals) and sums_ok and all(r["pass"] for r in ranks)
    return {
        "p": p, "s": s, "g": g, "modulus": f"{p}^{s}",
        "residuals": residuals, "sum_zero": sums_ok, "ranks": ranks, "pass": passed,
    }


def _sum_zero(v: KZVector, q: int) -> bool:
    total = v.entries[0]
    for e in v.entries[1:]:
        total = total + e
    return total.with_modulus(q).is_zero()


def limit_consistency(p: int, s: int, g: int, points: Iterable[Sequence[int]]) -> dict:
    """Q^{s+1,ℓ}(a) mod p^s lies in the Z/p^s-span of the Q^{s,m}(a)."""
    from .crystalmap import det_at

    check_modulus(p, s + 1)
    q = p ** s
    rows = []
    for pt in points:
        pt = tuple(int(a) for a in pt)
        check_point(pt, p)
        if det_at(p, g, pt) % p == 0:
            raise NonOrdinaryPoint(f"det A vanishes mod {p} at {pt}")
        low = q_solutions(p, s, g, point=pt).matrix()
        high = q_solutions(p, s + 1, g, point=pt).matrix()
        members = [in_span(low, [x % q for x in row], p, s) for row in high]
        rows.append({"point": list(pt), "members": members, "pass": all(members)})
    return {"p": p, "s": s, "g": g, "modulus": f"{p}^{s}", "points": rows,
            "pass": all(r["pass"] for r in rows)}
