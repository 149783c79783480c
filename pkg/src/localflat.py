# src/localflat.py
# Local flat sections of the KZ connection at an ordinary point a (z = a + t).
#
# Map:
#   [LF-1] BasePoint, guard digits, expand_hamiltonian
#   [LF-2] Euler recursion: solve_flat, SeriesSolution, MinValuationProfile
#   [LF-3] integral_lattice, lattice_profile
#   [LF-4] match_hypergeometric, agreement_degree, integrability_defect
from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InvalidParameter, NonOrdinaryPoint, NoMatch, PrecisionExhausted
from .exactring import SparsePoly, TruncSeries, check_modulus, t_vars, z_vars
from .kzsystem import KZVector
from .modlinalg import det_mod, howell_form, kernel, smith, solve, transpose


def _log(msg: str, quiet: bool = False) -> None:
    if not quiet:
        print(f"[localflat] {msg}", file=sys.stderr, flush=True)


# ---------------- [LF-1] base point ----------------
@dataclass(frozen=True)
class BasePoint:
    coords: tuple[int, ...]
    p: int

    def __post_init__(self):
        from .crystalmap import is_ordinary
        from .hypersol import check_point

        n = len(self.coords)
        if n < 3 or n % 2 == 0:
            raise InvalidParameter(f"a base point needs an odd number n >= 3 of coordinates, got {n}")
        check_point(self.coords, self.p)
        if not is_ordinary(self.p, self.g, self.coords):
            raise NonOrdinaryPoint(f"det A vanishes mod {self.p} at {self.coords}")

    @classmethod
    def of(cls, coords: Sequence[int], p: int) -> "BasePoint":
        return cls(tuple(int(a) for a in coords), p)

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def g(self) -> int:
        return (self.n - 1) // 2


def legendre(d: int, p: int) -> int:
    """v_p(d!)."""
    e, q = 0, p
    while q <= d:
        e += d // q
        q *= p
    return e


def guard_digits(N: int, p: int) -> int:
    """⌈log_p N⌉ + 2."""
    m, q = 0, 1
    while q < N:
        q *= p
        m += 1
    return m + 2


def default_guard(N: int, p: int) -> int:
    """guard_digits, or v_p(N!) + 1 when that is larger."""
    return max(guard_digits(N, p), legendre(N, p) + 1)


def _inverse_difference(a: BasePoint, i: int, j: int, N: int, k: int) -> TruncSeries:
    n, p = a.n, a.p
    vs = t_vars(n)
    ei = tuple(1 if x == i - 1 else 0 for x in range(n))
    ej = tuple(1 if x == j - 1 else 0 for x in range(n))
    lin = SparsePoly(vs, {(0,) * n: a.coords[i - 1] - a.coords[j - 1], ei: 1, ej: -1}, p ** k)
    return TruncSeries(lin, N, p).inverse()


def expand_hamiltonian(a: BasePoint, N: int, k: int = 1) -> list[list[list[TruncSeries]]]:
    """H_1..H_n at z = a + t as n×n matrices of series mod p^k, exact to degree N."""
    n, p = a.n, a.p
    zero = TruncSeries(SparsePoly.zero(t_vars(n), p ** k), N, p)
    inv = {}
    for i, j in itertools.combinations(range(1, n + 1), 2):
        inv[(i, j)] = _inverse_difference(a, i, j, N, k)
        inv[(j, i)] = -inv[(i, j)]
    out = []
    for i in range(1, n + 1):
        H = [[zero] * n for _ in range(n)]
        for j in range(1, n + 1):
            if j == i:
                continue
            d = inv[(i, j)]
            H[j - 1][i - 1] = d
            H[j - 1][j - 1] = -d
            H[i - 1][j - 1] = d
            H[i - 1][i - 1] = H[i - 1][i - 1] - d
        out.append(H)
    return out


def _homogeneous(poly: SparsePoly) -> dict[int, SparsePoly]:
    parts: dict[int, dict] = {}
    for e, c in poly.terms.items():
        parts.setdefault(sum(e), {})[e] = c
    return {d: SparsePoly(poly.vars, t, poly.modulus, _clean=True) for d, t in parts.items()}


# ---------------- [LF-2] Euler recursion ----------------
@dataclass
class LocalSystem:
    """Σ_i t_i·H_i(a+t) split by degree, mod p^K with K = s + guard."""
    a: BasePoint
    s: int
    N: int
    K: int
    parts: dict[int, list[list[SparsePoly]]] = field(repr=False)

    @property
    def p(self) -> int:
        return self.a.p

    @property
    def modulus(self) -> int:
        return self.a.p ** self.K


def local_system(a: BasePoint, N: int, s: int, guard: int | None = None) -> LocalSystem:
    check_modulus(a.p, s)
    if N < 0:
        raise InvalidParameter("degree N must be >= 0")
    M = default_guard(N, a.p) if guard is None else guard
    K = s + M
    if K < legendre(N, a.p) + s:
        raise PrecisionExhausted(
            f"{M} guard digits cannot certify mod {a.p}^{s} through degree {N} "
            f"(needs {legendre(N, a.p)})")
    n = a.n
    H = expand_hamiltonian(a, N, K)
    ts = [TruncSeries.var(i, n, N, a.p, K) for i in range(1, n + 1)]
    parts: dict[int, list[list[SparsePoly]]] = {}
    empty = SparsePoly.zero(t_vars(n), a.p ** K)
    for r in range(n):
        for c in range(n):
            acc = ts[0] * H[0][r][c]
            for i in range(1, n):
                acc = acc + ts[i] * H[i][r][c]
            for d, hp in _homogeneous(acc.poly).items():
                parts.setdefault(d, [[empty] * n for _ in range(n)])[r][c] = hp
    return LocalSystem(a, s, N, K, parts)


@dataclass
class MinValuationProfile:
    """Minimum coefficient valuation of I_d for d = 0..N (bound when I_d ≡ 0)."""
    entries: list[dict]

    @property
    def minimum(self) -> int:
        return min(e["min_valuation"] for e in self.entries)

    def dips_negative(self) -> bool:
        return self.minimum < 0

    def first_negative(self) -> int | None:
        return next((e["degree"] for e in self.entries if e["min_valuation"] < 0), None)

    def to_list(self) -> list[dict]:
        return [dict(e) for e in self.entries]


@dataclass
class SeriesSolution:
    """
    The formal solution with I(0) = v0. Degree-d coefficients are stored as
    p^{−e_d}·J_d with e_d = v_p(d!) and J_d exact mod p^K.
    """
    system: LocalSystem
    v0: tuple[int, ...]
    J: list[list[SparsePoly]] = field(repr=False)
    e: list[int]

    @property
    def p(self) -> int:
        return self.system.p

    @property
    def n(self) -> int:
        return self.system.a.n

    @property
    def cutoff(self) -> int:
        return self.system.N

    def profile(self) -> MinValuationProfile:
        K = self.system.K
        rows = []
        for d, (Jd, ed) in enumerate(zip(self.J, self.e)):
            vals = [c.min_valuation(self.p) for c in Jd]
            vals = [v for v in vals if v is not None]
            exact = bool(vals)
            v = min(vals) if vals else K
            rows.append({"degree": d, "min_valuation": v - ed, "exact": exact})
        return MinValuationProfile(rows)

    def is_integral(self) -> bool:
        return not self.profile().dips_negative()

    def series(self) -> KZVector:
        """The solution mod p^s as a KZVector of series (integral solutions only)."""
        p, s, N = self.p, self.system.s, self.cutoff
        if not self.is_integral():
            raise InvalidParameter(f"solution is not {p}-integral through degree {N}")
        m = p ** s
        comps = []
        for r in range(self.n):
            terms = {}
            for Jd, ed in zip(self.J, self.e):
                for ex, c in Jd[r].terms.items():
                    terms[ex] = c // p ** ed
            comps.append(TruncSeries(SparsePoly(t_vars(self.n), terms, m), N, p))
        return KZVector(comps, m)

    def scaled(self) -> list[TruncSeries]:
        """p^{e_N}·I mod p^K; integral for every v0."""
        p, K, N = self.p, self.system.K, self.cutoff
        eN = self.e[-1]
        comps = []
        for r in range(self.n):
            terms = {}
            for Jd, ed in zip(self.J, self.e):
                for ex, c in Jd[r].terms.items():
                    terms[ex] = c * p ** (eN - ed)
            comps.append(TruncSeries(SparsePoly(t_vars(self.n), terms, p ** K), N, p))
        return comps

    def to_dict(self) -> dict:
        return {"v0": list(self.v0), "cutoff": self.cutoff, "working_modulus": f"{self.p}^{self.system.K}",
                "certified_precision": self.system.s, "profile": self.profile().to_list()}


def _as_vector(v0, n: int) -> tuple[int, ...]:
    ents = list(v0.entries) if isinstance(v0, KZVector) else list(v0)
    out = []
    for e in ents:
        out.append(int(e.constant_term()) if isinstance(e, SparsePoly) else int(e))
    if len(out) == n - 1 or (isinstance(v0, KZVector) and len(out) == n):
        # a KZVector only sums to zero mod its modulus; rebuild the last entry
        out = out[: n - 1] + [-sum(out[: n - 1])]
    if len(out) != n:
        raise InvalidParameter(f"initial vector has {len(out)} entries, expected {n}")
    if sum(out):
        raise InvalidParameter("initial vector must sum to zero")
    return tuple(out)


def solve_system(system: LocalSystem, v0) -> SeriesSolution:
    """d·I_d = ½·[Σ_i t_iH_i(a+t)·I]_d, degree by degree."""
    a, p, K, N = system.a, system.p, system.K, system.N
    n = a.n
    m = p ** K
    vs = t_vars(n)
    v = _as_vector(v0, n)
    half = pow(2, -1, m)
    J = [[SparsePoly.const(x, vs, m) for x in v]]
    e = [0]
    for d in range(1, N + 1):
        S = [SparsePoly.zero(vs, m) for _ in range(n)]
        for k in range(d):
            Tm = system.parts.get(d - k)
            if Tm is None:
                continue
            lift = p ** (e[d - 1] - e[k])
            for r in range(n):
                for c in range(n):
                    if Tm[r][c].terms and J[k][c].terms:
                        S[r] = S[r] + (Tm[r][c] * J[k][c]).scale(lift)
        vd, u = 0, d
        while u % p == 0:
            u //= p
            vd += 1
        factor = half * pow(u, -1, m) % m
        J.append([x.scale(factor) for x in S])
        e.append(e[d - 1] + vd)
    return SeriesSolution(system, v, J, e)


def solve_flat(v0, a: BasePoint, N: int, s: int, guard: int | None = None) -> SeriesSolution:
    return solve_system(local_system(a, N, s, guard), v0)


# ---------------- [LF-3] integral lattice ----------------
@dataclass
class IntegralLattice:
    p: int
    s: int
    N: int
    basis: list[list[int]]          # Howell form, sum-zero coordinates c_1..c_{n−1}
    rank: int
    free: bool
    stable: bool
    E: int = 0                      # generators below live mod p^E, E = e_N + s
    gens: list[list[int]] = field(default_factory=list, repr=False)

    def lift(self, c: Sequence[int]) -> tuple[int, ...]:
        """A representative of the lattice mod p^E reducing to c mod p^s."""
        if not self.gens:
            raise InvalidParameter("the integral lattice is zero")
        c = [int(x) for x in c][: len(self.gens[0])]
        lam = solve(transpose(self.gens), c, self.p, self.s)
        if lam is None:
            raise InvalidParameter(f"{c} is not in the integral lattice mod {self.p}^{self.s}")
        M = self.p ** self.E
        x = [sum(l * g[k] for l, g in zip(lam, self.gens)) % M for k in range(len(c))]
        return tuple(x) + (-sum(x),)

    def vectors(self) -> list[tuple[int, ...]]:
        return [self.lift(c) for c in self.basis]

    def to_dict(self) -> dict:
        return {"p": self.p, "s": self.s, "N": self.N, "basis": [list(v) for v in self.vectors()],
                "rank": self.rank, "free": self.free, "stable": self.stable}


def _constraints(sols: list[SeriesSolution], E: int) -> list[list[int]]:
    """Rows p^{E−e_d}·[J_d coefficient] over the n−1 coordinate solutions."""
    p = sols[0].p
    m = p ** E
    rows = []
    first = sols[0]
    for d in range(len(first.J)):
        ed = first.e[d]
        if ed == 0:
            continue
        lift = p ** (E - ed)
        for r in range(first.n):
            keys = set()
            for sol in sols:
                keys.update(sol.J[d][r].terms)
            for ex in sorted(keys):
                row = [(sol.J[d][r].terms.get(ex, 0) * lift) % m for sol in sols]
                if any(row):
                    rows.append(row)
    return rows


def integral_lattice(a: BasePoint, N: int, s: int, guard: int | None = None,
                     quiet: bool = True) -> IntegralLattice:
    """Initial vectors mod p^s whose solutions stay p-integral through degree N."""
    p, n = a.p, a.n
    system = local_system(a, N, s, guard)
    sols = []
    for j in range(n - 1):
        c = [0] * (n - 1)
        c[j] = 1
        sols.append(solve_system(system, c))
    E = legendre(N, p) + s
    rows = _constraints(sols, E)
    _log(f"{len(rows)} integrality constraints mod {p}^{E}", quiet)
    if rows:
        gens = kernel(rows, p, E)
    else:
        gens = [[1 if k == j else 0 for k in range(n - 1)] for j in range(n - 1)]
    m = p ** s
    basis = howell_form([[x % m for x in g] for g in gens], p, s)
    if basis:
        sf = smith(basis, p, s)
        rank, free = sf.unit_rank, sf.is_free
    else:
        rank, free = 0, True
    return IntegralLattice(p, s, N, basis, rank, free, stable=N >= p ** s, E=E, gens=gens)


def lattice_profile(a: BasePoint, s: int, degrees: Sequence[int], guard: int | None = None) -> list[dict]:
    """Lattice rank for several N; ``stable`` once the rank repeats with N >= p^s."""
    out = []
    prev = None
    for N in sorted(degrees):
        lat = integral_lattice(a, N, s, guard)
        out.append({"N": N, "rank": lat.rank, "free": lat.free,
                    "stable": N >= a.p ** s and prev == lat.rank})
        prev = lat.rank
    return out


# ---------------- [LF-4] comparison with Q^{s,ℓ} ----------------
def shifted_q(a: BasePoint, s: int, N: int) -> list[list[TruncSeries]]:
    """Q^{s,ℓ}(a + t) mod p^s as g lists of n series, truncated at degree N."""
    from .hypersol import q_solutions

    p, n = a.p, a.n
    m = p ** s
    vs = t_vars(n)
    sol = q_solutions(p, s, a.g)
    mapping = {}
    for k, z in enumerate(z_vars(n)):
        ek = tuple(1 if x == k else 0 for x in range(n))
        mapping[z] = SparsePoly(vs, {(0,) * n: a.coords[k], ek: 1}, m)
    out = []
    for v in sol.vectors:
        row = []
        for ent in v:
            poly = ent.with_modulus(m).substitute(mapping, cutoff=N, total=vs).lift(vs)
            row.append(TruncSeries(poly, N, p))
        out.append(row)
    return out


def agreement_degree(sol: SeriesSolution, target: Sequence[TruncSeries]) -> int:
    """Largest d such that sol and target agree mod p^s in every degree <= d (−1 if none)."""
    series = sol.series()
    m = sol.p ** sol.system.s
    N = min(sol.cutoff, min(t.cutoff for t in target))
    for d in range(N + 1):
        for a_ser, b_ser in zip(series, target):
            diff = (a_ser.poly - b_ser.poly.with_modulus(m))
            if any(sum(ex) == d for ex in diff.terms):
                return d - 1
    return N


def integrability_defect(sol: SeriesSolution) -> list[dict]:
    """2∂_iU − H_i(a+t)U for U = p^{e_N}·I, every i, through degree N−1 mod p^K."""
    system = sol.system
    U = sol.scaled()
    H = expand_hamiltonian(system.a, sol.cutoff, system.K)
    out = []
    for i in range(1, sol.n + 1):
        worst = None
        for r in range(sol.n):
            acc = U[r].derivative(i) * 2
            for c in range(sol.n):
                acc = acc - H[i - 1][r][c] * U[c]
            acc = acc.truncate(sol.cutoff - 1)
            v = acc.poly.min_valuation(sol.p)
            if v is not None and (worst is None or v < worst):
                worst = v
        out.append({"i": i, "residual_valuation_min": worst, "pass": worst is None})
    return out


def _series_det(M: list[list[TruncSeries]]) -> TruncSeries:
    if len(M) == 1:
        return M[0][0]
    acc = None
    for j in range(len(M)):
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * _series_det(minor)
        if j % 2:
            term = -term
        acc = term if acc is None else acc + term
    return acc


def _series_inverse(M: list[list[TruncSeries]]) -> list[list[TruncSeries]]:
    g = len(M)
    inv_det = _series_det(M).inverse()
    if g == 1:
        return [[inv_det]]
    out = [[None] * g for _ in range(g)]
    for r in range(g):
        for c in range(g):
            minor = [row[:c] + row[c + 1:] for k, row in enumerate(M) if k != r]
            cof = _series_det(minor) * inv_det
            out[c][r] = -cof if (r + c) % 2 else cof
    return out


def _unit_minor(Q0: list[list[int]], p: int) -> tuple[int, ...]:
    g, n = len(Q0), len(Q0[0])
    for rows in itertools.combinations(range(n), g):
        if det_mod([[Q0[j][r] for j in range(g)] for r in rows], p):
            return rows
    raise NonOrdinaryPoint("Q^{s,l}(a) has no unit g×g minor")


def match_hypergeometric(a: BasePoint, s: int, N: int, basis: Sequence[Sequence[int]] | None = None,
                         guard: int | None = None, quiet: bool = True) -> dict:
    """
    Write each lattice solution as Σ_j b_j·Q^{s,j}(a+t) mod p^s and check that
    b is quasi-constant (db ≡ 0) with det b(0) a unit.
    """
    p, g, n = a.p, a.g, a.n
    m = p ** s
    system = local_system(a, N, s, guard)
    lat = integral_lattice(a, N, s, guard, quiet)
    if lat.rank != g or not lat.free:
        raise InvalidParameter(f"lattice has rank {lat.rank} at N = {N}; expected free rank {g}")
    vectors = lat.vectors() if basis is None else [lat.lift(c) for c in basis]
    sols = [solve_system(system, v) for v in vectors]
    Q = shifted_q(a, s, N)
    Q0 = [[int(e.poly.constant_term()) % m for e in row] for row in Q]
    R = _unit_minor(Q0, p)
    Qinv = _series_inverse([[Q[j][r] for j in range(g)] for r in R])
    b = []
    solvable = True
    quasi_constant = True
    for sol in sols:
        I = list(sol.series())
        brow = []
        for j in range(g):
            acc = Qinv[j][0] * I[R[0]]
            for k in range(1, g):
                acc = acc + Qinv[j][k] * I[R[k]]
            brow.append(acc)
        for r in range(n):
            resid = I[r]
            for j in range(g):
                resid = resid - brow[j] * Q[j][r]
            if not resid.is_zero_mod(m):
                solvable = False
        for bj in brow:
            if any(not bj.derivative(k).is_zero_mod(m) for k in range(1, n + 1)):
                quasi_constant = False
        b.append(brow)
    b0 = [[int(x.poly.constant_term()) % m for x in row] for row in b]
    det_unit = len(b0) == g and det_mod(b0, p) != 0
    verdict = {
        "p": p, "s": s, "g": g, "N": N, "point": list(a.coords),
        "b0": b0, "solvable": solvable, "quasi_constant": quasi_constant,
        "det_unit": det_unit, "pass": solvable and quasi_constant and det_unit,
    }
    _log(f"b(0) = {b0} solvable={solvable} quasi_constant={quasi_constant}", quiet)
    if not verdict["pass"]:
        raise NoMatch(f"lattice solutions are not quasi-constant combinations of Q^{{{s},l}}: {verdict}")
    return verdict
