# src/derham.py
# ------------------------------------------------------------------
# [DR-1] curve, forms, classes
# [DR-2] reduction to the basis (y-reduction, x-reduction, change of basis)
# [DR-3] Gauss–Manin matrices, measured sign, KZ duality
# [DR-4] pairing by local residues at the branch points
# [DR-5] Lagrangian congruences
# ------------------------------------------------------------------
from __future__ import annotations

import sys
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

from sympy import Matrix, Poly, QQ, Rational, Symbol, symbols

from .errors import (
    CheckFailed,
    DetNotUnit,
    DivisionByP,
    InsufficientTruncation,
    InvalidParameter,
    NonInvertibleDifference,
)
from .exactring import X, DiagRational, SparsePoly, check_modulus, z_vars
from .modlinalg import adjugate_mod, det_mod

_x = Symbol(X)


def _log(msg: str, quiet: bool = False) -> None:
    if not quiet:
        print(f"[derham] {msg}", file=sys.stderr, flush=True)


# ---------------- [DR-1] ----------------
@dataclass(frozen=True)
class CurveData:
    """y² = f(x) = Π(x − z_k) with n = 2g+1, specialized at ``point``."""
    n: int
    point: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n < 3 or self.n % 2 == 0:
            raise InvalidParameter(f"n must be odd and >= 3, got {self.n}")
        if self.point is not None:
            if len(self.point) != self.n:
                raise InvalidParameter(f"point needs {self.n} coordinates")
            if len(set(self.point)) != self.n:
                raise NonInvertibleDifference(f"point {self.point} has repeated coordinates")

    @property
    def g(self) -> int:
        return (self.n - 1) // 2

    @cached_property
    def f(self) -> Poly:
        self._need_point()
        out = Poly(1, _x, domain=QQ)
        for a in self.point:
            out = out * Poly(_x - Rational(a), _x, domain=QQ)
        return out

    @cached_property
    def fp(self) -> Poly:
        return self.f.diff(_x)

    @cached_property
    def bezout(self) -> tuple[Poly, Poly]:
        s, t, h = self.f.gcdex(self.fp)
        if h != Poly(1, _x, domain=QQ):
            raise InvalidParameter("f is not squarefree at this point")
        return s, t

    def _need_point(self):
        if self.point is None:
            raise InvalidParameter("this computation needs a specialized point")

    def cofactor(self, i: int) -> Poly:
        """f / (x − z_i)."""
        return self.f.exquo(Poly(_x - Rational(self.point[i - 1]), _x, domain=QQ))


@dataclass(frozen=True)
class FormRep:
    """P(x)·dx / y^{2k+1}."""
    P: Poly
    k: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise InvalidParameter("k must be >= 0")


@dataclass(frozen=True)
class CohClass:
    """Coordinates in the basis [ω_1..ω_{n−1}]."""
    coeffs: tuple[Fraction, ...]

    def __add__(self, other: "CohClass") -> "CohClass":
        return CohClass(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "CohClass") -> "CohClass":
        return CohClass(tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def scale(self, c) -> "CohClass":
        return CohClass(tuple(a * c for a in self.coeffs))

    def is_zero(self) -> bool:
        return all(a == 0 for a in self.coeffs)

    def reduce_mod(self, m: int) -> list[int]:
        return [int(_frac_mod(a, m)) for a in self.coeffs]


def _frac(c) -> Fraction:
    r = Rational(c)
    return Fraction(int(r.p), int(r.q))


def _frac_mod(a: Fraction, m: int) -> int:
    try:
        return (a.numerator * pow(a.denominator, -1, m)) % m
    except ValueError:
        raise DivisionByP(f"{a} has a denominator divisible by p") from None


def to_poly(P: SparsePoly | Poly | int) -> Poly:
    if isinstance(P, Poly):
        return P
    if isinstance(P, SparsePoly):
        if any(P.depends_on(v) for v in P.vars if v != X):
            raise InvalidParameter("forms must be specialized to polynomials in x")
        k = P.vars.index(X) if X in P.vars else None
        expr = sum(Rational(str(c)) * _x ** (e[k] if k is not None else 0) for e, c in P.terms.items())
        return Poly(expr, _x, domain=QQ)
    return Poly(P, _x, domain=QQ)


def omega_form(j: int, curve: CurveData) -> FormRep:
    """ω_j = dx/((x − z_j) y) = (f/(x − z_j))·dx/y³."""
    return FormRep(curve.cofactor(j), 1)


def exact_form(a: int, b: int, curve: CurveData) -> FormRep:
    """d(x^a y^b) for b ∈ {1, −1}."""
    f, fp = curve.f, curve.fp
    xa = Poly(_x ** a, _x, domain=QQ)
    xa1 = Poly(a * _x ** (a - 1), _x, domain=QQ) if a > 0 else Poly(0, _x, domain=QQ)
    if b == 1:
        return FormRep(xa1 * f + xa * fp * Rational(1, 2), 0)
    if b == -1:
        return FormRep(xa1 * f - xa * fp * Rational(1, 2), 1)
    raise InvalidParameter("b must be 1 or -1")


# ---------------- [DR-2] ----------------
def _check_divisor(d: int, p: int | None, what: str) -> None:
    if p is not None and d % p == 0:
        raise DivisionByP(f"reduction divides by {d} ({what}), which p = {p} divides")


def reduce_power_basis(form: FormRep, curve: CurveData, p: int | None = None) -> list[Fraction]:
    """Coordinates in {x^k dx/y : 0 <= k <= 2g−1}."""
    f, fp = curve.f, curve.fp
    s, t = curve.bezout
    P, k = to_poly(form.P), form.k
    while k >= 1:
        v = (P * t).rem(f)
        u = (P - v * fp).exquo(f)
        _check_divisor(2 * k - 1, p, "y-reduction")
        P = u + v.diff(_x) * Rational(2, 2 * k - 1)
        k -= 1
    n = curve.n
    while not P.is_zero and P.degree() >= n - 1:
        m = P.degree() - (n - 1)
        _check_divisor(2 * m + n, p, "x-reduction")
        xm = Poly(_x ** m, _x, domain=QQ)
        d = xm * fp * Rational(1, 2)
        if m:
            d = d + Poly(m * _x ** (m - 1), _x, domain=QQ) * f
        P = P - d * (P.LC() / d.LC())
    coeffs = [Fraction(0)] * (n - 1)
    if not P.is_zero:
        for (e,), c in P.terms():
            coeffs[e] = _frac(c)
    return coeffs


_TRANSITION: dict[tuple[int, ...], tuple[Matrix, Matrix]] = {}


def transition_matrix(curve: CurveData) -> tuple[Matrix, Matrix]:
    """(T, T⁻¹) with columns of T the power-basis coordinates of ω_1..ω_{n−1}."""
    key = curve.point
    if key not in _TRANSITION:
        cols = [reduce_power_basis(omega_form(j, curve), curve) for j in range(1, curve.n)]
        T = Matrix([[Rational(c[r].numerator, c[r].denominator) for c in cols] for r in range(curve.n - 1)])
        if T.det() == 0:
            raise CheckFailed("the forms omega_1..omega_{n-1} are not a basis at this point")
        _TRANSITION[key] = (T, T.inv())
    return _TRANSITION[key]


def reduce_to_basis(form: FormRep, curve: CurveData, p: int | None = None) -> CohClass:
    power = reduce_power_basis(form, curve, p)
    _, Tinv = transition_matrix(curve)
    v = Tinv * Matrix([Rational(c.numerator, c.denominator) for c in power])
    return CohClass(tuple(_frac(c) for c in v))


def form_to_power_basis(cls: CohClass, curve: CurveData) -> FormRep:
    """Representative Σ c_k x^k dx/y of a class."""
    T, _ = transition_matrix(curve)
    v = T * Matrix([Rational(c.numerator, c.denominator) for c in cls.coeffs])
    return FormRep(Poly(sum(c * _x ** k for k, c in enumerate(v)), _x, domain=QQ), 0)


def class_of_omega(j: int, n: int) -> CohClass:
    """[ω_j] in the basis; [ω_n] = −Σ_{k<n} [ω_k]."""
    if j == n:
        return CohClass(tuple(Fraction(-1) for _ in range(n - 1)))
    return CohClass(tuple(Fraction(int(k == j)) for k in range(1, n)))


# ---------------- [DR-3] ----------------
def _fold(vec: list, n: int) -> list:
    """Coordinates over ω_1..ω_n → basis coordinates (ω_n eliminated)."""
    return [vec[k] - vec[n - 1] for k in range(n - 1)]


def nabla_coords(i: int, j: int, n: int, modulus: int | None = None) -> list[DiagRational]:
    """Basis coordinates of ∇_i[ω_j] by the connection formulas."""
    vs = z_vars(n)
    zero = DiagRational.of(0, vs, modulus)
    half = Fraction(1, 2)
    vec = [zero] * n
    if i != j:
        d = DiagRational.inv_diff(i, j, vs, modulus) * half
        vec[i - 1] = -d
        vec[j - 1] = d
    else:
        for m in range(1, n + 1):
            if m == i:
                continue
            d = DiagRational.inv_diff(i, m, vs, modulus) * half
            vec[i - 1] = vec[i - 1] + d
            vec[m - 1] = vec[m - 1] - d
    return _fold(vec, n)


def gm_matrix(i: int, n: int, modulus: int | None = None) -> list[list[DiagRational]]:
    """(n−1)×(n−1); column j holds the coordinates of ∇_i[ω_j]."""
    cols = [nabla_coords(i, j, n, modulus) for j in range(1, n)]
    return [[cols[j][r] for j in range(n - 1)] for r in range(n - 1)]


def _eval_matrix(M, point) -> list[list[Fraction]]:
    values = {f"z{k}": a for k, a in enumerate(point, 1)}
    return [[e.evaluate(values) for e in row] for row in M]


def derivative_oracle(i: int, curve: CurveData) -> list[list[Fraction]]:
    """Basis coordinates of ∂_iω_j by differentiating the representative and reducing."""
    n = curve.n
    ci = curve.cofactor(i)
    cols = []
    for j in range(1, n):
        if j == i:
            form = FormRep(ci * ci * Rational(3, 2), 2)
        else:
            form = FormRep(ci * curve.cofactor(j) * Rational(1, 2), 2)
        cols.append(reduce_to_basis(form, curve).coeffs)
    return [[cols[j][r] for j in range(n - 1)] for r in range(n - 1)]


def measure_sigma(g: int, points: Sequence[Sequence[int]], quiet: bool = True) -> dict:
    """The global sign σ with ∂_iω_j ≡ σ·(connection formula) at every point."""
    n = 2 * g + 1
    sigma = None
    records = []
    for pt in points:
        curve = CurveData(n, tuple(pt))
        ok = True
        for i in range(1, n + 1):
            O = derivative_oracle(i, curve)
            G = _eval_matrix(gm_matrix(i, n), pt)
            for r in range(n - 1):
                for c in range(n - 1):
                    if G[r][c] and sigma is None:
                        sigma = 1 if O[r][c] == G[r][c] else -1
            ok = ok and sigma is not None and all(
                O[r][c] == sigma * G[r][c] for r in range(n - 1) for c in range(n - 1))
        records.append({"point": list(pt), "agree": ok})
    if sigma is None or not all(r["agree"] for r in records):
        raise CheckFailed("no single global sign relates the connection formulas to differentiation")
    _log(f"measured sigma = {sigma:+d} at {len(records)} points", quiet)
    return {"sigma": sigma, "points": records}


def gm_identities(n: int) -> dict:
    """Symmetry ∇_i[ω_j] = ∇_j[ω_i] and Σ_i ∇_i[ω_j] = 0 as exact identities."""
    sym = all(
        all(a == b for a, b in zip(nabla_coords(i, j, n), nabla_coords(j, i, n)))
        for i in range(1, n + 1) for j in range(i + 1, n + 1)
    )
    total_ok = True
    for j in range(1, n + 1):
        acc = nabla_coords(1, j, n)
        for i in range(2, n + 1):
            acc = [a + b for a, b in zip(acc, nabla_coords(i, j, n))]
        total_ok = total_ok and all(a.is_zero() for a in acc)
    return {"symmetry": sym, "sum_zero": total_ok, "pass": sym and total_ok}


def kz_coordinate_matrix(i: int, n: int) -> list[list[DiagRational]]:
    """K_i with ∂_i I' = K_i I' for I' = (I_1..I_{n−1}), I_n = −Σ I_k (half of H_i)."""
    vs = z_vars(n)
    zero = DiagRational.of(0, vs)
    half = Fraction(1, 2)
    rows = []
    for j in range(1, n):
        coef = [zero] * n
        if j != i:
            d = DiagRational.inv_diff(i, j, vs) * half
            coef[i - 1] = coef[i - 1] + d
            coef[j - 1] = coef[j - 1] - d
        else:
            for m in range(1, n + 1):
                if m == i:
                    continue
                d = DiagRational.inv_diff(i, m, vs) * half
                coef[m - 1] = coef[m - 1] + d
                coef[i - 1] = coef[i - 1] - d
        rows.append(_fold(coef, n))
    return rows


def duality_check(g: int, sigma: int) -> dict:
    """KZ in basis coordinates against σ·(GM matrix)ᵀ, entrywise as DiagRational identities."""
    n = 2 * g + 1
    per_i = []
    for i in range(1, n + 1):
        K = kz_coordinate_matrix(i, n)
        M = gm_matrix(i, n)
        ok = all(K[r][c] == M[c][r] * sigma for r in range(n - 1) for c in range(n - 1))
        per_i.append({"i": i, "pass": ok})
    return {"sigma": sigma, "equations": per_i, "pass": all(r["pass"] for r in per_i)}


# ---------------- [DR-4] ----------------
_T = "T"


def _inv_series(a: SparsePoly, cutoff: int) -> SparsePoly:
    c0 = Fraction(a.constant_term())
    if c0 == 0:
        raise InvalidParameter("series with zero constant term is not invertible")
    u = a.scale(1 / c0) - 1
    r = SparsePoly.const(1, (_T,))
    for _ in range(cutoff):
        r = 1 - u.mul_trunc(r, var=_T, cutoff=cutoff)
    return r.scale(1 / c0)


def _coef(a: SparsePoly, k: int):
    return a.terms.get((k,), 0) if k >= 0 else 0


def _local_expansions(curve: CurveData, i: int, cutoff: int, scale: int) -> list[tuple[SparsePoly, int]]:
    """
    At the branch point x = z_i with parameter u = scale·y and T = u²:
    each ω_k = T^shift·φ_k(T) du. Returns [(φ_k, shift)] for k = 1..n.
    """
    pt = curve.point
    zi = pt[i - 1]
    lam2 = Fraction(scale * scale)
    Tvar = SparsePoly.var(_T, (_T,))
    w = SparsePoly.zero((_T,))
    for _ in range(cutoff + 2):
        h = SparsePoly.const(1, (_T,))
        for k, zk in enumerate(pt, 1):
            if k != i:
                h = h.mul_trunc(w + (zi - zk), var=_T, cutoff=cutoff + 1)
        w = Tvar.mul_trunc(_inv_series(h.scale(lam2), cutoff + 1), var=_T, cutoff=cutoff + 1)
    # certify λ²·w·h(w) = T through the truncation
    h = SparsePoly.const(1, (_T,))
    for k, zk in enumerate(pt, 1):
        if k != i:
            h = h.mul_trunc(w + (zi - zk), var=_T, cutoff=cutoff + 1)
    resid = w.mul_trunc(h, var=_T, cutoff=cutoff + 1).scale(lam2) - Tvar
    if not resid.is_zero():
        raise InsufficientTruncation(f"local inversion at z{i} is not exact to T^{cutoff + 1}")
    wT = w.diff(_T)
    out = []
    for k, zk in enumerate(pt, 1):
        if k == i:
            v = SparsePoly((_T,), {(e[0] - 1,): c for e, c in w.terms.items()})
            phi = wT.mul_trunc(_inv_series(v, cutoff), var=_T, cutoff=cutoff).scale(2 * scale)
            out.append((phi, -1))
        else:
            phi = wT.mul_trunc(_inv_series(w + (zi - zk), cutoff), var=_T, cutoff=cutoff).scale(2 * scale)
            out.append((phi, 0))
    return out


def _laurent(phi: tuple[SparsePoly, int], m: int):
    """Coefficient of T^m."""
    poly, shift = phi
    return Fraction(_coef(poly, m - shift))


def _residue(Fj: tuple[SparsePoly, int], wk: tuple[SparsePoly, int], cutoff: int) -> Fraction:
    """res_u (F_j·ω_k) with F_j = ∫ω_j du, both even forms in u."""
    total = Fraction(0)
    for m in range(-1, cutoff + 1):
        a = _laurent(Fj, m)                 # T^m = u^{2m} → u^{2m+1}/(2m+1)
        if not a:
            continue
        b = _laurent(wk, -1 - m)            # u^{2m+1}·u^{−2−2m} = u^{−1}
        if b:
            total += a / (2 * m + 1) * b
    return total


def poincare_pairing(curve: CurveData, scale: int = 1, cutoff: int | None = None) -> list[list[Fraction]]:
    """P_{jk} = ⟨[ω_j], [ω_k]⟩ = Σ_i res_{P_i}(F_j·ω_k), exact over Q."""
    curve._need_point()
    n = curve.n
    cutoff = cutoff if cutoff is not None else 3 * curve.g + 3
    P = [[Fraction(0)] * (n - 1) for _ in range(n - 1)]
    for i in range(1, n + 1):
        exps = _local_expansions(curve, i, cutoff, scale)
        for phi, shift in exps:
            if shift < -1 or _laurent((phi, shift), -2):
                raise InsufficientTruncation(f"pole of order > 2 at z{i}")
        for j in range(1, n):
            for k in range(1, n):
                if j != k:
                    P[j - 1][k - 1] += _residue(exps[j - 1], exps[k - 1], cutoff)
    return P


def pairing_rational_function(n: int) -> Matrix:
    """The same pairing in closed form: −4(1/f′(z_j) + 1/f′(z_k))/(z_j − z_k)."""
    zs = symbols(" ".join(z_vars(n)))
    fprime = []
    for a in range(n):
        prod = 1
        for b in range(n):
            if a != b:
                prod = prod * (zs[a] - zs[b])
        fprime.append(prod)
    return Matrix(n - 1, n - 1, lambda j, k: 0 if j == k else
                  -4 * (1 / fprime[j] + 1 / fprime[k]) / (zs[j] - zs[k]))


def pairing_leibniz_check(g: int, points: Sequence[Sequence[int]], sigma: int) -> dict:
    """
    ∂_i P = σ(M_iᵀP + P M_i) at each point.

    P on the right is the residue-algorithm pairing. ∂_iP on the left is the
    derivative of the closed form, which is tied to the residues only through
    the value check Psym(point) == P, not through its derivative.
    """
    n = 2 * g + 1
    zs = symbols(" ".join(z_vars(n)))
    Psym = pairing_rational_function(n)
    rows = []
    for pt in points:
        curve = CurveData(n, tuple(pt))
        P = Matrix(poincare_pairing(curve))
        subs = dict(zip(zs, [Rational(a) for a in pt]))
        ok = Psym.subs(subs) == P
        for i in range(1, n + 1):
            lhs = Psym.diff(zs[i - 1]).subs(subs)
            M = Matrix(_eval_matrix(gm_matrix(i, n), pt))
            rhs = sigma * (M.T * P + P * M)
            ok = ok and lhs == rhs
        rows.append({"point": list(pt), "pass": bool(ok)})
    return {"points": rows, "pass": all(r["pass"] for r in rows)}


# ---------------- [DR-5] ----------------
def lagrangian_check(p: int, s: int, g: int, point: Sequence[int]) -> dict:
    """q_ℓᵀ·adj(P)·q_m ≡ 0 mod p^s with q_ℓ the first n−1 entries of Q^{s,ℓ}(point)."""
    from .hypersol import check_point, q_solutions

    m = check_modulus(p, s)
    n = 2 * g + 1
    point = tuple(int(a) for a in point)
    check_point(point, p)
    P = poincare_pairing(CurveData(n, point))
    Pm = [[_frac_mod(c, m) for c in row] for row in P]
    det = det_mod(Pm, m)
    if det % p == 0:
        raise DetNotUnit(f"pairing determinant {det} is not a unit mod {p} at {point}")
    adj = adjugate_mod(Pm, m)
    Q = [row[: n - 1] for row in q_solutions(p, s, g, point=point).matrix()]
    values = [[sum(Q[a][j] * adj[j][k] * Q[b][k] for j in range(n - 1) for k in range(n - 1)) % m
               for b in range(g)] for a in range(g)]
    skew = all(P[j][k] == -P[k][j] for j in range(n - 1) for k in range(n - 1))
    return {
        "p": p, "s": s, "g": g, "point": list(point), "modulus": f"{p}^{s}",
        "pairing": [[str(c) for c in row] for row in P],
        "det_mod_p": det % p, "skew": skew, "values": values,
        "pass": skew and all(v == 0 for row in values for v in row),
    }


def lagrangian_survey(p: int, s: int, g: int, points: Sequence[Sequence[int]]) -> dict:
    """lagrangian_check at every point; points with a non-unit pairing determinant are skipped."""
    rows, skipped = [], []
    for pt in points:
        try:
            rows.append(lagrangian_check(p, s, g, pt))
        except DetNotUnit as e:
            _log(f"skip {list(pt)}: {e}")
            skipped.append({"point": [int(a) for a in pt], "skipped": "DetNotUnit", "message": str(e)})
    return {"p": p, "s": s, "g": g, "modulus": f"{p}^{s}", "points": rows, "skipped": skipped,
            "pass": bool(rows) and all(r["pass"] for r in rows)}
