# src/exactring.py — exact arithmetic substrate
# ------------------------------------------------------------------
# SECTION MAP (search these tags):
# [ER-1] Imports / variable order
# [ER-2] Modulus budget + ResidueScalar
# [ER-3] SparsePoly
# [ER-4] poly_pow / coeff_of
# [ER-5] Factor + DiagRational
# [ER-6] TruncSeries
# [ER-7] Canonical JSON
# ------------------------------------------------------------------
from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, Mapping, Sequence, Union

import orjson
from sympy import isprime, perfect_power

from .config import MODULUS_BITS
from .errors import (
    InternalError,
    InvalidParameter,
    ModulusBudgetExceeded,
    NonInvertibleDifference,
    NotAUnit,
)

# ─────────────────────────── [ER-1] variable order ─────────────────────────
X = "x"
_VAR_RE = re.compile(r"^([zt])(\d+)$")


def var_key(name: str) -> tuple:
    """Canonical order z_1 < … < z_n < x < t_1 < … < t_n."""
    m = _VAR_RE.match(name)
    if m:
        return (0 if m.group(1) == "z" else 2, int(m.group(2)), "")
    if name == X:
        return (1, 0, "")
    return (3, 0, name)


def z_vars(n: int) -> tuple[str, ...]:
    return tuple(f"z{i}" for i in range(1, n + 1))


def t_vars(n: int) -> tuple[str, ...]:
    return tuple(f"t{i}" for i in range(1, n + 1))


def canonical_vars(names: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(set(names), key=var_key))


# ─────────────────────── [ER-2] modulus + ResidueScalar ────────────────────
def check_modulus(p: int, s: int) -> int:
    """Validate (p, s) and return p^s."""
    if not isinstance(p, int) or p < 3 or not isprime(p):
        raise InvalidParameter(f"p must be an odd prime, got {p}")
    if not isinstance(s, int) or s < 1:
        raise InvalidParameter(f"s must be a positive integer, got {s}")
    m = p ** s
    if m >= 1 << MODULUS_BITS:
        raise ModulusBudgetExceeded(f"p^s = {p}^{s} does not fit below 2^{MODULUS_BITS}")
    return m


def valuation(x: int | Fraction, p: int, cap: int | None = None) -> int | None:
    """p-adic valuation of an exact number; None (or cap) for zero."""
    if isinstance(x, Fraction):
        if x == 0:
            return cap
        return valuation(x.numerator, p) - valuation(x.denominator, p)
    x = int(x)
    if x == 0:
        return cap
    v = 0
    while x % p == 0:
        x //= p
        v += 1
        if cap is not None and v >= cap:
            return cap
    return v


def _reduce(c, modulus: int | None):
    """Coerce a coefficient into the ring Z/modulus (or keep it exact)."""
    if isinstance(c, ResidueScalar):
        c = c.value
    if modulus is None:
        if isinstance(c, Fraction) and c.denominator == 1:
            return c.numerator
        return c
    if isinstance(c, Fraction):
        try:
            inv = pow(c.denominator, -1, modulus)
        except ValueError:
            raise NotAUnit(f"denominator {c.denominator} is not a unit mod {modulus}") from None
        return (c.numerator * inv) % modulus
    return int(c) % modulus


@dataclass(frozen=True)
class ResidueScalar:
    value: int
    p: int
    s: int

    def __post_init__(self):
        check_modulus(self.p, self.s)
        object.__setattr__(self, "value", int(self.value) % (self.p ** self.s))

    @property
    def modulus(self) -> int:
        return self.p ** self.s

    def _other(self, other) -> int:
        if isinstance(other, ResidueScalar):
            if (other.p, other.s) != (self.p, self.s):
                raise InvalidParameter("residues live in different rings")
            return other.value
        return _reduce(other, self.modulus)

    def __add__(self, other):
        return ResidueScalar(self.value + self._other(other), self.p, self.s)

    __radd__ = __add__

    def __sub__(self, other):
        return ResidueScalar(self.value - self._other(other), self.p, self.s)

    def __rsub__(self, other):
        return ResidueScalar(self._other(other) - self.value, self.p, self.s)

    def __mul__(self, other):
        return ResidueScalar(self.value * self._other(other), self.p, self.s)

    __rmul__ = __mul__

    def __neg__(self):
        return ResidueScalar(-self.value, self.p, self.s)

    def __pow__(self, e: int):
        if e < 0:
            return mod_inv(self) ** (-e)
        return ResidueScalar(pow(self.value, e, self.modulus), self.p, self.s)

    def __eq__(self, other):
        if isinstance(other, ResidueScalar):
            return (self.value, self.p, self.s) == (other.value, other.p, other.s)
        if isinstance(other, (int, Fraction)):
            return self.value == _reduce(other, self.modulus)
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.p, self.s))

    def valuation(self) -> int:
        return valuation(self.value, self.p, cap=self.s)

    def is_unit(self) -> bool:
        return self.value % self.p != 0

    def __repr__(self):
        return f"{self.value} (mod {self.p}^{self.s})"


def mod_inv(a: ResidueScalar) -> ResidueScalar:
    if a.value % a.p == 0:
        raise NotAUnit(f"{a.value} is divisible by p = {a.p}")
    return ResidueScalar(pow(a.value, -1, a.modulus), a.p, a.s)


# ───────────────────────────── [ER-3] SparsePoly ───────────────────────────
Scalar = Union[int, Fraction, ResidueScalar]
_add = operator.add


def _is_scalar(x) -> bool:
    return isinstance(x, (int, Fraction, ResidueScalar))


class SparsePoly:
    """
    Sparse multivariate polynomial.

    terms maps exponent tuples (aligned with ``vars``) to coefficients. With
    ``modulus`` set the coefficients are ints in [0, modulus); with
    ``modulus=None`` they are exact ints or Fractions. Zero coefficients are
    never stored, so equality is structural.
    """

    __slots__ = ("vars", "terms", "modulus", "_hash")

    def __init__(self, vars: Iterable[str], terms: Mapping[tuple, Scalar] | None = None,
                 modulus: int | None = None, _clean: bool = False):
        self.vars = tuple(vars)
        self.modulus = modulus
        self._hash = None
        if _clean:
            self.terms = dict(terms or {})
            return
        out: dict[tuple, Scalar] = {}
        nv = len(self.vars)
        for e, c in (terms or {}).items():
            if len(e) != nv:
                raise InvalidParameter(f"exponent {e} does not match variables {self.vars}")
            c = _reduce(c, modulus)
            if c:
                out[tuple(e)] = c
        self.terms = out

    # ---------- constructors ----------
    @classmethod
    def zero(cls, vars=(), modulus=None) -> "SparsePoly":
        return cls(vars, {}, modulus, _clean=True)

    @classmethod
    def const(cls, c: Scalar, vars=(), modulus=None) -> "SparsePoly":
        return cls(vars, {(0,) * len(tuple(vars)): c}, modulus)

    @classmethod
    def var(cls, name: str, vars=None, modulus=None) -> "SparsePoly":
        vars = tuple(vars) if vars is not None else (name,)
        if name not in vars:
            vars = canonical_vars(vars + (name,))
        e = tuple(1 if v == name else 0 for v in vars)
        return cls(vars, {e: 1}, modulus)

    # ---------- structure ----------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def constant_term(self):
        return self.terms.get((0,) * len(self.vars), 0)

    def __len__(self):
        return len(self.terms)

    def sorted_terms(self) -> list[tuple[tuple, Scalar]]:
        """Graded lexicographic order, largest first."""
        return sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]), reverse=True)

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def degree(self, var: str) -> int:
        if var not in self.vars:
            return 0 if self.terms else -1
        k = self.vars.index(var)
        return max((e[k] for e in self.terms), default=-1)

    def depends_on(self, var: str) -> bool:
        if var not in self.vars:
            return False
        k = self.vars.index(var)
        return any(e[k] for e in self.terms)

    # ---------- alignment ----------
    def lift(self, vars: Iterable[str]) -> "SparsePoly":
        vars = tuple(vars)
        if vars == self.vars:
            return self
        idx = []
        for v in self.vars:
            if v not in vars:
                if self.depends_on(v):
                    raise InvalidParameter(f"cannot drop variable {v}")
                idx.append(None)
            else:
                idx.append(vars.index(v))
        out = {}
        for e, c in self.terms.items():
            ne = [0] * len(vars)
            for k, j in enumerate(idx):
                if j is not None:
                    ne[j] = e[k]
            out[tuple(ne)] = c
        return SparsePoly(vars, out, self.modulus, _clean=True)

    def with_modulus(self, modulus: int | None) -> "SparsePoly":
        if modulus == self.modulus:
            return self
        if modulus is None:
            return SparsePoly(self.vars, self.terms, None, _clean=True)
        if self.modulus is not None and self.modulus % modulus:
            raise InvalidParameter(f"cannot move from Z/{self.modulus} to Z/{modulus}")
        return SparsePoly(self.vars, self.terms, modulus)

    reduce_mod = with_modulus

    def _align(self, other: "SparsePoly") -> tuple["SparsePoly", "SparsePoly"]:
        a, b = self, other
        if a.vars != b.vars:
            vs = canonical_vars(a.vars + b.vars)
            a, b = a.lift(vs), b.lift(vs)
        if a.modulus != b.modulus:
            if a.modulus is None:
                a = a.with_modulus(b.modulus)
            elif b.modulus is None:
                b = b.with_modulus(a.modulus)
            else:
                m = min(a.modulus, b.modulus)
                a, b = a.with_modulus(m), b.with_modulus(m)
        return a, b

    def _coerce(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            return other
        if _is_scalar(other):
            return SparsePoly.const(other, self.vars, self.modulus)
        raise TypeError(f"cannot combine SparsePoly with {type(other).__name__}")

    # ---------- arithmetic ----------
    def __add__(self, other):
        if not isinstance(other, (SparsePoly,) + (int, Fraction, ResidueScalar)):
            return NotImplemented
        a, b = self._align(self._coerce(other))
        out = dict(a.terms)
        m = a.modulus
        for e, c in b.terms.items():
            v = out.get(e, 0) + c
            if m is not None:
                v %= m
            if v:
                out[e] = v
            else:
                out.pop(e, None)
        return SparsePoly(a.vars, out, m, _clean=True)

    __radd__ = __add__

    def __neg__(self):
        m = self.modulus
        if m is None:
            return SparsePoly(self.vars, {e: -c for e, c in self.terms.items()}, None, _clean=True)
        return SparsePoly(self.vars, {e: (-c) % m for e, c in self.terms.items()}, m, _clean=True)

    def __sub__(self, other):
        if not isinstance(other, (SparsePoly, int, Fraction, ResidueScalar)):
            return NotImplemented
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: Scalar) -> "SparsePoly":
        c = _reduce(c, self.modulus)
        if not c:
            return SparsePoly.zero(self.vars, self.modulus)
        return SparsePoly(self.vars, {e: v * c for e, v in self.terms.items()}, self.modulus)

    def __mul__(self, other):
        if _is_scalar(other):
            return self.scale(other)
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.mul_trunc(other)

    __rmul__ = __mul__

    def mul_trunc(self, other: "SparsePoly", var: str | None = None, cutoff: int | None = None,
                  total: tuple[str, ...] | None = None) -> "SparsePoly":
        """
        Product with truncation applied while multiplying:
          - var/cutoff: drop terms whose degree in ``var`` exceeds ``cutoff``
          - total/cutoff: drop terms whose total degree in the ``total`` variables exceeds ``cutoff``
        """
        a, b = self._align(other)
        m = a.modulus
        out: dict[tuple, Scalar] = {}
        get = out.get
        if cutoff is None:
            for e1, c1 in a.terms.items():
                for e2, c2 in b.terms.items():
                    e = tuple(map(_add, e1, e2))
                    out[e] = get(e, 0) + c1 * c2
        else:
            if var is not None:
                k = a.vars.index(var) if var in a.vars else None
                deg = (lambda e: e[k]) if k is not None else (lambda e: 0)
            else:
                ks = [a.vars.index(v) for v in (total or a.vars) if v in a.vars]
                deg = lambda e: sum(e[j] for j in ks)
            bl = [(e2, c2, deg(e2)) for e2, c2 in b.terms.items()]
            for e1, c1 in a.terms.items():
                d1 = deg(e1)
                if d1 > cutoff:
                    continue
                for e2, c2, d2 in bl:
                    if d1 + d2 > cutoff:
                        continue
                    e = tuple(map(_add, e1, e2))
                    out[e] = get(e, 0) + c1 * c2
        if m is not None:
            out = {e: c % m for e, c in out.items()}
            out = {e: c for e, c in out.items() if c}
        else:
            out = {e: c for e, c in out.items() if c}
        return SparsePoly(a.vars, out, m, _clean=True)

    def __pow__(self, e: int):
        return poly_pow(self, e)

    def __eq__(self, other):
        if _is_scalar(other):
            other = self._coerce(other)
        if not isinstance(other, SparsePoly):
            return NotImplemented
        a, b = self._align(other)
        return a.terms == b.terms

    def __hash__(self):
        if self._hash is None:
            vs = tuple(v for v in self.vars if self.depends_on(v))
            a = self.lift(vs) if vs != self.vars else self
            self._hash = hash((vs, frozenset(a.terms.items()), self.modulus))
        return self._hash

    # ---------- calculus / substitution ----------
    def diff(self, var: str) -> "SparsePoly":
        if var not in self.vars:
            return SparsePoly.zero(self.vars, self.modulus)
        k = self.vars.index(var)
        out = {}
        for e, c in self.terms.items():
            if e[k]:
                ne = list(e)
                ne[k] -= 1
                out[tuple(ne)] = c * e[k]
        return SparsePoly(self.vars, out, self.modulus)

    def substitute(self, mapping: Mapping[str, "SparsePoly | Scalar"],
                   cutoff: int | None = None, total: tuple[str, ...] | None = None) -> "SparsePoly":
        """Compose: replace each mapped variable by a polynomial (or scalar)."""
        keep = tuple(v for v in self.vars if v not in mapping)
        images = {}
        for v, img in mapping.items():
            if v not in self.vars:
                continue
            images[v] = img if isinstance(img, SparsePoly) else SparsePoly.const(img, (), self.modulus)
        powers: dict[tuple[str, int], SparsePoly] = {}

        def _pw(v: str, k: int) -> SparsePoly:
            key = (v, k)
            if key not in powers:
                if k == 0:
                    powers[key] = SparsePoly.const(1, (), self.modulus)
                else:
                    powers[key] = _mul(_pw(v, k - 1), images[v])
            return powers[key]

        def _mul(a, b):
            if cutoff is None:
                return a * b
            return a.mul_trunc(b, cutoff=cutoff, total=total)

        acc = SparsePoly.zero(keep, self.modulus)
        for e, c in self.terms.items():
            term = SparsePoly(keep, {tuple(x for v, x in zip(self.vars, e) if v not in mapping): c},
                              self.modulus)
            for v, x in zip(self.vars, e):
                if v in images and x:
                    term = _mul(term, _pw(v, x))
            acc = acc + term
        return acc

    def evaluate(self, values: Mapping[str, Scalar]):
        """Evaluate at scalars; returns a scalar when every variable is fixed."""
        res = self.substitute(values)
        if all(v in values for v in self.vars if self.depends_on(v)):
            return res.constant_term()
        return res

    # ---------- p-adic queries ----------
    def min_valuation(self, p: int) -> int | None:
        vals = [valuation(c, p) for c in self.terms.values()]
        return min(vals) if vals else None

    # ---------- exact division ----------
    def leading(self) -> tuple[tuple, Scalar]:
        return max(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))

    def divide_exact(self, divisor: "SparsePoly") -> "SparsePoly | None":
        """
        Quotient of an exact division (graded-lex division by a single
        divisor), or None when the divisor does not divide.
        """
        a, d = self._align(divisor)
        if d.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        m = a.modulus
        le, lc = d.leading()
        if m is not None:
            try:
                lc_inv = pow(lc, -1, m)
            except ValueError:
                return None
        q = SparsePoly.zero(a.vars, m)
        r = a
        while not r.is_zero():
            e, c = r.leading()
            if any(x < y for x, y in zip(e, le)):
                return None
            qe = tuple(x - y for x, y in zip(e, le))
            qc = c * lc_inv if m is not None else Fraction(c) / Fraction(lc)
            if m is None and isinstance(qc, Fraction) and qc.denominator == 1:
                qc = qc.numerator
            t = SparsePoly(a.vars, {qe: qc}, m)
            q = q + t
            r = r - t * d
        return q

    # ---------- display ----------
    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            mono = "*".join(v if x == 1 else f"{v}^{x}" for v, x in zip(self.vars, e) if x)
            parts.append(f"{c}*{mono}" if mono else f"{c}")
        s = " + ".join(parts)
        return s + (f" (mod {self.modulus})" if self.modulus else "")


# ─────────────────────────── [ER-4] poly_pow / coeff_of ────────────────────
def poly_pow(f: SparsePoly, e: int, cutoff: int | None = None, var: str = X) -> SparsePoly:
    """f^e by binary exponentiation; with ``cutoff`` every product drops
    ``var``-degrees above the cutoff."""
    if e < 0:
        raise InvalidParameter("negative exponent")

    def mul(a, b):
        if cutoff is None:
            return a * b
        return a.mul_trunc(b, var=var, cutoff=cutoff)

    result = SparsePoly.const(1, f.vars, f.modulus)
    base = f
    if cutoff is not None:
        base = SparsePoly.const(1, f.vars, f.modulus).mul_trunc(f, var=var, cutoff=cutoff)
    while e:
        if e & 1:
            result = mul(result, base)
        e >>= 1
        if e:
            base = mul(base, base)
    if f.modulus is not None and any(not (0 <= c < f.modulus) for c in result.terms.values()):
        raise InternalError("coefficient left the residue range during poly_pow")
    return result


def coeff_of(f: SparsePoly, var: str, k: int) -> SparsePoly:
    """Coefficient of var^k as a polynomial in the remaining variables."""
    if var not in f.vars:
        raise InvalidParameter(f"{var} is not a variable of the polynomial")
    j = f.vars.index(var)
    rest = f.vars[:j] + f.vars[j + 1:]
    out = {e[:j] + e[j + 1:]: c for e, c in f.terms.items() if e[j] == k}
    return SparsePoly(rest, out, f.modulus, _clean=True)


def linear_factors_product(vars: tuple[str, ...], roots: Iterable[str | int], modulus=None,
                           var: str = X) -> SparsePoly:
    """Π (var − r) for symbolic or integer roots r."""
    out = SparsePoly.const(1, vars, modulus)
    x = SparsePoly.var(var, vars, modulus)
    for r in roots:
        rr = SparsePoly.var(r, vars, modulus) if isinstance(r, str) else r
        out = out * (x - rr)
    return out


def bounded_compositions(total: int, bounds: Sequence[int]):
    """Tuples (j_1..j_n) with Σ j = total and 0 ≤ j_k ≤ bounds[k]."""
    if not bounds:
        if total == 0:
            yield ()
        return
    rest_cap = sum(bounds[1:])
    for j in range(max(0, total - rest_cap), min(bounds[0], total) + 1):
        for tail in bounded_compositions(total - j, bounds[1:]):
            yield (j,) + tail


def product_coefficient(vars: tuple[str, ...], bounds: Sequence[int], k: int, modulus=None) -> SparsePoly:
    """Coefficient of x^k in Π (x − v)^b over (v, b) in zip(vars, bounds), term by term."""
    J = sum(bounds) - k
    terms = {}
    if J >= 0:
        sign = -1 if J % 2 else 1
        for js in bounded_compositions(J, bounds):
            c = sign
            for b, j in zip(bounds, js):
                c *= comb(b, j)
            terms[js] = c
    return SparsePoly(tuple(vars), terms, modulus)


# ─────────────────────────── [ER-5] Factor + DiagRational ──────────────────
_DIFF_LABEL = re.compile(r"^z(\d+)-z(\d+)$")


@dataclass(frozen=True)
class Factor:
    """An allowed irreducible denominator: (z_i − z_j) with i < j, or det A."""
    label: str
    poly: SparsePoly

    @classmethod
    def diff(cls, i: int, j: int, modulus: int | None = None) -> "Factor":
        if not i < j:
            raise InvalidParameter("diagonal factors are stored as z_i - z_j with i < j")
        vs = (f"z{i}", f"z{j}")
        return cls(f"z{i}-z{j}", SparsePoly(vs, {(1, 0): 1, (0, 1): -1}, modulus))

    @classmethod
    def det(cls, poly: SparsePoly) -> "Factor":
        return cls("detA", poly)

    def with_modulus(self, modulus):
        return Factor(self.label, self.poly.with_modulus(modulus))

    def __hash__(self):
        return hash(self.label)

    def __eq__(self, other):
        return isinstance(other, Factor) and self.label == other.label


def _allowed(f: Factor) -> bool:
    m = _DIFF_LABEL.match(f.label)
    if m:
        return int(m.group(1)) < int(m.group(2))
    return f.label == "detA"


class DiagRational:
    """
    numerator / Π factor^mult with factors drawn from {(z_i − z_j), det A}.
    Denominators stay factored so membership in O(S) / O(D) is syntactic.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: SparsePoly, den: Mapping[Factor, int] | None = None):
        den = {f: k for f, k in (den or {}).items() if k}
        for f, k in den.items():
            if not _allowed(f):
                raise InvalidParameter(f"denominator factor {f.label} is outside the allowed set")
            if k < 0:
                raise InvalidParameter("negative multiplicity")
        if num.is_zero():
            den = {}
        self.num = num
        self.den = den

    # ---------- constructors ----------
    @classmethod
    def of(cls, x, vars=(), modulus=None) -> "DiagRational":
        if isinstance(x, DiagRational):
            return x
        if isinstance(x, SparsePoly):
            return cls(x)
        return cls(SparsePoly.const(x, vars, modulus))

    @classmethod
    def inv_diff(cls, i: int, j: int, vars=(), modulus=None) -> "DiagRational":
        """1 / (z_i − z_j)."""
        if i == j:
            raise InvalidParameter("z_i - z_i is not invertible")
        lo, hi = min(i, j), max(i, j)
        sign = 1 if i < j else -1
        return cls(SparsePoly.const(sign, vars, modulus), {Factor.diff(lo, hi, modulus): 1})

    @property
    def modulus(self):
        return self.num.modulus

    def denominator_poly(self) -> SparsePoly:
        out = SparsePoly.const(1, self.num.vars, self.num.modulus)
        for f, k in sorted(self.den.items(), key=lambda kv: kv[0].label):
            out = out * poly_pow(f.poly.with_modulus(self.num.modulus), k)
        return out

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_zero_mod(self, modulus: int) -> bool:
        """Cleared numerator ≡ 0 mod ``modulus`` coefficientwise."""
        return self.num.with_modulus(modulus).is_zero()

    def _coerce(self, other) -> "DiagRational":
        if isinstance(other, DiagRational):
            return other
        if isinstance(other, SparsePoly):
            return DiagRational(other)
        if _is_scalar(other):
            return DiagRational(SparsePoly.const(other, self.num.vars, self.num.modulus))
        raise TypeError(f"cannot combine DiagRational with {type(other).__name__}")

    # ---------- arithmetic ----------
    def __add__(self, other):
        if not isinstance(other, (DiagRational, SparsePoly, int, Fraction, ResidueScalar)):
            return NotImplemented
        o = self._coerce(other)
        if o.is_zero():
            return self
        if self.is_zero():
            return o
        common = dict(self.den)
        for f, k in o.den.items():
            common[f] = max(common.get(f, 0), k)
        a = self.num
        for f, k in common.items():
            extra = k - self.den.get(f, 0)
            if extra:
                a = a * poly_pow(f.poly, extra)
        b = o.num
        for f, k in common.items():
            extra = k - o.den.get(f, 0)
            if extra:
                b = b * poly_pow(f.poly, extra)
        return DiagRational(a + b, common)

    __radd__ = __add__

    def __neg__(self):
        return DiagRational(-self.num, self.den)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, (DiagRational, SparsePoly, int, Fraction, ResidueScalar)):
            return NotImplemented
        o = self._coerce(other)
        den = dict(self.den)
        for f, k in o.den.items():
            den[f] = den.get(f, 0) + k
        return DiagRational(self.num * o.num, den)

    __rmul__ = __mul__

    def __eq__(self, other):
        try:
            return (self - other).is_zero()
        except TypeError:
            return NotImplemented

    __hash__ = None

    def with_modulus(self, modulus) -> "DiagRational":
        return DiagRational(self.num.with_modulus(modulus),
                            {f.with_modulus(modulus): k for f, k in self.den.items()})

    def cancel(self) -> "DiagRational":
        """Divide out every factor that divides the numerator."""
        num = self.num
        den = dict(self.den)
        for f in list(den):
            while den[f] and not num.is_zero():
                q = num.divide_exact(f.poly)
                if q is None:
                    break
                num = q
                den[f] -= 1
        return DiagRational(num, den)

    def evaluate(self, values: Mapping[str, int], modulus: int | None = None):
        """Value at an integer point; mod ``modulus`` when given, else exact."""
        num = self.num.evaluate(values)
        den = self.denominator_poly().evaluate(values)
        if isinstance(num, SparsePoly) or isinstance(den, SparsePoly):
            raise InvalidParameter("evaluate needs a value for every variable")
        m = modulus if modulus is not None else self.num.modulus
        if m is None:
            if den == 0:
                raise NonInvertibleDifference("denominator vanishes at the point")
            return Fraction(num) / Fraction(den)
        try:
            return (int(_reduce(num, m)) * pow(int(_reduce(den, m)), -1, m)) % m
        except ValueError:
            raise NonInvertibleDifference(f"denominator is not a unit mod {m} at the point") from None

    def __repr__(self):
        if not self.den:
            return f"({self.num})"
        d = " * ".join(f"({f.label})^{k}" for f, k in sorted(self.den.items(), key=lambda kv: kv[0].label))
        return f"({self.num}) / [{d}]"


def d_dz(r: DiagRational | SparsePoly, i: int) -> DiagRational:
    """Exact partial derivative in z_i; each factor containing z_i gains one power."""
    r = DiagRational.of(r)
    v = f"z{i}"
    touched = [f for f in r.den if f.poly.depends_on(v)]
    num = r.num.diff(v)
    for f in touched:
        num = num * f.poly
    for f in touched:
        part = r.num * f.poly.diff(v) * r.den[f]
        for g in touched:
            if g is not f:
                part = part * g.poly
        num = num - part
    den = dict(r.den)
    for f in touched:
        den[f] += 1
    return DiagRational(num, den)


# ───────────────────────────── [ER-6] TruncSeries ──────────────────────────
class TruncSeries:
    """
    Power series in t_1..t_n known up to total degree ``cutoff`` with
    coefficients in Z/p^k; ``precision`` ≤ k is the certified p-adic precision.
    """

    __slots__ = ("poly", "cutoff", "p", "precision")

    def __init__(self, poly: SparsePoly, cutoff: int, p: int, precision: int | None = None):
        k = _exponent_of(poly.modulus, p)
        if precision is None:
            precision = k
        if precision > k:
            raise InvalidParameter("certified precision exceeds the working modulus")
        tv = tuple(v for v in poly.vars if v.startswith("t"))
        if len(tv) != len(poly.vars):
            raise InvalidParameter(f"series variables must be t_i, got {poly.vars}")
        self.poly = SparsePoly(poly.vars, {e: c for e, c in poly.terms.items() if sum(e) <= cutoff},
                               poly.modulus, _clean=True)
        self.cutoff = cutoff
        self.p = p
        self.precision = precision

    # ---------- constructors ----------
    @classmethod
    def from_poly(cls, poly: SparsePoly, n: int, cutoff: int, p: int, k: int) -> "TruncSeries":
        return cls(poly.lift(t_vars(n)).with_modulus(p ** k) if poly.modulus != p ** k
                   else poly.lift(t_vars(n)), cutoff, p)

    @classmethod
    def const(cls, c, n: int, cutoff: int, p: int, k: int) -> "TruncSeries":
        return cls(SparsePoly.const(c, t_vars(n), p ** k), cutoff, p)

    @classmethod
    def var(cls, i: int, n: int, cutoff: int, p: int, k: int) -> "TruncSeries":
        return cls(SparsePoly.var(f"t{i}", t_vars(n), p ** k), cutoff, p)

    @property
    def n(self) -> int:
        return len(self.poly.vars)

    @property
    def modulus(self) -> int:
        return self.poly.modulus

    def _coerce(self, other) -> "TruncSeries":
        if isinstance(other, TruncSeries):
            return other
        if _is_scalar(other):
            return TruncSeries(SparsePoly.const(other, self.poly.vars, self.modulus), self.cutoff,
                               self.p, self.precision)
        raise TypeError(f"cannot combine TruncSeries with {type(other).__name__}")

    def _meet(self, o: "TruncSeries") -> tuple[int, int]:
        return min(self.cutoff, o.cutoff), min(self.precision, o.precision)

    def __add__(self, other):
        if not isinstance(other, (TruncSeries, int, Fraction, ResidueScalar)):
            return NotImplemented
        o = self._coerce(other)
        n, pr = self._meet(o)
        return TruncSeries(self.poly + o.poly, n, self.p, pr)

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries(-self.poly, self.cutoff, self.p, self.precision)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if _is_scalar(other):
            return TruncSeries(self.poly.scale(other), self.cutoff, self.p, self.precision)
        if not isinstance(other, TruncSeries):
            return NotImplemented
        n, pr = self._meet(other)
        return TruncSeries(self.poly.mul_trunc(other.poly, cutoff=n), n, self.p, pr)

    __rmul__ = __mul__

    def derivative(self, i: int) -> "TruncSeries":
        return TruncSeries(self.poly.diff(f"t{i}"), self.cutoff - 1, self.p, self.precision)

    def inverse(self) -> "TruncSeries":
        c0 = self.poly.constant_term()
        if c0 % self.p == 0:
            raise NotAUnit("constant term of the series is not a unit")
        inv0 = pow(c0, -1, self.modulus)
        u = self * inv0 - 1          # no constant term
        r = TruncSeries.const(1, self.n, self.cutoff, self.p, _exponent_of(self.modulus, self.p))
        for _ in range(self.cutoff):
            r = 1 - u * r
        return TruncSeries(r.poly.scale(inv0), self.cutoff, self.p, self.precision)

    def coefficient(self, exp: tuple) -> int:
        return self.poly.terms.get(tuple(exp), 0)

    def is_zero(self) -> bool:
        return self.poly.is_zero()

    def is_zero_mod(self, modulus: int) -> bool:
        return self.poly.with_modulus(modulus).is_zero()

    def truncate(self, cutoff: int) -> "TruncSeries":
        return TruncSeries(self.poly, min(cutoff, self.cutoff), self.p, self.precision)

    def reduce(self, precision: int) -> "TruncSeries":
        precision = min(precision, self.precision)
        return TruncSeries(self.poly.with_modulus(self.p ** precision), self.cutoff, self.p, precision)

    def __eq__(self, other):
        if not isinstance(other, TruncSeries):
            return NotImplemented
        n = min(self.cutoff, other.cutoff)
        m = min(self.modulus, other.modulus)
        return self.truncate(n).poly.with_modulus(m) == other.truncate(n).poly.with_modulus(m)

    __hash__ = None

    def __repr__(self):
        return f"{self.poly} + O(t^{self.cutoff + 1}) [prec {self.p}^{self.precision}]"


def _exponent_of(modulus: int | None, p: int) -> int:
    if modulus is None:
        raise InvalidParameter("series need a residue modulus")
    k, m = 0, modulus
    while m % p == 0:
        m //= p
        k += 1
    if m != 1:
        raise InvalidParameter(f"modulus {modulus} is not a power of {p}")
    return k


# ───────────────────────────── [ER-7] canonical JSON ───────────────────────
def _mod_label(modulus: int | None) -> str | None:
    if modulus is None:
        return None
    pp = perfect_power(modulus)
    if pp:
        return f"{pp[0]}^{pp[1]}"
    return f"{modulus}^1"


def _coeff_str(c) -> str:
    if isinstance(c, Fraction):
        return f"{c.numerator}/{c.denominator}" if c.denominator != 1 else str(c.numerator)
    return str(int(c))


def to_json_obj(obj) -> dict:
    """Canonical JSON form of a SparsePoly or TruncSeries."""
    if isinstance(obj, TruncSeries):
        d = to_json_obj(obj.poly)
        d["cutoff"] = obj.cutoff
        d["precision"] = f"{obj.p}^{obj.precision}"
        return d
    if isinstance(obj, SparsePoly):
        return {
            "vars": list(obj.vars),
            "terms": [{"exp": list(e), "c": _coeff_str(c)} for e, c in obj.sorted_terms()],
            "mod": _mod_label(obj.modulus),
        }
    if isinstance(obj, DiagRational):
        return {
            "num": to_json_obj(obj.num),
            "den": [{"factor": f.label, "mult": k} for f, k in sorted(obj.den.items(), key=lambda kv: kv[0].label)],
        }
    raise TypeError(f"no canonical JSON form for {type(obj).__name__}")


_INT64 = 1 << 63


def _plain(obj):
    """Integers outside int64 and Fractions become decimal strings; tuples become lists."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, int):
        return obj if -_INT64 <= obj < _INT64 else str(obj)
    if isinstance(obj, Fraction):
        return _coeff_str(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (SparsePoly, TruncSeries, DiagRational)):
        return to_json_obj(obj)
    return obj


def dumps(obj, indent: bool = False) -> bytes:
    opt = orjson.OPT_SORT_KEYS | (orjson.OPT_INDENT_2 if indent else 0)
    return orjson.dumps(_plain(obj), option=opt)


def poly_from_json(data: dict | bytes | str) -> SparsePoly:
    if not isinstance(data, dict):
        data = orjson.loads(data)
    modulus = None
    if data.get("mod"):
        p, s = (int(x) for x in data["mod"].split("^"))
        modulus = p ** s
    terms = {}
    for t in data["terms"]:
        c = Fraction(t["c"])
        terms[tuple(t["exp"])] = c if c.denominator != 1 else c.numerator
    return SparsePoly(data["vars"], terms, modulus)


def series_from_json(data: dict | bytes | str, p: int | None = None) -> TruncSeries:
    if not isinstance(data, dict):
        data = orjson.loads(data)
    poly = poly_from_json(data)
    pp, prec = (int(x) for x in data["precision"].split("^")) if data.get("precision") else (p, None)
    return TruncSeries(poly, int(data["cutoff"]), pp or p, prec)
