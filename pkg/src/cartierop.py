# src/cartierop.py
# Cartier operator on truncated closed 1-forms over F_p[[t_1..t_n]].
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .errors import CutoffTooSmall, InvalidParameter, NotClosed, WitnessMismatch
from .exactring import SparsePoly, TruncSeries, t_vars


@dataclass(frozen=True)
class TruncOneForm:
    """Σ f_i dt_i with every f_i known to total degree ``cutoff``."""
    components: tuple[TruncSeries, ...]
    cutoff: int

    def __post_init__(self):
        if not self.components:
            raise InvalidParameter("a 1-form needs at least one component")

    @classmethod
    def of(cls, components: Sequence[TruncSeries]) -> "TruncOneForm":
        comps = tuple(components)
        cutoff = min(c.cutoff for c in comps)
        return cls(tuple(c.truncate(cutoff) for c in comps), cutoff)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.components[0].p

    def __add__(self, other: "TruncOneForm") -> "TruncOneForm":
        return TruncOneForm.of([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other: "TruncOneForm") -> "TruncOneForm":
        return TruncOneForm.of([a - b for a, b in zip(self.components, other.components)])

    def scale(self, u: TruncSeries) -> "TruncOneForm":
        return TruncOneForm.of([u * c for c in self.components])

    def mod_p(self) -> "TruncOneForm":
        return TruncOneForm.of([c.reduce(1) for c in self.components])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def is_closed(self) -> bool:
        """∂_i f_j = ∂_j f_i through degree cutoff − 1."""
        for i in range(1, self.n + 1):
            for j in range(i + 1, self.n + 1):
                a = self.components[j - 1].derivative(i)
                b = self.components[i - 1].derivative(j)
                if a != b:
                    return False
        return True

    def __eq__(self, other):
        if not isinstance(other, TruncOneForm):
            return NotImplemented
        return all(a == b for a, b in zip(self.components, other.components))

    __hash__ = None


def d(h: TruncSeries) -> TruncOneForm:
    return TruncOneForm.of([h.derivative(i) for i in range(1, h.n + 1)])


def certified_degree(N: int, p: int) -> int:
    return (N - p + 1) // p


def cartier(eta: TruncOneForm) -> TruncOneForm:
    """
    C(η): the dt_i-component at exponent α is the coefficient of
    t^{pα + (p−1)e_i} in f_i, reduced mod p.
    """
    p = eta.p
    N = eta.cutoff
    if N < p - 1:
        raise CutoffTooSmall(f"cutoff {N} < p - 1 = {p - 1}")
    eta = eta.mod_p()
    if not eta.is_closed():
        raise NotClosed("the Cartier operator needs a closed form")
    out_deg = certified_degree(N, p)
    vs = t_vars(eta.n)
    comps = []
    for i, f in enumerate(eta.components):
        terms = {}
        for e, c in f.poly.terms.items():
            shifted = list(e)
            shifted[i] -= p - 1
            if shifted[i] < 0 or any(x % p for x in shifted):
                continue
            alpha = tuple(x // p for x in shifted)
            if sum(alpha) <= out_deg:
                terms[alpha] = c
        comps.append(TruncSeries(SparsePoly(vs, terms, p), out_deg, p))
    return TruncOneForm(tuple(comps), out_deg)


def iterate_cartier(eta: TruncOneForm, k: int) -> list[TruncOneForm]:
    """[C(η), C²(η), …, C^k(η)]; each step shrinks the certified degree."""
    out = []
    cur = eta
    for _ in range(k):
        cur = cartier(cur)
        out.append(cur)
    return out


def dlog(q: TruncSeries) -> TruncOneForm:
    """dq/q; needs q(0) to be a unit."""
    inv = q.inverse()
    return TruncOneForm.of([q.derivative(i) * inv for i in range(1, q.n + 1)])


# ---------------- exact-witness congruence ----------------
def witness_form(g: TruncSeries, s: int) -> TruncOneForm:
    """η = dg / p^s mod p for a witness g over Z/p^{s+1}."""
    p = g.p
    if g.modulus % p ** (s + 1):
        raise WitnessMismatch(f"witness must live over Z/{p}^{s + 1}")
    dg = d(g.reduce(s + 1))
    comps = []
    for c in dg.components:
        if any(v % p ** s for v in c.poly.terms.values()):
            raise WitnessMismatch(f"dg is not divisible by {p}^{s}")
        terms = {e: v // p ** s for e, v in c.poly.terms.items()}
        comps.append(TruncSeries(SparsePoly(c.poly.vars, terms, p), c.cutoff, p))
    return TruncOneForm.of(comps)


def lemma_cd_check(eta: TruncOneForm, s: int, witness: TruncSeries | None = None) -> dict:
    """C^{s+1}(η) = 0 through the certified degree when p^s·η is exact."""
    p = eta.p
    if witness is not None:
        expected = witness_form(witness, s)
        got = eta.mod_p()
        cutoff = min(expected.cutoff, got.cutoff)
        same = all(a.truncate(cutoff) == b.truncate(cutoff)
                   for a, b in zip(expected.components, got.components))
        if not same:
            raise WitnessMismatch("dg != p^s * eta")
    N = eta.cutoff
    degrees = []
    for _ in range(s + 1):
        if N < p - 1:
            raise CutoffTooSmall(f"cutoff {N} is too small for {s + 1} Cartier steps at p = {p}")
        N = certified_degree(N, p)
        degrees.append(N)
    steps = iterate_cartier(eta, s + 1)
    return {
        "p": p, "s": s, "cutoff": eta.cutoff, "certified_degrees": degrees,
        "steps_zero": [st.is_zero() for st in steps],
        "pass": steps[-1].is_zero(),
    }


def random_series(n: int, cutoff: int, p: int, k: int, rng: random.Random,
                  density: int = 6, unit: bool = False) -> TruncSeries:
    """Sparse random series over Z/p^k (constant term a unit when ``unit``)."""
    vs = t_vars(n)
    terms = {}
    for _ in range(density):
        deg = rng.randint(1, max(1, cutoff))
        e = [0] * n
        for _ in range(deg):
            e[rng.randrange(n)] += 1
        terms[tuple(e)] = rng.randrange(p ** k)
    if unit:
        terms[(0,) * n] = rng.randrange(1, p)
    return TruncSeries(SparsePoly(vs, terms, p ** k), cutoff, p)


def random_witness(n: int, cutoff: int, p: int, s: int, rng: random.Random) -> TruncSeries:
    """g = u^{p^s} + p^s·v over Z/p^{s+1}, with u of degree <= cutoff/p^s."""
    k = s + 1
    u_deg = max(1, cutoff // p ** s)
    u = random_series(n, u_deg, p, k, rng, density=3)
    u = TruncSeries(u.poly, cutoff, p)
    v = random_series(n, cutoff, p, k, rng)
    upow = TruncSeries.const(1, n, cutoff, p, k)
    for _ in range(p ** s):
        upow = upow * u
    return upow + v * (p ** s)


def dlog_fixed_point(q: TruncSeries) -> bool:
    """C(dq/q) = dq/q mod p through the certified degree."""
    eta = dlog(q.reduce(1))
    c = cartier(eta)
    return all(a == b.truncate(c.cutoff) for a, b in zip(c.components, eta.components))
