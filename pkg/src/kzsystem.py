# src/kzsystem.py
# KZ system 2∂_i I = H_i I on the sum-zero fiber, with H_i = Σ_{j≠i} Ω_ij/(z_i − z_j).
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

from .errors import InvalidParameter, NonInvertibleDifference, SumZeroViolation
from .exactring import DiagRational, SparsePoly, TruncSeries, d_dz

InvDiff = Callable[[int, int], Any]


# ---------------- fiber ----------------
def _is_zero(x, modulus: int | None) -> bool:
    if isinstance(x, (int,)):
        return x % modulus == 0 if modulus else x == 0
    if modulus is not None:
        if isinstance(x, SparsePoly):
            return x.with_modulus(modulus).is_zero()
        return x.is_zero_mod(modulus)
    return x.is_zero()


class KZVector:
    """
    Entries v_1..v_n (SparsePoly, DiagRational or TruncSeries). The entries sum
    to zero; with ``modulus`` the sum only has to vanish mod that modulus.
    Indices are 1-based in every public call.
    """

    __slots__ = ("entries", "modulus")

    def __init__(self, entries: Sequence, modulus: int | None = None, check: bool = True):
        self.entries = tuple(entries)
        self.modulus = modulus
        if len(self.entries) < 2:
            raise InvalidParameter("a KZ vector needs n >= 2 entries")
        if check:
            total = self.entries[0]
            for e in self.entries[1:]:
                total = total + e
            if not _is_zero(total, modulus):
                raise SumZeroViolation("entries of a KZ vector must sum to zero")

    @property
    def n(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int):
        return self.entries[i - 1]

    def __iter__(self):
        return iter(self.entries)

    def __add__(self, other: "KZVector") -> "KZVector":
        return KZVector([a + b for a, b in zip(self.entries, other.entries)],
                        _meet(self.modulus, other.modulus), check=False)

    def __sub__(self, other: "KZVector") -> "KZVector":
        return KZVector([a - b for a, b in zip(self.entries, other.entries)],
                        _meet(self.modulus, other.modulus), check=False)

    def scale(self, c) -> "KZVector":
        return KZVector([e * c for e in self.entries], self.modulus, check=False)

    def is_zero(self) -> bool:
        return all(_is_zero(e, None) for e in self.entries)

    def is_zero_mod(self, modulus: int) -> bool:
        return all(_is_zero(e, modulus) for e in self.entries)

    def __repr__(self):
        return f"KZVector({list(self.entries)!r})"


def _meet(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _vars_of(v: KZVector) -> tuple[tuple, int | None]:
    e = v.entries[0]
    if isinstance(e, DiagRational):
        return e.num.vars, e.num.modulus
    if isinstance(e, SparsePoly):
        return e.vars, e.modulus
    return (), None


# ---------------- Ω_ij ----------------
def omega_apply(i: int, j: int, v: KZVector) -> KZVector:
    if i == j:
        raise InvalidParameter("Omega_ij needs i != j")
    n = v.n
    if not (1 <= i <= n and 1 <= j <= n):
        raise InvalidParameter(f"indices ({i}, {j}) out of range 1..{n}")
    zero = v[i] - v[i]
    out = [zero] * n
    out[i - 1] = v[j] - v[i]
    out[j - 1] = v[i] - v[j]
    return KZVector(out, v.modulus, check=False)


# ---------------- Gaudin Hamiltonians ----------------
@dataclass(frozen=True)
class GaudinOperator:
    """
    H_i acting on KZ vectors. ``inv_diff(i, j)`` supplies 1/(z_i − z_j) in the
    coefficient domain; when omitted the symbolic DiagRational is used.
    """
    i: int
    n: int
    inv_diff: InvDiff | None = None
    domain: str = "symbolic"

    def coefficient(self, j: int, vars=(), modulus=None):
        if self.inv_diff is not None:
            c = self.inv_diff(self.i, j)
            if c is None:
                raise NonInvertibleDifference(f"z{self.i} - z{j} is not a unit")
            return c
        return DiagRational.inv_diff(self.i, j, vars, modulus)

    def apply(self, v: KZVector) -> KZVector:
        if v.n != self.n:
            raise InvalidParameter(f"vector has {v.n} entries, operator expects {self.n}")
        i = self.i
        vars, modulus = _vars_of(v)
        zero = v[i] - v[i]
        out = [zero] * self.n
        acc = zero
        for j in range(1, self.n + 1):
            if j == i:
                continue
            c = self.coefficient(j, vars, modulus)
            d = (v[i] - v[j]) * c
            out[j - 1] = d
            acc = acc - d
        out[i - 1] = acc
        return KZVector(out, v.modulus, check=False)


def gaudin_apply(i: int, v: KZVector, inv_diff: InvDiff | None = None) -> KZVector:
    return GaudinOperator(i, v.n, inv_diff).apply(v)


# ---------------- residual ----------------
def partial(e, i: int):
    """∂/∂z_i for polynomial / rational entries, ∂/∂t_i for series."""
    if isinstance(e, TruncSeries):
        return e.derivative(i)
    return d_dz(e, i)


def kz_residual(I: KZVector, i: int, modulus: int | None = None,
                inv_diff: InvDiff | None = None) -> KZVector:
    """2·∂_i I − H_i I, computed exactly. ``modulus`` only tags the result."""
    H = gaudin_apply(i, I, inv_diff)
    out = [partial(e, i) * 2 - h for e, h in zip(I.entries, H.entries)]
    return KZVector(out, modulus if modulus is not None else I.modulus, check=False)


def residual_valuation_min(res: KZVector, p: int) -> int | None:
    """Minimum p-adic valuation of the cleared numerators; None when exactly zero."""
    vals = []
    for e in res.entries:
        poly = e.num if isinstance(e, DiagRational) else (e.poly if isinstance(e, TruncSeries) else e)
        v = poly.min_valuation(p)
        if v is not None:
            vals.append(v)
    return min(vals) if vals else None


def _split_valuation(I: KZVector, i: int, p: int) -> int | None:
    """
    Minimum residual valuation for polynomial entries without building H_i.
    Component j ≠ i clears to 2(z_i − z_j)∂_iQ_j − (Q_i − Q_j); component i is
    2∂_i(ΣQ) minus those over (z_i − z_j), and the z_i − z_j are primitive.
    """
    vars, modulus = _vars_of(I)
    zi = f"z{i}"
    z = [SparsePoly.var(f"z{k}", vars, modulus) for k in range(1, I.n + 1)]
    vals = []
    for j in range(1, I.n + 1):
        if j == i:
            continue
        num = (z[i - 1] - z[j - 1]) * I[j].diff(zi) * 2 - (I[i] - I[j])
        vals.append(num.min_valuation(p))
    total = I.entries[0]
    for e in I.entries[1:]:
        total = total + e
    vals.append(total.diff(zi).min_valuation(p))
    vals = [v for v in vals if v is not None]
    return min(vals) if vals else None


def _polynomial_entries(I: KZVector) -> bool:
    vars, _ = _vars_of(I)
    return (all(isinstance(e, SparsePoly) for e in I.entries)
            and all(f"z{k}" in vars for k in range(1, I.n + 1)))


def verify_flatness(I: KZVector, p: int, s: int) -> list[dict]:
    """One record per equation index: residual valuation and verdict mod p^s."""
    split = _polynomial_entries(I)
    out = []
    for i in range(1, I.n + 1):
        v = _split_valuation(I, i, p) if split else residual_valuation_min(kz_residual(I, i), p)
        out.append({"i": i, "residual_valuation_min": v, "pass": v is None or v >= s})
    return out
