# src/modlinalg.py — linear algebra over the local ring Z/p^s
# Matrices are lists of int rows. Every routine reduces its input first.
from __future__ import annotations

from dataclasses import dataclass

from sympy import Matrix

from .errors import InvalidParameter, NotOnto
from .exactring import valuation

Mat = list[list[int]]


# ---------------- helpers ----------------
def reduce_matrix(rows, m: int) -> Mat:
    return [[int(x) % m for x in row] for row in rows]


def identity(n: int) -> Mat:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def mat_mul(a: Mat, b: Mat, m: int | None = None) -> Mat:
    if not a:
        return []
    cols = len(b[0]) if b else 0
    out = []
    for row in a:
        r = [sum(row[k] * b[k][j] for k in range(len(b))) for j in range(cols)]
        out.append([x % m for x in r] if m else r)
    return out


def mat_vec(a: Mat, v: list[int], m: int | None = None) -> list[int]:
    out = [sum(x * y for x, y in zip(row, v)) for row in a]
    return [x % m for x in out] if m else out


def transpose(a: Mat) -> Mat:
    return [list(col) for col in zip(*a)] if a else []


def _val(x: int, p: int, s: int) -> int:
    return valuation(x % p ** s, p, cap=s)


# ---------------- rank over F_p ----------------
def rank_mod_p(rows, p: int) -> int:
    a = reduce_matrix(rows, p)
    if not a:
        return 0
    r = 0
    ncols = len(a[0])
    for c in range(ncols):
        piv = next((i for i in range(r, len(a)) if a[i][c]), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = pow(a[r][c], -1, p)
        a[r] = [(x * inv) % p for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [(x - f * y) % p for x, y in zip(a[i], a[r])]
        r += 1
        if r == len(a):
            break
    return r


# ---------------- Smith-style elimination ----------------
@dataclass
class SmithForm:
    """U·A·C ≡ diag(p^v_0, …, p^v_{r−1}, 0, …) mod p^s with U, C unimodular."""
    p: int
    s: int
    vals: list[int]
    U: Mat
    C: Mat
    nrows: int
    ncols: int

    @property
    def rank(self) -> int:
        return len(self.vals)

    @property
    def unit_rank(self) -> int:
        return sum(1 for v in self.vals if v == 0)

    @property
    def is_free(self) -> bool:
        """The column span is a free direct summand."""
        return all(v == 0 for v in self.vals)


def smith(rows, p: int, s: int) -> SmithForm:
    m = p ** s
    a = reduce_matrix(rows, m)
    nr = len(a)
    nc = len(a[0]) if nr else 0
    U = identity(nr)
    C = identity(nc)
    vals: list[int] = []
    k = 0
    while k < min(nr, nc):
        best = None
        for i in range(k, nr):
            for j in range(k, nc):
                if a[i][j]:
                    v = _val(a[i][j], p, s)
                    if best is None or v < best[0]:
                        best = (v, i, j)
                        if v == 0:
                            break
            if best and best[0] == 0:
                break
        if best is None:
            break
        v, i, j = best
        a[k], a[i] = a[i], a[k]
        U[k], U[i] = U[i], U[k]
        if j != k:
            for row in a:
                row[k], row[j] = row[j], row[k]
            for row in C:
                row[k], row[j] = row[j], row[k]
        pv = p ** v
        unit = (a[k][k] // pv) % m
        inv = pow(unit, -1, m)
        a[k] = [(x * inv) % m for x in a[k]]
        U[k] = [(x * inv) % m for x in U[k]]
        for i2 in range(nr):
            if i2 != k and a[i2][k]:
                f = a[i2][k] // pv
                a[i2] = [(x - f * y) % m for x, y in zip(a[i2], a[k])]
                U[i2] = [(x - f * y) % m for x, y in zip(U[i2], U[k])]
        for j2 in range(k + 1, nc):
            if a[k][j2]:
                f = a[k][j2] // pv
                for row in a:
                    row[j2] = (row[j2] - f * row[k]) % m
                for row in C:
                    row[j2] = (row[j2] - f * row[k]) % m
        vals.append(v)
        k += 1
    return SmithForm(p, s, vals, U, C, nr, nc)


def solve(a, b: list[int], p: int, s: int) -> list[int] | None:
    """Some x with A·x ≡ b mod p^s, or None."""
    m = p ** s
    sf = smith(a, p, s)
    ub = mat_vec(sf.U, [x % m for x in b], m)
    y = [0] * sf.ncols
    for k, v in enumerate(sf.vals):
        if ub[k] % p ** v:
            return None
        y[k] = ub[k] // p ** v
    if any(ub[k] for k in range(sf.rank, sf.nrows)):
        return None
    return mat_vec(sf.C, y, m)


def in_span(vectors: list[list[int]], target: list[int], p: int, s: int) -> bool:
    if not vectors:
        return all(x % p ** s == 0 for x in target)
    return solve(transpose(vectors), target, p, s) is not None


def kernel(a, p: int, s: int) -> list[list[int]]:
    """Generators of {x : A·x ≡ 0 mod p^s}."""
    m = p ** s
    sf = smith(a, p, s)
    cols = transpose(sf.C) if sf.ncols else []
    gens = []
    for k, v in enumerate(sf.vals):
        if v > 0:
            gens.append([(p ** (s - v) * x) % m for x in cols[k]])
    for k in range(sf.rank, sf.ncols):
        gens.append(list(cols[k]))
    return [g for g in gens if any(g)]


# ---------------- Howell form ----------------
def howell_form(rows, p: int, s: int) -> Mat:
    """Canonical generating set of the row span over Z/p^s."""
    m = p ** s
    work = [r for r in reduce_matrix(rows, m) if any(r)]
    if not work:
        return []
    ncols = len(work[0])
    result: list[tuple[int, int, list[int]]] = []
    for col in range(ncols):
        cands = [r for r in work if r[col]]
        if not cands:
            continue
        piv = min(cands, key=lambda r: _val(r[col], p, s))
        work = [r for r in work if r is not piv]
        v = _val(piv[col], p, s)
        pv = p ** v
        inv = pow((piv[col] // pv) % m, -1, m)
        piv = [(x * inv) % m for x in piv]
        nxt = []
        for r in work:
            if r[col]:
                f = r[col] // pv
                r = [(x - f * y) % m for x, y in zip(r, piv)]
            if any(r):
                nxt.append(r)
        if v > 0:
            extra = [(p ** (s - v) * x) % m for x in piv]
            if any(extra):
                nxt.append(extra)
        work = nxt
        result.append((col, pv, piv))
    rows_out = [r for _, _, r in result]
    for i, (col, pv, r) in enumerate(result):
        for j in range(i):
            q = rows_out[j][col] // pv
            if q:
                rows_out[j] = [(x - q * y) % m for x, y in zip(rows_out[j], r)]
    return rows_out


# ---------------- unit-pivot echelon ----------------
def rref_unit_pivots(rows, p: int, s: int) -> tuple[Mat, list[int]]:
    """
    Reduced echelon form with unit pivots normalized to 1, pivot columns chosen
    by smallest index. Raises NotOnto when some row has no unit pivot left.
    """
    m = p ** s
    a = reduce_matrix(rows, m)
    pivots: list[int] = []
    ncols = len(a[0]) if a else 0
    for r in range(len(a)):
        col = next((c for c in range(ncols) if c not in pivots
                    and any(a[i][c] % p for i in range(r, len(a)))), None)
        if col is None:
            raise NotOnto(f"no unit pivot for row {r + 1} of {len(a)}")
        i = next(i for i in range(r, len(a)) if a[i][col] % p)
        a[r], a[i] = a[i], a[r]
        inv = pow(a[r][col], -1, m)
        a[r] = [(x * inv) % m for x in a[r]]
        for i2 in range(len(a)):
            if i2 != r and a[i2][col]:
                f = a[i2][col]
                a[i2] = [(x - f * y) % m for x, y in zip(a[i2], a[r])]
        pivots.append(col)
    order = sorted(range(len(pivots)), key=lambda k: pivots[k])
    return [a[k] for k in order], [pivots[k] for k in order]


def normalized_kernel(rows, p: int, s: int) -> list[list[int]]:
    """Free kernel basis of a surjective matrix: one vector per free column,
    entry 1 there and 0 at the other free columns."""
    m = p ** s
    R, pivots = rref_unit_pivots(rows, p, s)
    ncols = len(rows[0])
    basis = []
    for f in range(ncols):
        if f in pivots:
            continue
        v = [0] * ncols
        v[f] = 1
        for r, c in zip(R, pivots):
            v[c] = (-r[f]) % m
        basis.append(v)
    return basis


# ---------------- determinant / adjugate ----------------
def det_mod(a, m: int | None = None) -> int:
    if not a:
        return 1
    if len(a) != len(a[0]):
        raise InvalidParameter("determinant of a non-square matrix")
    d = Matrix(a).det(method="bareiss")
    return int(d) % m if m else d


def adjugate_mod(a, m: int | None = None) -> Mat:
    adj = Matrix(a).adjugate()
    return [[(int(x) % m if m else x) for x in adj.row(i)] for i in range(adj.rows)]
