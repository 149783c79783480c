from __future__ import annotations

import pytest

from src.errors import NotOnto
from src.modlinalg import (adjugate_mod, det_mod, howell_form, in_span, kernel, mat_mul, mat_vec,
                           normalized_kernel, rank_mod_p, rref_unit_pivots, smith, solve)


def test_rank_mod_p():
    assert rank_mod_p([[1, 2], [2, 4]], 5) == 1
    assert rank_mod_p([[1, 2], [3, 4]], 5) == 2
    assert rank_mod_p([[1, 2], [3, 4]], 2) == 1
    assert rank_mod_p([], 3) == 0


def test_smith_reports_elementary_divisors():
    sf = smith([[3, 0], [0, 1]], 3, 2)
    assert sorted(sf.vals) == [0, 1]
    assert sf.unit_rank == 1
    assert not sf.is_free
    m = 9
    diag = mat_mul(mat_mul(sf.U, [[3, 0], [0, 1]], m), sf.C, m)
    assert diag == [[1, 0], [0, 3]]


def test_solve_and_in_span():
    a = [[1, 1], [0, 3]]
    x = solve(a, [2, 3], 3, 2)
    assert mat_vec(a, x, 9) == [2, 3]
    assert solve(a, [0, 1], 3, 2) is None
    assert in_span([[1, 0, 2]], [2, 0, 4], 5, 1)
    assert not in_span([[1, 0, 2]], [0, 1, 0], 5, 1)


def test_kernel_vectors_are_annihilated():
    a = [[1, 2, 3], [0, 3, 6]]
    for v in kernel(a, 3, 2):
        assert mat_vec(a, v, 9) == [0, 0]
    assert len(kernel(a, 3, 2)) >= 1


def test_howell_form_is_canonical():
    rows = [[1, 2], [2, 4]]
    assert howell_form(rows, 5, 1) == howell_form([[3, 6]], 5, 1) == [[1, 2]]
    assert howell_form([[0, 0]], 5, 1) == []


def test_howell_form_keeps_torsion_rows():
    h = howell_form([[3, 1]], 3, 2)
    assert [3, 1] in h or len(h) == 2


def test_rref_unit_pivots_and_normalized_kernel():
    rows = [[1, 1, 1]]
    R, piv = rref_unit_pivots(rows, 7, 1)
    assert piv == [0]
    assert R == [[1, 1, 1]]
    assert normalized_kernel(rows, 7, 1) == [[6, 1, 0], [6, 0, 1]]
    with pytest.raises(NotOnto):
        rref_unit_pivots([[7, 0, 0]], 7, 1)


def test_det_and_adjugate():
    a = [[2, 1], [1, 1]]
    assert det_mod(a) == 1
    assert det_mod(a, 5) == 1
    adj = adjugate_mod(a, 5)
    assert mat_mul(a, adj, 5) == [[1, 0], [0, 1]]
