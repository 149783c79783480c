from __future__ import annotations

from fractions import Fraction

import pytest

from src.errors import InvalidParameter, NonInvertibleDifference, SumZeroViolation
from src.exactring import SparsePoly, z_vars
from src.kzsystem import KZVector, gaudin_apply, kz_residual, omega_apply, residual_valuation_min


def _inv_at(point):
    return lambda i, j: Fraction(1, point[i - 1] - point[j - 1])


def test_omega_swaps_differences():
    v = KZVector([1, 2, -3])
    assert omega_apply(1, 2, v).entries == (1, -1, 0)
    assert omega_apply(2, 1, v).entries == (1, -1, 0)
    with pytest.raises(InvalidParameter):
        omega_apply(1, 1, v)
    with pytest.raises(InvalidParameter):
        omega_apply(1, 4, v)


def test_sum_zero_is_enforced():
    with pytest.raises(SumZeroViolation):
        KZVector([1, 1, 1])
    assert KZVector([1, 1, 3], modulus=5).n == 3
    with pytest.raises(InvalidParameter):
        KZVector([0])


def test_gaudin_at_a_point():
    v = KZVector([1, 2, -3])
    h = gaudin_apply(1, v, _inv_at((0, 1, 2)))
    assert h.entries == (1, 1, -2)
    assert sum(h.entries) == 0


def test_gaudin_hamiltonians_sum_to_zero():
    point = (0, 3, 7, -2, 5)
    v = KZVector([4, -1, 2, 0, -5])
    total = [0] * 5
    for i in range(1, 6):
        total = [a + b for a, b in zip(total, gaudin_apply(i, v, _inv_at(point)).entries)]
    assert total == [0] * 5


def test_gaudin_reports_non_invertible_difference():
    v = KZVector([1, -1, 0])
    with pytest.raises(NonInvertibleDifference):
        gaudin_apply(1, v, lambda i, j: None)


def test_constant_vector_residual_is_omega_sum():
    vs = z_vars(3)
    v = KZVector([SparsePoly.const(c, vs) for c in (1, 1, -2)])
    res = kz_residual(v, 3)
    assert residual_valuation_min(res, 5) == 0
    res1 = kz_residual(v, 1)
    # v_1 = v_2, so only the (1,3) difference contributes
    assert res1[2].is_zero()
    assert not res1[3].is_zero()


def test_translated_solution_still_solves_kz():
    from src.hypersol import q_solutions
    from src.kzsystem import verify_flatness

    vs = z_vars(3)
    v = q_solutions(7, 1, 1).vectors[0]
    shift = {name: SparsePoly.var(name, vs, 7) + 3 for name in vs}
    moved = KZVector([e.substitute(shift).lift(vs) for e in v], 7)
    assert all(r["pass"] for r in verify_flatness(moved, 7, 1))
