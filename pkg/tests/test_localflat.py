from __future__ import annotations

import pytest

from src.crystalmap import sample_ordinary_points
from src.errors import InvalidParameter, NonOrdinaryPoint, PrecisionExhausted, ResidueCollision
from src import suite
from src.localflat import (BasePoint, agreement_degree, default_guard, guard_digits, integrability_defect,
                           integral_lattice, lattice_profile, legendre, local_system, match_hypergeometric,
                           shifted_q, solve_flat)
from src.modlinalg import in_span

A = BasePoint.of((0, 1, 2), 5)


def test_legendre_and_guard_digits():
    assert legendre(4, 5) == 0
    assert legendre(6, 5) == 1
    assert legendre(25, 5) == 6
    assert guard_digits(5, 5) == 3
    assert guard_digits(6, 5) == 4


def test_base_point_validation():
    with pytest.raises(NonOrdinaryPoint):
        BasePoint.of((0, 1, 2), 3)
    with pytest.raises(ResidueCollision):
        BasePoint.of((0, 5, 2), 5)
    with pytest.raises(InvalidParameter):
        BasePoint.of((0, 1), 5)
    assert A.g == 1


def test_not_enough_guard_digits():
    with pytest.raises(PrecisionExhausted):
        local_system(A, 6, 1, guard=0)


def test_initial_vector_forms():
    sol = solve_flat((1, -1), A, 3, 1)
    assert sol.v0 == (1, -1, 0)
    with pytest.raises(InvalidParameter):
        solve_flat((1, 1, 1), A, 3, 1)


def test_below_p_everything_is_integral():
    sol = solve_flat((2, 1, -3), A, 4, 1)
    assert sol.is_integral()
    assert sol.profile().first_negative() is None
    assert all(r["pass"] for r in integrability_defect(sol))


def test_lattice_rank_one_contains_q():
    lat = integral_lattice(A, 6, 1)
    assert lat.rank == 1
    assert lat.free
    assert lat.stable
    assert in_span(lat.basis, [4, 0], 5, 1)


def test_vector_outside_lattice_dips_negative():
    sol = solve_flat((0, 1, -1), A, 6, 1)
    prof = sol.profile()
    assert prof.dips_negative()
    assert prof.first_negative() >= 5
    with pytest.raises(InvalidParameter):
        sol.series()


def test_lattice_solution_matches_q_below_p():
    lat = integral_lattice(A, 6, 1)
    sol = solve_flat(lat.lift([4, 0]), A, 6, 1)
    assert sol.is_integral()
    assert agreement_degree(sol, shifted_q(A, 1, 6)[0]) >= 4
    assert all(r["pass"] for r in integrability_defect(sol))


def test_match_with_hypergeometric_solutions():
    r = match_hypergeometric(A, 1, 6)
    assert r["pass"]
    assert len(r["b0"]) == 1 and r["b0"][0][0] % 5 != 0


def test_rank_before_p_is_full():
    pt = sample_ordinary_points(7, 2, 1, seed=2)[0]
    lat = integral_lattice(BasePoint.of(pt, 7), 6, 1)
    assert lat.rank == 4
    assert not lat.stable


def test_match_needs_rank_g():
    pt = sample_ordinary_points(7, 2, 1, seed=2)[0]
    with pytest.raises(InvalidParameter):
        match_hypergeometric(BasePoint.of(pt, 7), 1, 6)


@pytest.mark.slow
def test_lattice_profile_stabilizes():
    prof = lattice_profile(A, 1, [4, 6, 10])
    assert [r["rank"] for r in prof] == [2, 1, 1]
    assert prof[-1]["stable"]


def test_default_guard_covers_factorial_valuation():
    assert default_guard(6, 5) == 4
    assert default_guard(25, 5) == 7
    assert default_guard(25, 5) > legendre(25, 5)


def test_s2_degree_reaches_p_to_the_s():
    assert suite.local_degree({"p": 5, "s": 2, "g": 1}) == 25
    assert suite.local_degree({"p": 5, "s": 1, "g": 1}) == 10


def test_s2_lattice_below_p_squared_is_not_stable():
    lat = integral_lattice(A, 10, 2)
    assert not lat.stable


@pytest.mark.slow
def test_lattice_s2_free():
    lat = integral_lattice(A, 25, 2)
    assert lat.rank == 1
    assert lat.free
    assert lat.stable
    assert [list(v) for v in lat.basis] == [[1, 0]]


@pytest.mark.slow
def test_match_s2():
    r = match_hypergeometric(A, 2, 25)
    assert r["pass"]
    assert r["det_unit"]
    assert r["b0"][0][0] % 5 != 0


@pytest.mark.slow
def test_genus_2_lattice_rank_at_p():
    pt = sample_ordinary_points(7, 2, 1, seed=2)[0]
    lat = integral_lattice(BasePoint.of(pt, 7), 7, 1)
    assert lat.rank == 2
    assert lat.stable
