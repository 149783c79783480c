from __future__ import annotations

import pytest

from src.errors import DegenerateRegime, InvalidParameter, ResidueCollision
from src.exactring import SparsePoly, z_vars
from src.hypersol import (default_method, expected_z_degree, limit_consistency, master_polynomial,
                          q_solutions, regime_guard, specialize, verify_thm_v2)
from src.kzsystem import KZVector, kz_residual, residual_valuation_min, verify_flatness


def test_master_polynomial_g1_p3():
    mp = master_polynomial(3, 1, 3, point=(0, 1, 2), exact=True)
    assert mp.exponent == 1
    assert mp.x_degree == 3
    assert mp.poly.degree("x") == 3


def test_q_at_point_mod_5():
    sol = q_solutions(5, 1, 1, point=(0, 1, 2))
    assert sol.matrix() == [[4, 0, 1]]


def test_symbolic_then_specialized_matches_point_mode():
    sym = q_solutions(5, 1, 1)
    assert specialize(sym, (0, 1, 2)).matrix() == [[4, 0, 1]]


def test_top_solution_is_all_ones():
    sol = q_solutions(5, 1, 2)
    top = sol.vectors[1]
    assert all(e == 1 for e in top)


def test_degenerate_regime():
    with pytest.raises(DegenerateRegime):
        regime_guard(3, 1, 2)
    with pytest.raises(DegenerateRegime):
        q_solutions(3, 1, 2)


def test_entries_are_homogeneous():
    sol = q_solutions(7, 1, 1)
    deg = expected_z_degree(7, 1, 1, 1)
    for e in sol.vectors[0]:
        assert {sum(exp) for exp in e.terms} <= {deg}


@pytest.mark.parametrize("p,g", [(5, 1), (7, 1), (5, 2)])
def test_windowed_agrees_with_full(p, g):
    full = q_solutions(p, 1, g, windowed=False)
    win = q_solutions(p, 1, g, windowed=True)
    for a, b in zip(full.vectors, win.vectors):
        for x, y in zip(a, b):
            assert x.lift(z_vars(2 * g + 1)) == y


def test_windowed_rejects_point_mode():
    with pytest.raises(InvalidParameter):
        q_solutions(5, 1, 1, point=(0, 1, 2), windowed=True)


@pytest.mark.parametrize("p,s,g", [(3, 1, 1), (5, 1, 1), (3, 2, 1), (7, 1, 2)])
def test_q_solves_kz_mod_ps(p, s, g):
    for v in q_solutions(p, s, g).vectors:
        assert all(r["pass"] for r in verify_flatness(v, p, s))


def test_verify_report_shape():
    r = verify_thm_v2(5, 1, 1, points=[(0, 1, 2)])
    assert r["pass"]
    assert r["modulus"] == "5^1"
    assert r["ranks"] == [{"point": [0, 1, 2], "rank": 1, "pass": True}]
    assert len(r["residuals"]) == 3


def test_colliding_point_is_rejected():
    with pytest.raises(ResidueCollision):
        verify_thm_v2(5, 1, 1, points=[(0, 5, 2)])


def test_limit_consistency_at_ordinary_point():
    r = limit_consistency(5, 1, 1, [(0, 1, 2)])
    assert r["pass"]
    assert r["points"][0]["members"] == [True]


@pytest.mark.slow
def test_q_solves_kz_mod_25_genus_2():
    for v in q_solutions(5, 2, 2).vectors:
        assert all(r["pass"] for r in verify_flatness(v, 5, 2))


@pytest.mark.parametrize("p,s,g", [(5, 1, 1), (7, 1, 1), (5, 1, 2), (3, 2, 1)])
def test_coefficient_construction_agrees_with_full(p, s, g):
    full = q_solutions(p, s, g, method="full")
    coef = q_solutions(p, s, g, method="coefficients")
    assert coef.meta["method"] == "coefficients"
    for a, b in zip(full.vectors, coef.vectors):
        for x, y in zip(a, b):
            assert x.lift(z_vars(2 * g + 1)) == y.lift(z_vars(2 * g + 1))


def test_default_method_switches_for_large_tuples():
    assert default_method(5, 1, 1) == "full"
    assert default_method(5, 2, 1) == "full"
    assert default_method(7, 2, 2) == "coefficients"
    assert default_method(13, 1, 3) == "coefficients"
    assert q_solutions(5, 1, 1, point=(0, 1, 2)).meta["method"] == "full"


def test_unknown_method_is_rejected():
    with pytest.raises(InvalidParameter):
        q_solutions(5, 1, 1, method="guess")
    with pytest.raises(InvalidParameter):
        q_solutions(5, 1, 1, point=(0, 1, 2), method="coefficients")


def test_swapping_two_points_swaps_entries():
    zs = z_vars(3)
    v = q_solutions(7, 1, 1).vectors[0]
    z1, z2 = SparsePoly.var("z1", zs, 7), SparsePoly.var("z2", zs, 7)
    swapped = [e.substitute({"z1": z2, "z2": z1}).lift(zs) for e in v]
    assert swapped[0] == v[2].lift(zs)
    assert swapped[1] == v[1].lift(zs)
    assert swapped[2] == v[3].lift(zs)


def test_split_residual_matches_full_residual_off_solution():
    zs = z_vars(3)
    Q = q_solutions(5, 1, 1).vectors[0]
    bump = SparsePoly.var("z2", zs, 5) * 2
    v = KZVector([Q[1].lift(zs) + bump, Q[2].lift(zs) - bump, Q[3].lift(zs)], 5)
    recs = verify_flatness(v, 5, 1)
    for rec in recs:
        assert rec["residual_valuation_min"] == residual_valuation_min(kz_residual(v, rec["i"]), 5)
    assert not all(r["pass"] for r in recs)


@pytest.mark.slow
@pytest.mark.parametrize("p,s,g", [(5, 3, 1), (11, 1, 2), (7, 2, 2), (13, 1, 3)])
def test_thm_v2_acceptance_tuples(p, s, g):
    r = verify_thm_v2(p, s, g, samples=2, seed=3)
    assert r["pass"]
    assert len(r["residuals"]) == g * (2 * g + 1)
