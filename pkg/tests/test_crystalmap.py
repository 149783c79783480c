from __future__ import annotations

import pytest

from src.crystalmap import (cartier_matrix, cartier_matrix_at, det_at, exact_forms_check, hasse_witt,
                            hasse_witt_at, is_ordinary, kernel_cs, kernel_flatness, sample_ordinary_points,
                            unit_root_check)
from src.errors import ResidueCollision
from src.exactring import SparsePoly, z_vars


def test_hasse_witt_g1_p3_is_minus_trace():
    A = hasse_witt(3, 1)
    zs = [SparsePoly.var(v, z_vars(3)) for v in z_vars(3)]
    assert A.entries[0][0] == -(zs[0] + zs[1] + zs[2])


def test_hasse_witt_at_point():
    assert [[x % 5 for x in row] for row in hasse_witt_at(5, 1, (0, 1, 2))] == [[3]]
    assert det_at(5, 1, (0, 1, 2)) % 5 == 3
    assert hasse_witt(5, 1).at((0, 1, 2)) == hasse_witt_at(5, 1, (0, 1, 2))


def test_ordinarity():
    assert is_ordinary(5, 1, (0, 1, 2))
    assert not is_ordinary(3, 1, (0, 1, 2))
    assert not is_ordinary(5, 1, (0, 5, 2))


def test_sampling_is_seeded():
    a = sample_ordinary_points(7, 1, 3, seed=11)
    assert a == sample_ordinary_points(7, 1, 3, seed=11)
    assert all(is_ordinary(7, 1, pt) for pt in a)
    with pytest.raises(ResidueCollision):
        sample_ordinary_points(3, 2, 1)


@pytest.mark.parametrize("p,s,g", [(5, 1, 1), (3, 2, 1), (7, 1, 2)])
def test_cartier_matrix_matches_hypergeometric_values(p, s, g):
    C = cartier_matrix(p, s, g)
    for pt in sample_ordinary_points(p, g, 2, seed=3):
        assert C.at(pt) == cartier_matrix_at(p, s, g, pt)


def test_cartier_matrix_at_known_point():
    assert cartier_matrix(5, 1, 1).at((0, 1, 2)) == [[4, 0, 1]]


def test_exact_forms_are_killed():
    assert exact_forms_check(5, 1, 1)["pass"]
    assert exact_forms_check(3, 2, 1, (0, 1, 2))["pass"]


def test_kernel_at_known_point():
    assert kernel_cs(5, 1, 1, (0, 1, 2)) == [[0, 1]]


def test_unit_root_check():
    r = unit_root_check(5, 1, 1, [(0, 1, 2)])
    assert r["pass"]
    assert r["points"][0]["kernel_rank"] == 1


@pytest.mark.parametrize("p,s", [(3, 1), (5, 1), (3, 2)])
def test_kernel_is_flat(p, s):
    r = kernel_flatness(p, s, 1, -1)
    assert r["pass"]
    assert r["kernel_rank"] == 1


@pytest.mark.slow
@pytest.mark.parametrize("p,s,g", [(5, 2, 1), (7, 1, 2)])
def test_kernel_is_flat_at_acceptance_tuples(p, s, g):
    r = kernel_flatness(p, s, g, -1)
    assert r["pass"]
    assert r["kernel_rank"] == g
