from __future__ import annotations

import pytest

from src.crystalmap import sample_ordinary_points
from src.errors import InvalidParameter, NonInvertibleDifference
from src.exactring import DiagRational, Factor, SparsePoly, z_vars
from src.pcurvature import (annihilation_check, gm_connection, image_span_rank, integrability,
                            kodaira_spencer_check, kz_connection, linearity_certificate, negative_control,
                            operator_power, p_curvature, p_curvature_at, scalar_connection)


def _wilson(p):
    vs = z_vars(2)
    return scalar_connection(p, 2, [DiagRational.inv_diff(1, 2, vs, p), DiagRational.inv_diff(2, 1, vs, p)])


def _inverse_square(p):
    vs = z_vars(2)
    b = DiagRational(SparsePoly.const(1, vs, p), {Factor.diff(1, 2, p): 2})
    return scalar_connection(p, 2, [b, -b])


@pytest.mark.parametrize("p", [3, 5, 7])
def test_logarithmic_connection_has_zero_p_curvature(p):
    conn = _wilson(p)
    assert integrability(conn)["pass"]
    assert p_curvature(conn, 1)[0][0].is_zero_mod(p)
    assert p_curvature_at(conn, 2, (0, 1)) == [[0]]


def test_inverse_square_has_nonzero_p_curvature():
    conn = _inverse_square(5)
    assert not p_curvature(conn, 1)[0][0].is_zero_mod(5)
    # 1/(z1 - z2)^{2p} at (0, 2): 2^{-10} mod 5
    assert p_curvature_at(conn, 1, (0, 2)) == [[4]]


def test_two_code_paths_agree():
    conn = _inverse_square(5)
    vs = z_vars(2)
    vectors = [[DiagRational.of(1, vs)], [DiagRational.of(SparsePoly.var("z2", vs))]]
    assert linearity_certificate(conn, 1, vectors)


def test_operator_power_on_flat_section():
    # (z1 - z2)^{-1} is flat for d + dlog(z1 - z2)
    conn = _wilson(5)
    v = [DiagRational.inv_diff(1, 2, z_vars(2), 5)]
    assert operator_power(conn, 1, v, times=1)[0].is_zero_mod(5)


def test_kz_and_gm_connections_are_integrable():
    assert integrability(kz_connection(5, 1))["pass"]
    assert integrability(gm_connection(5, 1, -1))["pass"]


def test_prime_bound():
    with pytest.raises(InvalidParameter):
        kz_connection(53, 1)


def test_vanishing_denominator():
    with pytest.raises(NonInvertibleDifference):
        p_curvature_at(_wilson(5), 1, (0, 5))


def test_annihilation_at_points():
    pts = sample_ordinary_points(7, 1, 2, seed=1)
    assert annihilation_check(7, 1, points=pts)["pass"]


def test_annihilation_needs_large_prime():
    with pytest.raises(InvalidParameter):
        annihilation_check(3, 1, points=[(0, 1, 2)])


@pytest.mark.slow
def test_annihilation_symbolic():
    assert annihilation_check(5, 1)["pass"]


def test_gauss_manin_image_rank_and_kodaira_spencer():
    pt = (0, 1, 2)
    assert image_span_rank(5, 1, pt, -1) == 1
    assert kodaira_spencer_check(5, 1, pt, -1)["pass"]


def test_negative_control_detects_generic_vectors():
    assert any(negative_control(5, 1, (0, 1, 2), seed) for seed in range(6))


def test_constant_scalar_connection():
    vs = z_vars(2)
    conn = scalar_connection(5, 2, [DiagRational.of(3, vs), DiagRational.of(0, vs)])
    assert p_curvature_at(conn, 1, (0, 1)) == [[3]]
    assert p_curvature_at(conn, 2, (0, 1)) == [[0]]


@pytest.mark.slow
def test_gauss_manin_image_rank_genus_2():
    pt = sample_ordinary_points(7, 2, 1, seed=2)[0]
    assert image_span_rank(7, 2, pt, -1) == 2
