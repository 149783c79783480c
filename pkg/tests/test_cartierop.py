from __future__ import annotations

import random

import pytest

from src.cartierop import (TruncOneForm, cartier, certified_degree, d, dlog, dlog_fixed_point,
                           iterate_cartier, lemma_cd_check, random_series, random_witness, witness_form)
from src.errors import CutoffTooSmall, NotClosed, WitnessMismatch
from src.exactring import SparsePoly, TruncSeries, t_vars


def _series(terms, n, cutoff, p, k=1):
    return TruncSeries(SparsePoly(t_vars(n), terms, p ** k), cutoff, p)


def test_certified_degree():
    assert certified_degree(10, 3) == 2
    assert certified_degree(4, 5) == 0


def test_cartier_of_t_to_the_p_minus_one():
    eta = TruncOneForm.of([_series({(2,): 1}, 1, 8, 3)])
    c = cartier(eta)
    assert c.cutoff == 2
    assert c.components[0] == _series({(0,): 1}, 1, 2, 3)


def test_cartier_keeps_only_p_power_exponents():
    # t^5 dt = t^{3·1 + 2} dt -> t dt ; t^3 dt is dropped
    eta = TruncOneForm.of([_series({(5,): 2, (3,): 1}, 1, 11, 3)])
    assert cartier(eta).components[0] == _series({(1,): 2}, 1, 3, 3)


def test_cartier_kills_exact_forms():
    rng = random.Random(5)
    h = random_series(2, 12, 3, 1, rng)
    assert cartier(d(h)).is_zero()


def test_cartier_rejects_open_and_short_forms():
    t2 = _series({(0, 1): 1}, 2, 6, 3)
    zero = _series({}, 2, 6, 3)
    with pytest.raises(NotClosed):
        cartier(TruncOneForm.of([t2, zero]))
    with pytest.raises(CutoffTooSmall):
        cartier(TruncOneForm.of([_series({(0,): 1}, 1, 1, 5)]))


def test_iterate_shrinks_certified_degree():
    eta = TruncOneForm.of([_series({(8,): 1}, 1, 26, 3)])
    steps = iterate_cartier(eta, 2)
    assert [st.cutoff for st in steps] == [8, 2]
    assert steps[0].components[0] == _series({(2,): 1}, 1, 8, 3)
    assert steps[1].components[0] == _series({(0,): 1}, 1, 2, 3)


def test_dlog_is_fixed():
    rng = random.Random(7)
    for _ in range(50):
        assert dlog_fixed_point(random_series(2, 10, 5, 1, rng, unit=True))


def test_dlog_of_linear_unit():
    q = _series({(0,): 1, (1,): 1}, 1, 6, 3)
    eta = dlog(q)
    # 1/(1+t) = 1 - t + t^2 - ...
    assert eta.components[0] == _series({(0,): 1, (1,): 2, (2,): 1, (3,): 2, (4,): 1, (5,): 2}, 1, 5, 3)


@pytest.mark.parametrize("p,s,n", [(3, 1, 1), (3, 1, 2), (5, 1, 1), (3, 2, 1)])
def test_lemma_cd_on_random_witnesses(p, s, n):
    rng = random.Random(p * 100 + s * 10 + n)
    cutoff = p ** (s + 1) + 1
    for _ in range(2):
        w = random_witness(n, cutoff, p, s, rng)
        r = lemma_cd_check(witness_form(w, s), s, w)
        assert r["pass"]
        assert len(r["certified_degrees"]) == s + 1


def test_witness_must_be_divisible():
    g = _series({(1,): 1}, 1, 6, 3, k=2)
    with pytest.raises(WitnessMismatch):
        witness_form(g, 1)


def test_cartier_of_exact_monomial():
    h = _series({(2, 1): 1}, 2, 8, 3)
    assert cartier(d(h)).is_zero()


def test_lemma_cd_power_witness():
    g = _series({(3,): 1}, 1, 12, 3, k=2)
    eta = witness_form(g, 1)
    assert eta.components[0] == _series({(2,): 1}, 1, 11, 3)
    r = lemma_cd_check(eta, 1, g)
    assert r["steps_zero"] == [False, True]
    assert r["pass"]
