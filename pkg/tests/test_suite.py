from __future__ import annotations

import pytest

from src import suite
from src.errors import DegenerateRegime, InvalidParameter, NonOrdinaryPoint


def test_rational_points_are_distinct_and_seeded():
    pts = suite.rational_points(2, 3, seed=4)
    assert pts == suite.rational_points(2, 3, seed=4)
    assert all(len(set(pt)) == 5 for pt in pts)


def test_local_degree_defaults():
    assert suite.local_degree({"p": 5, "g": 1}) == 10
    assert suite.local_degree({"p": 7, "g": 2}) == 7
    assert suite.local_degree({"p": 7, "g": 2, "degree": 9}) == 9


def test_preconditions():
    with pytest.raises(DegenerateRegime):
        suite.run({"p": 3, "s": 1, "g": 2}, quiet=True)
    with pytest.raises(InvalidParameter):
        suite.run({"p": 3, "s": 1, "g": 1}, quiet=True)


def test_filter_and_order(monkeypatch):
    monkeypatch.setattr(suite, "SUITE", ["dlog_fixed_point", "hasse_witt"])
    results = suite.run({"p": 5, "s": 1, "g": 1, "samples": 1}, quiet=True)
    assert [r["name"] for r in results] == ["hasse_witt", "dlog_fixed_point"]
    assert all(r["pass"] for r in results)
    assert all("seconds" in r for r in results)


def test_failing_check_is_recorded(monkeypatch):
    def boom(params):
        raise NonOrdinaryPoint("det A vanishes")

    monkeypatch.setattr(suite, "SUITE", [])
    monkeypatch.setattr(suite, "REGISTRY", [("boom", boom, lambda q: True)])
    [r] = suite.run({"p": 5, "s": 1, "g": 1}, quiet=True)
    assert not r["pass"]
    assert r["detail"] == {"error": "NonOrdinaryPoint", "message": "det A vanishes"}


def test_gates_skip_heavy_checks(monkeypatch):
    monkeypatch.setattr(suite, "SUITE", ["p_curvature", "lemma_cd"])
    assert suite.run({"p": 5, "s": 3, "g": 1, "samples": 1}, quiet=True) == []


@pytest.mark.slow
def test_full_suite_genus_one():
    results = suite.run({"p": 5, "s": 1, "g": 1, "samples": 1}, quiet=True)
    assert [r["name"] for r in results] == [name for name, _, _ in suite.REGISTRY]
    assert all(r["pass"] for r in results), [r["name"] for r in results if not r["pass"]]


def test_s2_local_degree():
    assert suite.local_degree({"p": 5, "s": 2, "g": 1}) == 25
    assert suite.local_degree({"p": 5, "s": 2, "g": 1, "degree": 12}) == 12


def test_measured_sigma_reaches_gauss_manin(monkeypatch):
    monkeypatch.setattr(suite, "SUITE", ["gauss_manin"])
    [r] = suite.run({"p": 5, "s": 1, "g": 1, "samples": 1}, quiet=True)
    assert r["pass"]
    assert r["detail"]["sigma"] == -1


def test_given_sigma_is_used_as_is(monkeypatch):
    monkeypatch.setattr(suite, "SUITE", ["gauss_manin"])
    [r] = suite.run({"p": 5, "s": 1, "g": 1, "samples": 1, "sigma": 1}, quiet=True)
    assert r["detail"]["sigma"] == 1
    assert not r["pass"]


def test_sigma_is_not_measured_without_a_consumer(monkeypatch):
    def unexpected(*args, **kwargs):
        raise AssertionError("sigma measured")

    monkeypatch.setattr(suite, "SUITE", ["hasse_witt"])
    monkeypatch.setattr(suite, "measured_sigma", unexpected)
    [r] = suite.run({"p": 5, "s": 1, "g": 1, "samples": 1}, quiet=True)
    assert r["pass"]
