import warnings
from fractions import Fraction as F

import pytest

from omnikit.numerics import (GroundSetTooLarge, check_size, fmt, max_users, near_tie, rationalize,
                              to_fraction)


def test_rationalize_snaps_to_grid():
    assert rationalize(0.5) == F(1, 2)
    assert rationalize(1 / 3) == F(333333333333, 10**12)
    assert rationalize(1e-14) == 0


def test_to_fraction_accepts_strings_ints_floats():
    assert to_fraction("3/4") == F(3, 4)
    assert to_fraction(2) == 2
    assert to_fraction(0.25) == F(1, 4)
    with pytest.raises(TypeError):
        to_fraction(None)


def test_near_tie_band():
    tol = F(1, 10**9)
    assert not near_tie(1, 1, tol)
    assert near_tie(1, 1 + 5 * tol, tol)
    assert not near_tie(1, 1 + 11 * tol, tol)
    assert not near_tie(1, F(1) + F(1, 10**20), 0)


def test_fmt_exact_and_float():
    assert fmt(F(3, 2)) == "3/2"
    assert fmt(F(1)) == "1"
    assert fmt(rationalize(1.5), exact=False) == "3/2"
    assert fmt(rationalize(0.8112781244591328), exact=False).startswith("0.81127")


def test_max_users_env(monkeypatch):
    monkeypatch.delenv("OMNIKIT_MAX_USERS", raising=False)
    assert max_users() == 12
    monkeypatch.setenv("OMNIKIT_MAX_USERS", "6")
    assert max_users() == 6
    with pytest.raises(GroundSetTooLarge):
        check_size(7)
    monkeypatch.setenv("OMNIKIT_MAX_USERS", "20")
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert max_users() == 14
    assert w
    monkeypatch.setenv("OMNIKIT_MAX_USERS", "many")
    with pytest.raises(ValueError):
        max_users()
