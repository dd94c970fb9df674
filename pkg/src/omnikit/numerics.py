"""Small numeric helpers shared by every module.

Exact backends produce Fractions.  The tabular backend computes Shannon
entropies in double precision; those are snapped to a 1e-12 grid and turned
into Fractions so that one simplex implementation serves every backend.
Comparisons then go through a tolerance that is zero for exact backends.
"""
from __future__ import annotations

import os
import warnings
from fractions import Fraction

GRID = 10**12
TABULAR_TOL = Fraction(1, 10**9)
DEFAULT_MAX_USERS = 12
HARD_MAX_USERS = 14


class GroundSetTooLarge(ValueError):
    pass


def max_users() -> int:
    raw = os.environ.get("OMNIKIT_MAX_USERS", "").strip()
    if not raw:
        return DEFAULT_MAX_USERS
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"OMNIKIT_MAX_USERS must be an integer, got {raw!r}")
    if n > HARD_MAX_USERS:
        warnings.warn(f"OMNIKIT_MAX_USERS={n} exceeds the hard ceiling; using {HARD_MAX_USERS}")
        return HARD_MAX_USERS
    if n > DEFAULT_MAX_USERS:
        warnings.warn(f"exhaustive routines with up to {n} users may take a very long time")
    return max(n, 2)


def check_size(n: int, what: str = "ground set", cap: int | None = None):
    cap = max_users() if cap is None else cap
    if n > cap:
        raise GroundSetTooLarge(f"{what} has {n} users, exhaustive routines are capped at {cap}")


def rationalize(x: float) -> Fraction:
    """Snap a float to the 1e-12 grid and return it as a Fraction."""
    return Fraction(round(x * GRID), GRID)


def to_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return rationalize(v)
    if isinstance(v, str):
        return Fraction(v.strip())
    raise TypeError(f"cannot read {v!r} as a rational")


def eq(a, b, tol=0) -> bool:
    return abs(a - b) <= tol


def is_zero(a, tol=0) -> bool:
    return abs(a) <= tol


def near_tie(a, b, tol) -> bool:
    """True when a and b differ, but by no more than ten tolerances."""
    if not tol:
        return False
    d = abs(a - b)
    return 0 < d <= 10 * tol


def fmt(v, exact: bool = True) -> str:
    """Serialize a value: "p/q" for rationals, a short decimal otherwise."""
    v = to_fraction(v)
    if exact:
        return str(v)
    approx = v.limit_denominator(1000)
    if abs(approx - v) <= Fraction(1, GRID):
        return str(approx)
    return repr(float(v))
