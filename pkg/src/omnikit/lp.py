"""Exact rational linear programming: two-phase simplex with Bland's rule.

Every optimal solve is certified by a dual solution whose objective equals
the primal optimum; a mismatch raises instead of returning.
"""
from __future__ import annotations

import contextvars
import sys
import threading
from dataclasses import dataclass, field
from fractions import Fraction

from .numerics import to_fraction

OPTIMAL, INFEASIBLE, UNBOUNDED = "OPTIMAL", "INFEASIBLE", "UNBOUNDED"

# destination for --trace-lp dumps; None disables tracing
TRACE = contextvars.ContextVar("omnikit_lp_trace", default=None)


class CertificateError(AssertionError):
    pass


class _Stats:
    def __init__(self):
        self._lock = threading.Lock()
        self.reset()

    def reset(self):
        with getattr(self, "_lock", threading.Lock()):
            self.solves = 0
            self.certified = 0

    def record(self, certified):
        with self._lock:
            self.solves += 1
            self.certified += bool(certified)


STATS = _Stats()


@dataclass
class Constraint:
    coeffs: dict
    op: str          # "<=", ">=", "=="
    rhs: Fraction
    name: str = ""


@dataclass
class RationalLP:
    variables: list
    objective: dict
    sense: str = "min"
    constraints: list = field(default_factory=list)
    free: set = field(default_factory=set)   # variables without a sign bound
    name: str = ""

    def add(self, coeffs, op, rhs, name=""):
        if op not in ("<=", ">=", "=="):
            raise ValueError(f"bad constraint operator {op!r}")
        coeffs = {v: to_fraction(c) for v, c in coeffs.items() if c}
        unknown = set(coeffs) - set(self.variables)
        if unknown:
            raise ValueError(f"unknown LP variable {sorted(map(str, unknown))[0]}")
        self.constraints.append(Constraint(coeffs, op, to_fraction(rhs), name))
        return self

    def copy(self):
        return RationalLP(list(self.variables), dict(self.objective), self.sense,
                          list(self.constraints), set(self.free), self.name)


@dataclass
class LPResult:
    status: str
    value: Fraction | None = None
    x: dict | None = None
    duals: list | None = None      # one multiplier per constraint
    pivots: int = 0

    @property
    def ok(self):
        return self.status == OPTIMAL


def _trace(msg):
    out = TRACE.get()
    if out is not None:
        print(msg, file=out)


def _standard_form(lp):
    """min c.x, Ax = b, x >= 0, b >= 0; returns matrices and column map."""
    cols = []          # (variable, sign)
    for v in lp.variables:
        cols.append((v, 1))
        if v in lp.free:
            cols.append((v, -1))
    colidx = {}
    for k, (v, s) in enumerate(cols):
        colidx.setdefault(v, []).append((k, s))
    sgn = 1 if lp.sense == "min" else -1
    c = [sgn * lp.objective.get(v, Fraction(0)) * s for v, s in cols]
    rows, b, rowsign = [], [], []
    nslack = sum(1 for con in lp.constraints if con.op != "==")
    n = len(cols) + nslack
    si = len(cols)
    for con in lp.constraints:
        r = [Fraction(0)] * n
        for v, a in con.coeffs.items():
            for k, s in colidx[v]:
                r[k] = a * s
        if con.op == "<=":
            r[si] = Fraction(1)
            si += 1
        elif con.op == ">=":
            r[si] = Fraction(-1)
            si += 1
        rhs = con.rhs
        flip = 1
        if rhs < 0:
            r = [-x for x in r]
            rhs = -rhs
            flip = -1
        rows.append(r)
        b.append(rhs)
        rowsign.append(flip)
    c += [Fraction(0)] * nslack
    return cols, c, rows, b, rowsign


def _pivot(T, basis, r, k):
    prow = T[r]
    p = prow[k]
    if p != 1:
        prow = [x / p for x in prow]
        T[r] = prow
    nz = [j for j, x in enumerate(prow) if x]
    for i, row in enumerate(T):
        if i != r:
            f = row[k]
            if f:
                for j in nz:
                    row[j] -= f * prow[j]
    basis[r] = k


def _simplex(T, basis, cost, allowed, counter):
    """Minimize cost over the tableau T = [A | b] with Bland's rule."""
    m = len(T)
    while True:
        # reduced costs d_j = c_j - c_B B^-1 A_j
        cb = [cost[basis[i]] for i in range(m)]
        enter = None
        for j in allowed:
            d = cost[j] - sum(cb[i] * T[i][j] for i in range(m) if cb[i] and T[i][j])
            if d < 0:
                enter = j
                break
        if enter is None:
            return OPTIMAL
        best, leave = None, None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return UNBOUNDED
        _trace(f"  pivot: enter col {enter}, leave row {leave} (basic col {basis[leave]}), ratio {best}")
        _pivot(T, basis, leave, enter)
        counter[0] += 1


def solve_lp(lp: RationalLP) -> LPResult:
    cols, c, A, b, rowsign = _standard_form(lp)
    m, n = len(A), len(c)
    _trace(f"LP {lp.name or ''} [{lp.sense}] vars={lp.variables} rows={m} cols={n}")
    for con in lp.constraints:
        _trace(f"  {con.name or ''}: {' + '.join(f'{a}*{v}' for v, a in con.coeffs.items()) or '0'} {con.op} {con.rhs}")
    # tableau [A | I(artificial) | b]
    T = [A[i] + [Fraction(int(i == j)) for j in range(m)] + [b[i]] for i in range(m)]
    basis = [n + i for i in range(m)]
    counter = [0]
    art_cost = [Fraction(0)] * n + [Fraction(1)] * m
    _simplex(T, basis, art_cost, range(n), counter)
    infeas = sum((T[i][-1] for i in range(m) if basis[i] >= n), Fraction(0))
    if infeas > 0:
        _trace(f"  phase 1 optimum {infeas} > 0: INFEASIBLE")
        STATS.record(True)
        return LPResult(INFEASIBLE, pivots=counter[0])
    # drive artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= n:
            k = next((j for j in range(n) if T[i][j]), None)
            if k is None:
                continue
            _pivot(T, basis, i, k)
        keep.append(i)
    T = [T[i] for i in keep]
    basis = [basis[i] for i in keep]
    cost = c + [Fraction(0)] * m
    status = _simplex(T, basis, cost, range(n), counter)
    if status == UNBOUNDED:
        _trace("  UNBOUNDED")
        STATS.record(True)
        return LPResult(UNBOUNDED, pivots=counter[0])
    xs = [Fraction(0)] * n
    for i, k in enumerate(basis):
        xs[k] = T[i][-1]
    x = {v: Fraction(0) for v in lp.variables}
    for k, (v, s) in enumerate(cols):
        x[v] += s * xs[k]
    primal = sum((ci * xi for ci, xi in zip(c, xs)), Fraction(0))
    # dual y = c_B B^-1, read from the artificial block of the final tableau
    cb = [cost[k] for k in basis]
    y = [sum((cb[r] * T[r][n + i] for r in range(len(T))), Fraction(0)) for i in range(m)]
    _certify(lp, A, b, c, y, primal, x)
    sgn = 1 if lp.sense == "min" else -1
    duals = [sgn * rowsign[i] * y[i] for i in range(m)]
    value = sgn * primal
    _trace(f"  OPTIMAL value {value} after {counter[0]} pivots; x = {x}")
    return LPResult(OPTIMAL, value, x, duals, counter[0])


def _certify(lp, A, b, c, y, primal, x):
    ok = True
    for j in range(len(c)):
        if c[j] - sum((y[i] * A[i][j] for i in range(len(A)) if A[i][j]), Fraction(0)) < 0:
            ok = False
            break
    dual = sum((bi * yi for bi, yi in zip(b, y)), Fraction(0))
    ok = ok and dual == primal
    for con in lp.constraints:
        lhs = sum((a * x[v] for v, a in con.coeffs.items()), Fraction(0))
        if (con.op == "<=" and lhs > con.rhs) or (con.op == ">=" and lhs < con.rhs) or \
                (con.op == "==" and lhs != con.rhs):
            ok = False
    for v in lp.variables:
        if v not in lp.free and x[v] < 0:
            ok = False
    STATS.record(ok)
    if not ok:
        raise CertificateError(f"LP {lp.name!r}: primal {primal} and dual {dual} do not certify each other")


def lexmin(lp: RationalLP, result: LPResult | None = None, order=None) -> LPResult:
    """Lexicographically smallest optimal solution (variables in `order`)."""
    res = result or solve_lp(lp)
    if not res.ok:
        return res
    work = lp.copy()
    work.add(dict(lp.objective), "==", res.value, "optimal-face")
    x = res.x
    for v in order or lp.variables:
        probe = work.copy()
        probe.objective = {v: Fraction(1)}
        probe.sense = "min"
        r = solve_lp(probe)
        if not r.ok:
            break
        work.add({v: 1}, "==", r.value, f"fix-{v}")
        x = r.x
    return LPResult(OPTIMAL, res.value, x, res.duals, res.pivots)


def feasible(lp: RationalLP) -> LPResult:
    probe = lp.copy()
    probe.objective = {}
    return solve_lp(probe)


def dump(lp, out=sys.stderr):
    tok = TRACE.set(out)
    try:
        return solve_lp(lp)
    finally:
        TRACE.reset(tok)
