"""Randomized invariants; no worked-example numbers appear here."""
from fractions import Fraction as F
from itertools import combinations

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from conftest import load, scenario
from omnikit import lp as lpmod
from omnikit.capacity import secrecy_capacity
from omnikit.court import (FAIL, OPTIMAL, PASS, analyze, check_oo_hypergraph, check_oo_necessary,
                           check_oo_sufficient, jd_partition, jw_hypergraph, lower_bound_rs)
from omnikit.entropy import FiniteLinearSource, HypergraphSource, TabularSource, validate_submodular
from omnikit.lp import RationalLP, solve_lp
from omnikit.partitions import (FractionalPartition, Partition, add_channel, dpi_check, enumerate_partitions,
                                mmi, shearer_bounds)

SLOW = dict(deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
WEIGHTS = st.sampled_from([F(1, 2), F(1), F(2)])


@st.composite
def hypergraphs(draw, nmin=2, nmax=5, weights=WEIGHTS, emax=6):
    n = draw(st.integers(nmin, nmax))
    V = list(range(1, n + 1))
    k = draw(st.integers(1, emax))
    edges = []
    for j in range(k):
        on = draw(st.sets(st.sampled_from(V), min_size=1, max_size=n))
        edges.append((f"e{j}", sorted(on), draw(weights)))
    return HypergraphSource(V, edges)


@st.composite
def linear_sources(draw, nmin=2, nmax=5):
    n = draw(st.integers(nmin, nmax))
    m = draw(st.integers(1, 4))
    row = st.lists(st.integers(0, 1), min_size=m, max_size=m)
    mats = {u: draw(st.lists(row, min_size=1, max_size=2)) for u in range(1, n + 1)}
    return FiniteLinearSource(2, m, mats)


@st.composite
def tabular_sources(draw, nmin=2, nmax=3):
    n = draw(st.integers(nmin, nmax))
    sizes = [draw(st.integers(2, 3)) for _ in range(n)]
    outcomes = [()]
    for s in sizes:
        outcomes = [o + (x,) for o in outcomes for x in range(s)]
    w = draw(st.lists(st.integers(0, 4), min_size=len(outcomes), max_size=len(outcomes)))
    assume(sum(w) > 0)
    tot = sum(w)
    pmf = [(list(o), F(x, tot)) for o, x in zip(outcomes, w) if x]
    return TabularSource({u + 1: list(range(s)) for u, s in enumerate(sizes)}, pmf)


@st.composite
def fractional_partitions(draw, U):
    """Convex combination of partition indicators and co-partitions of U."""
    parts = list(enumerate_partitions(U))
    k = draw(st.integers(1, 3))
    raw = [draw(st.integers(1, 5)) for _ in range(k)]
    lam = {}
    for r in raw:
        P = draw(st.sampled_from(parts))
        base = FractionalPartition.co_partition(P) if draw(st.booleans()) else FractionalPartition.indicator(P)
        for B, x in base.items():
            lam[B] = lam.get(B, F(0)) + F(r, sum(raw)) * x
    return FractionalPartition(U, lam)


@st.composite
def scenarios(draw, sources):
    src = draw(sources)
    V = list(src.ground)
    D = set(draw(st.sets(st.sampled_from(V), max_size=max(0, len(V) - 2))))
    rest = [u for u in V if u not in D]
    A = set(draw(st.sets(st.sampled_from(rest), min_size=2, max_size=len(rest))))
    S = set(draw(st.sets(st.sampled_from(sorted(A)), max_size=len(A) - 1)))
    return scenario(src, A, D, S)


# ---------------------------------------------------------------- (a) submodularity


@settings(max_examples=500, **SLOW)
@given(st.one_of(hypergraphs(), linear_sources()))
def test_random_sources_are_polymatroids(src):
    rep = validate_submodular(src)
    assert rep.ok, rep.witness


# ---------------------------------------------------------------- (b) Shearer sandwich


@settings(max_examples=200, **SLOW)
@given(st.data())
def test_shearer_sandwich_random(data):
    src = data.draw(st.one_of(hypergraphs(nmin=3, nmax=4), tabular_sources(nmin=3, nmax=3)))
    U = list(src.ground)
    lam = data.draw(fractional_partitions(U))
    lo, v, hi = shearer_bounds(src, lam)
    assert lo - src.tol <= v <= hi + src.tol


FIXTURES = ["xj", "xor", "chain_a", "chain_b", "five_user", "slack", "pin_nc", "pin_nc_2", "ubsl1", "ubsl2",
            "pin3", "expins_3", "expins_2", "expins_13", "fls", "snn", "hyp4"]


@pytest.mark.parametrize("stem", FIXTURES)
def test_shearer_sandwich_fixtures(stem):
    sc = load(stem)
    U = sorted(sc.V - sc.D)
    P = mmi(sc.source, U, sorted(sc.D)).fundamental
    for lam in (FractionalPartition.co_partition(P), FractionalPartition.indicator(Partition.singletons(U))):
        lo, v, hi = shearer_bounds(sc.source, lam, sorted(sc.D))
        assert lo - sc.source.tol <= v <= hi + sc.source.tol


# ---------------------------------------------------------------- (c) data processing


@settings(max_examples=200, **SLOW)
@given(st.data())
def test_dpi_random_channels(data):
    src = data.draw(tabular_sources())
    U = list(src.ground)
    i = data.draw(st.sampled_from(U))
    rows = {}
    for a in src.alphabets[i]:
        w = data.draw(st.lists(st.integers(0, 3), min_size=2, max_size=2).filter(lambda w: sum(w) > 0))
        rows[(a,)] = {0: F(w[0], sum(w)), 1: F(w[1], sum(w))}
    ext = add_channel(src, [i], rows, 99, alphabet=[0, 1])
    lam = data.draw(fractional_partitions(U))
    rep = dpi_check(ext, lam, i, 99)
    assert rep.ok, (rep.dpi1, rep.dpi2)


# ---------------------------------------------------------------- (d) cross-characterizations


@settings(max_examples=150, **SLOW)
@given(scenarios(hypergraphs(nmax=5)))
def test_capacity_routes_agree_on_random_hypergraphs(sc):
    cap = secrecy_capacity(sc)   # raises CrossCheckError on any disagreement
    assert cap.C_S >= 0 and cap.R_CO >= 0


@settings(max_examples=60, **SLOW)
@given(scenarios(hypergraphs(nmax=4)))
def test_capacity_lp_against_float_solver(sc):
    """ρ recomputed with an independent floating-point LP solver."""
    from omnikit.capacity import rho_constraints
    T = sorted(sc.users.trusted_vocal)
    cons = rho_constraints(sc)
    A = np.zeros((len(cons), len(T)))
    b = np.zeros(len(cons))
    for k, (B, rhs) in enumerate(cons):
        for u in B:
            A[k, T.index(u)] = -1
        b[k] = -float(rhs)
    res = linprog(np.ones(len(T)), A_ub=A, b_ub=b, bounds=[(0, None)] * len(T), method="highs")
    assert res.status == 0
    assert abs(res.fun - float(secrecy_capacity(sc, cross_check=False).rho)) < 1e-7


# ---------------------------------------------------------------- (e) soundness and iff consistency


@settings(max_examples=500, **SLOW)
@given(scenarios(hypergraphs(nmax=5, weights=st.sampled_from([F(1), F(2)]), emax=5)))
def test_sufficient_pass_and_necessary_fail_never_cooccur(sc):
    cap = secrecy_capacity(sc, cross_check=False)
    suff = [c for c in check_oo_sufficient(sc, cap) if c.status == PASS]
    nec = [c for c in check_oo_necessary(sc, cap) if c.status == FAIL]
    assert not (suff and nec), (suff, nec)
    for b in lower_bound_rs(sc, cap):
        assert b.value <= cap.R_CO


@settings(max_examples=200, **SLOW)
@given(hypergraphs(nmin=2, nmax=6, weights=st.just(F(1)), emax=6))
def test_hypergraph_iff_matches_sufficient_condition(h):
    sc = scenario(h, set(h.ground))
    v = check_oo_hypergraph(sc)
    s = next(c for c in check_oo_sufficient(sc) if c.tag == "oo-no-helper")
    assert (v.status == OPTIMAL) == (s.status == PASS)


@settings(max_examples=80, **SLOW)
@given(scenarios(hypergraphs(nmax=4, weights=st.sampled_from([F(1), F(2)]), emax=4)))
def test_analyze_bracket_is_never_empty(sc):
    rep = analyze(sc)
    assert 0 <= rep.lower <= rep.upper <= rep.R_CO


@settings(max_examples=100, **SLOW)
@given(hypergraphs(nmin=2, nmax=5))
def test_jw_equals_jd_random(h):
    for P in enumerate_partitions(h.ground):
        assert jw_hypergraph(h, P)[0] == jd_partition(h, P)


# ---------------------------------------------------------------- (f) LP certificates


@st.composite
def random_lps(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 5))
    small = st.integers(-3, 3)
    names = [f"x{j}" for j in range(n)]
    lp = RationalLP(names, {v: draw(small) for v in names}, draw(st.sampled_from(["min", "max"])))
    for _ in range(m):
        lp.add({v: draw(small) for v in names}, draw(st.sampled_from(["<=", ">=", "=="])), draw(small))
    # keep it bounded so the float reference is well posed
    for v in names:
        lp.add({v: 1}, "<=", 5)
    return lp


@settings(max_examples=300, **SLOW)
@given(random_lps())
def test_lp_matches_float_reference_and_is_certified(lp):
    before = (lpmod.STATS.solves, lpmod.STATS.certified)
    r = solve_lp(lp)
    assert lpmod.STATS.solves - before[0] == lpmod.STATS.certified - before[1] == 1
    sgn = 1 if lp.sense == "min" else -1
    c = [sgn * float(lp.objective.get(v, 0)) for v in lp.variables]
    Aub, bub, Aeq, beq = [], [], [], []
    for con in lp.constraints:
        row = [float(con.coeffs.get(v, 0)) for v in lp.variables]
        if con.op == "<=":
            Aub.append(row); bub.append(float(con.rhs))
        elif con.op == ">=":
            Aub.append([-x for x in row]); bub.append(-float(con.rhs))
        else:
            Aeq.append(row); beq.append(float(con.rhs))
    ref = linprog(c, A_ub=Aub or None, b_ub=bub or None, A_eq=Aeq or None, b_eq=beq or None,
                  bounds=[(0, None)] * len(c), method="highs")
    if ref.status == 2:
        assert r.status == lpmod.INFEASIBLE
    else:
        assert ref.status == 0 and r.ok
        assert abs(float(r.value) - sgn * ref.fun) < 1e-7


def test_every_solve_in_an_analysis_is_certified():
    lpmod.STATS.reset()
    for stem in ("xor", "pin3", "snn", "ubsl2", "expins_3"):
        analyze(load(stem))
    assert lpmod.STATS.solves > 0
    assert lpmod.STATS.certified == lpmod.STATS.solves
