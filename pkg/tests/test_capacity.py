from fractions import Fraction as F

import pytest

from conftest import hyp, load, scenario
from omnikit.capacity import (BRANCH_EQ, BRANCH_LT, BRANCH_SINGLE, alpha_and_sstar, amin_constraints,
                              capacity_fractional_lp, csiszar_narayan_constraints, lambda_lp, rco, rho,
                              rho_bar, rho_constraints, secrecy_capacity)
from omnikit.partitions import FractionalPartition, Partition, mmi

FIXTURES = ["xj", "xor", "chain_a", "chain_b", "five_user", "slack", "pin_nc", "pin_nc_2", "ubsl1", "ubsl2",
            "pin3", "expins_3", "expins_2", "expins_13", "fls", "snn", "hyp4"]


def test_chain_rates():
    a, b = load("chain_a"), load("chain_b")
    assert rho(a)[0] == 0 and rho_bar(a)[0] == 0
    assert rho(b)[0] == 0 and rho_bar(b)[0] == 1
    cb = secrecy_capacity(b)
    assert (cb.C_S, cb.R_CO, cb.r_bar_star) == (1, 1, {3: 1})


def test_rco_equals_joint_entropy_minus_mmi():
    sc = load("ubsl1")
    o = sc.source
    assert rco(sc) == o.h(sc.V) - mmi(o, sorted(sc.V)).value == F(7, 2)


@pytest.mark.parametrize("stem", FIXTURES)
def test_cross_characterizations_agree(stem):
    sc = load(stem)
    cap = secrecy_capacity(sc)   # raises on any disagreement
    tol = sc.source.tol
    assert cap.R_CO == cap.rho + cap.rho_bar
    U = sc.V - sc.D
    if not sc.S and sc.A == U:
        assert abs(cap.C_S - mmi(sc.source, sorted(U), sorted(sc.D)).value) <= tol
    if not sc.S and len(U) <= 6:
        assert abs(cap.C_S - capacity_fractional_lp(sc, support=False).value) <= tol
    if sc.S and sc.A == U:
        assert abs(cap.C_S - alpha_and_sstar(sc).C_S) <= tol


def _normalize(cons):
    out = {}
    for B, rhs in cons:
        B = frozenset(B)
        out[B] = max(out.get(B, rhs), rhs)
    return out


def test_constraints_match_helper_free_family():
    for stem in ["xor", "five_user", "slack", "ubsl1", "chain_a", "chain_b", "pin3", "fls"]:
        sc = load(stem)
        gen = _normalize(rho_constraints(sc))
        cn = csiszar_narayan_constraints(sc)
        # the generator only keeps trusted-vocal left-hand sides
        T = sc.users.trusted_vocal
        assert gen == {B: v for B, v in cn.items() if B <= T}, stem


def test_constraints_match_silent_family():
    for stem in ["pin_nc", "expins_3", "expins_2", "expins_13", "hyp4"]:
        sc = load(stem)
        if sc.A != sc.V:
            continue
        gen = _normalize(rho_constraints(sc))
        assert gen == amin_constraints(sc), stem


@pytest.mark.parametrize("stem,alpha,sstar,branch,cs", [
    ("expins_3", 1, {3}, BRANCH_EQ, 1),
    ("expins_2", 2, {2}, BRANCH_LT, 0),
    ("expins_13", 1, {1, 3}, BRANCH_SINGLE, 1),
    ("pin_nc", 1, {1}, BRANCH_SINGLE, 1),
])
def test_alpha_and_sstar(stem, alpha, sstar, branch, cs):
    s = alpha_and_sstar(load(stem))
    assert (s.alpha, set(s.s_star), s.branch, s.C_S) == (alpha, sstar, branch, cs)


def test_alpha_needs_silent_shape():
    with pytest.raises(ValueError):
        alpha_and_sstar(load("xor"))


def test_fractional_lp_pin3_extremes():
    sc = load("pin3")
    f = capacity_fractional_lp(sc)
    assert f.value == 1
    l1 = FractionalPartition.indicator(Partition([[1, 2], [3]]))
    l2 = FractionalPartition.indicator(Partition([[1], [2, 3]]))
    got = {tuple(v.items()) for v in f.vertices}
    assert {tuple(l1.items()), tuple(l2.items())} <= got
    fam = {frozenset(B) for B in f.support_union}
    assert fam == {frozenset([1, 2]), frozenset([2, 3]), frozenset([1]), frozenset([3])}


def test_lambda_lp_feasibility_and_value():
    h = hyp([("a", [1, 2]), ("b", [2, 3])])
    val, lam = lambda_lp(h, [1, 2, 3], [{1}, {2}, {3}])
    # every user is determined by the others, so I_λ = H(Z_U) = 2
    assert val == 2 and lam.shape()[0] == "partition"
    assert lambda_lp(h, [1, 2, 3], [{1, 2}], objective="feasible") == (None, None)
    _, lam = lambda_lp(h, [1, 2, 3], [{1, 2}, {3}], objective="feasible")
    assert lam is not None


def test_tabular_capacity_within_tolerance():
    cap = secrecy_capacity(load("xj"))
    assert not cap.exact
    assert abs(cap.C_S - 1) <= F(1, 10**9) and abs(cap.R_CO - 2) <= F(1, 10**9)


def test_helper_capacity_with_untrusted_user():
    sc = scenario(hyp([("a", [1, 2]), ("b", [2, 3]), ("c", [1, 3])]), {1, 2}, D={3})
    cap = secrecy_capacity(sc)
    # users 1 and 2 each miss one of the wiretapper's edges: revealing b xor c suffices
    assert cap.C_S == 1 and cap.rho_bar == 1
