from fractions import Fraction as F

import pytest

from conftest import hyp, scenario, uniform_tabular
from omnikit.entropy import (DictOracle, FiniteLinearSource, ScenarioError, TabularSource, UnknownUser,
                             UnsupportedBackend, UserSet, cond_entropy, condition_on_wiretap, entropy,
                             gk_common_part, mutual_info, tabularize, validate_submodular)


def test_hypergraph_entropy_counts_incident_edges():
    h = hyp([("a", [1, 2]), ("b", [2, 3], "1/2"), ("c", [3])])
    assert h.h([1]) == 1
    assert h.h([2]) == F(3, 2)
    assert h.h([1, 3]) == F(5, 2)
    assert h.h([]) == 0
    assert mutual_info(h, [1], [2]) == 1
    assert cond_entropy(h, [3], [2]) == 1


def test_hypergraph_rejects_bad_edges():
    with pytest.raises(ScenarioError, match="duplicate edge label"):
        hyp([("a", [1, 2]), ("a", [2])])
    with pytest.raises(ScenarioError, match="positive weight"):
        hyp([("a", [1, 2], 0)])
    with pytest.raises(UnknownUser):
        hyp([("a", [1, 9])], V=[1, 2])


def test_linear_rank_entropy_and_exactness():
    lin = FiniteLinearSource(2, 2, {1: [[1, 0]], 2: [[0, 1]], 3: [[1, 1]]})
    assert lin.exact
    assert [lin.h(B) for B in ([1], [1, 2], [1, 2, 3])] == [1, 2, 2]
    lin3 = FiniteLinearSource(3, 1, {1: [[1]], 2: [[2]]})
    assert not lin3.exact
    assert abs(float(lin3.h([1])) - 1.584962500721) < 1e-9
    with pytest.raises(ScenarioError, match="not prime"):
        FiniteLinearSource(4, 1, {1: [[1]], 2: [[1]]})


def test_tabular_entropy_matches_closed_form():
    src = uniform_tabular({1: lambda x: x[0], 2: lambda x: x[0] ^ x[1], 3: lambda x: x[1]}, 2)
    assert not src.exact
    assert src.h([1, 2, 3]) == 2
    assert src.h([1, 3]) == 2
    assert entropy(src, [1]) == 1.0
    # biased bit: H(1/4) = 0.811278...
    b = TabularSource({1: [0, 1], 2: [0, 1]}, [([0, 0], "3/4"), ([1, 1], "1/4")])
    assert abs(float(b.h([1])) - 0.8112781244591328) < 1e-12


def test_tabular_validation():
    with pytest.raises(ScenarioError, match="sums to"):
        TabularSource({1: [0, 1]}, [([0], "1/2")])
    with pytest.raises(ScenarioError, match="not in the alphabet"):
        TabularSource({1: [0, 1]}, [([2], 1)])


@pytest.mark.parametrize("A,D,S,msg", [
    ({1}, (), (), "at least two active users"),
    ({1, 2}, {2}, (), "untrusted active user"),
    ({1, 2}, {3}, {3}, "silent untrusted user"),
    ({1, 2}, (), {3}, "silent trusted helper"),
    ({1, 2}, (), {1, 2}, "at least one vocal active user"),
])
def test_role_rules(A, D, S, msg):
    with pytest.raises(ScenarioError, match=msg):
        UserSet((1, 2, 3), A, D, S)


def test_condition_on_wiretap_edge_deletion():
    h = hyp([("a", [1, 2, 4]), ("b", [2, 3, 4])])
    o = condition_on_wiretap(h, {3})
    assert o.dropped_edges == ("b",)
    assert o.h([2, 4]) == 1 and o.h([1]) == 1
    assert [e.label for e in o.reduced.edges] == ["a"]
    assert condition_on_wiretap(h, ()) is h


def test_submodularity_detects_violation():
    bad = DictOracle([1, 2], {frozenset([1]): 1, frozenset([2]): 1, frozenset([1, 2]): 3})
    rep = validate_submodular(bad)
    assert not rep and rep.rule == "submodular"
    nonmono = DictOracle([1, 2], {frozenset([1]): 2, frozenset([2]): 1, frozenset([1, 2]): 1})
    assert validate_submodular(nonmono).rule == "monotone"
    assert validate_submodular(hyp([("a", [1, 2]), ("b", [2, 3])]))


def test_tabularize_hypergraph_and_linear_preserve_entropy():
    h = hyp([("a", [1, 2]), ("b", [2, 3], 2)])
    t = tabularize(h)
    for B in ([1], [2], [3], [1, 3], [1, 2, 3]):
        assert t.h(B) == h.h(B)
    lin = FiniteLinearSource(2, 2, {1: [[1, 0]], 2: [[0, 1]], 3: [[1, 1]]})
    t = tabularize(lin)
    assert t.h([1, 2, 3]) == 2 and t.h([3]) == 1
    with pytest.raises(UnsupportedBackend, match="non-integer"):
        tabularize(hyp([("a", [1, 2], "1/2")]))


def test_gk_common_part():
    # Z1 = (a, b), Z2 = (a, c): common part is a
    t = tabularize(hyp([("a", [1, 2]), ("b", [1]), ("c", [2])]))
    gk = gk_common_part(t, [1, 2])
    assert abs(gk.entropy - 1) < 1e-12
    assert abs(gk.cond([1])) < 1e-12 and abs(gk.cond([2])) < 1e-12
    # independent bits share nothing
    t = tabularize(hyp([("b", [1]), ("c", [2])]))
    assert gk_common_part(t, [1, 2]).entropy == 0
    with pytest.raises(UnsupportedBackend):
        gk_common_part(hyp([("a", [1, 2])]), [1, 2])


def test_scenario_requires_matching_users():
    from omnikit.entropy import Scenario
    with pytest.raises(ScenarioError):
        Scenario(UserSet((1, 2, 3), {1, 2}), hyp([("a", [1, 2])]))
    sc = scenario(hyp([("a", [1, 2]), ("b", [2, 3])]), {1, 3})
    assert sc.users.trusted_vocal == {1, 2, 3}
    assert sc.users.trusted_helpers == {2}
