"""Bounds on the communication complexity R_S and the omniscience verdict.

Every statement collected here is a bound on R_S of the scenario under
analysis: lower bounds, upper bounds (possibly strict) and conditions whose
outcome implies one of those.  The verdict engine intersects them into a
bracket and compares the bracket with R_CO.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .capacity import (BRANCH_EQ, BRANCH_GT, BRANCH_LT, BRANCH_SINGLE, alpha_and_sstar,
                       backend_name, capacity_fractional_lp, lambda_lp, secrecy_capacity)
from .entropy import (Edge, FiniteLinearSource, HypergraphSource, Scenario, ScenarioError,
                      TabularSource, UnsupportedBackend, UserSet, condition_on_wiretap,
                      gk_common_part, mutual_info, tabularize)
from .lp import RationalLP, feasible
from .numerics import fmt, near_tie, rationalize, to_fraction
from .partitions import FractionalPartition, Partition, fractional_info, mmi, partition_info

OO_OPTIMAL, OO_SUBOPTIMAL, UNDECIDED = "OO_OPTIMAL", "OO_SUBOPTIMAL", "UNDECIDED"
PASS, FAIL, NOT_APPLICABLE, UNEVALUATED, BOUND = "PASS", "FAIL", "NOT_APPLICABLE", "UNEVALUATED", "BOUND"
OPTIMAL, SUBOPTIMAL = "OPTIMAL", "SUBOPTIMAL"
TOLERANCE_SENSITIVE = "TOLERANCE_SENSITIVE"


class InconsistentEvidence(AssertionError):
    pass


class TransformRejected(ValueError):
    def __init__(self, msg, value=None):
        super().__init__(msg)
        self.value = value


class PlanError(ValueError):
    pass


# ---------------------------------------------------------------- serialization


def _js(x, exact=True):
    """JSON-ready copy with deterministic ordering."""
    if isinstance(x, (Fraction, int)) and not isinstance(x, bool):
        return fmt(x, exact)
    if isinstance(x, Partition):
        return x.to_json()
    if isinstance(x, FractionalPartition):
        return [{"B": sorted(B, key=_key), "w": fmt(w)} for B, w in x.items()]
    if isinstance(x, (set, frozenset)):
        # sets hold user ids and edge labels, never quantities
        return sorted((v if isinstance(v, (int, str)) else _js(v, exact) for v in x), key=_key)
    if isinstance(x, (list, tuple)):
        return [_js(v, exact) for v in x]
    if isinstance(x, dict):
        return {str(k): _js(v, exact) for k, v in x.items()}
    return x


def _key(v):
    return (0, v, "") if isinstance(v, (int, float)) else (1, 0, json.dumps(v, sort_keys=True, default=str))


def _ids(s):
    return sorted(s, key=_key)


@dataclass
class BoundEvidence:
    kind: str                  # "lower" (R_S >= value) or "upper" (R_S <= value, or < if strict)
    value: Fraction
    tag: str
    witness: dict = field(default_factory=dict)
    strict: bool = False
    sensitive: bool = False

    def to_json(self, exact=True):
        d = {"kind": self.kind, "tag": self.tag, "value": fmt(self.value, exact)}
        if self.strict:
            d["strict"] = True
        d["witness"] = _js(self.witness, exact)
        if self.sensitive:
            d["sensitive"] = True
        return d


@dataclass
class ConditionResult:
    tag: str
    status: str
    witness: dict = field(default_factory=dict)
    implies: BoundEvidence | None = None
    sensitive: bool = False

    def __iter__(self):
        return iter((self.tag, self.status, self.witness))

    def to_json(self, exact=True):
        d = {"kind": "condition", "tag": self.tag, "status": self.status,
             "witness": _js(self.witness, exact)}
        if self.sensitive:
            d["sensitive"] = True
        return d


def _zero(o, v):
    """(v counts as zero, v is within the guard band but nonzero)."""
    return abs(v) <= o.tol, near_tie(v, 0, o.tol)


def _eq(o, a, b):
    return abs(a - b) <= o.tol


# ---------------------------------------------------------------- J_D and J_W


def jd_partition(oracle, P, U=None, W=()):
    """Partition dual total correlation; λ-general via the same formula."""
    lam = P if isinstance(P, FractionalPartition) else FractionalPartition.indicator(P)
    if U is not None and frozenset(U) != lam.ground:
        raise ValueError("the partition does not cover the given ground set")
    v = fractional_info(oracle, lam, W)
    top = oracle.h(set(lam.ground) | set(W)) - oracle.h(W)
    if v > top + oracle.tol:
        raise AssertionError(f"J_D = {v} exceeds H(Z_U|W) = {top}")
    return v


def jw_hypergraph(h, P, U=None):
    """Crossing-edge weight of P on a hypergraph, with the two-sided check.

    Returns (value, labels of the crossing edges).
    """
    if not isinstance(h, HypergraphSource):
        raise UnsupportedBackend("jw_hypergraph needs a hypergraph source")
    U = frozenset(P.ground if U is None else U)
    if U != P.ground:
        raise ValueError("the partition does not cover the given ground set")
    blocks = list(P)
    cross = [e for e in h.edges if e.on & U and not any(e.on & U <= C for C in blocks)]
    value = h.weight_of(cross)
    jd = jd_partition(h, P)
    if value != jd:
        raise AssertionError(f"crossing weight {value} differs from J_D {jd} on {P}")
    labels = sorted(e.label for e in cross)
    resid = sum((h.h_given_edges(C, labels) for C in blocks), Fraction(0)) - h.h_given_edges(U, labels)
    if resid != 0:
        raise AssertionError(f"conditioning on the crossing edges leaves I_P = {resid} on {P}")
    return value, labels


# ---------------------------------------------------------------- helpers


def _conditioned(sc):
    """Oracle on V∖D conditioned on Z_D, and the matching hypergraph if any."""
    o = condition_on_wiretap(sc.source, sc.D)
    if isinstance(sc.source, HypergraphSource):
        return o, (o.reduced if sc.D else sc.source)
    return o, None


def _silent_shape(sc):
    return bool(sc.S) and sc.A == sc.V - sc.D


def _helper_free_shape(sc):
    return not sc.S and sc.A == sc.V - sc.D


def _t(sc):
    return sc.users.trusted_vocal


def _rho(sc, cap, o):
    return o.h(_t(sc)) - cap.C_S


# ---------------------------------------------------------------- lower bounds


def _partition_candidates(sc, o):
    T = _t(sc)
    U0 = sc.V - sc.D
    out = []
    if len(U0) >= 2:
        out.append(("pool", U0, mmi(o, _ids(U0)).fundamental))
    pT = mmi(o, _ids(T)).fundamental if len(T) >= 2 else None
    if pT is not None and T != U0:
        out.append(("vocal", T, pT))
    if sc.S:
        mi = {i: mutual_info(o, T, {i}) for i in sc.S}
        a = min(mi.values())
        s_star = frozenset(i for i, v in mi.items() if v - a <= o.tol)
        for i in _ids(sc.S):
            Ui = T | {i}
            out.append(("pair", Ui, Partition([T, {i}])))
            if pT is not None:
                out.append(("refined-pair", Ui, Partition(list(pT) + [{i}])))
            out.append(("fundamental-pair", Ui, mmi(o, _ids(Ui)).fundamental))
        if len(s_star) > 1:
            out.append(("augmented", T | s_star, Partition([T] + [{i} for i in s_star])))
            if pT is not None:
                out.append(("refined-augmented", T | s_star,
                            Partition(list(pT) + [{i} for i in s_star])))
    return out


def _partition_bound(sc, o, hyp, cap, U, P, shape):
    """Lower bound from a co-partition λ of P on U, if the hypothesis holds."""
    if len(P) < 2:
        return None
    if any(not (C & sc.A) for C in P):
        return None
    ip = partition_info(o, P)
    if not _eq(o, ip, cap.C_S):
        return None
    jd = jd_partition(o, P)
    # best λ' supported on the blocks and their complements
    fam = {frozenset(C) for C in P} | {frozenset(U - C) for C in P}
    jlp, lam = lambda_lp(o, _ids(U), fam)
    w = {"U": set(U), "partition": P, "shape": shape, "J_D": jd}
    tag = "lb-jd"
    j = jd
    if jlp is not None and jlp > jd:
        j = jlp
        w["lambda"] = lam
        w["I_lambda"] = jlp
    if hyp is not None:
        jw, edges = jw_hypergraph(hyp, P)
        w["crossing_edges"] = edges
        tag = "lb-jw"
        j = max(j, jw)
    return BoundEvidence("lower", j - cap.C_S, tag, w, sensitive=near_tie(ip, cap.C_S, o.tol))


def lower_bound_rs(sc, cap=None):
    """Every applicable single-letter lower bound on R_S."""
    cap = cap or secrecy_capacity(sc, cross_check=False)
    o, hyp = _conditioned(sc)
    out = []
    seen = set()
    cands = _partition_candidates(sc, o)
    U0 = sc.V - sc.D
    flp = None
    if not sc.S and sc.A != U0 and len(U0) >= 2:
        flp = capacity_fractional_lp(sc)
        for v in flp.vertices:
            kind, P = v.shape()
            if kind == "co-partition" or (kind == "partition" and len(P) == 2):
                cands.append(("optimal-vertex", U0, P))
    for shape, U, P in cands:
        key = (frozenset(U), P)
        if key in seen:
            continue
        seen.add(key)
        b = _partition_bound(sc, o, hyp, cap, frozenset(U), P, shape)
        if b is not None:
            out.append(b)
    if flp is not None:
        val, lam = lambda_lp(o, _ids(U0), flp.h_family)
        if val is not None:
            out.append(BoundEvidence("lower", val - cap.C_S, "lb-fractional",
                                     {"lambda": lam, "H_family": flp.h_family, "I_lambda": val}))
    for b in out:
        if b.value > cap.R_CO + o.tol:
            raise AssertionError(f"lower bound {b.value} exceeds R_CO {cap.R_CO} ({b.tag})")
    out.sort(key=lambda b: (-b.value, b.tag, json.dumps(b.to_json())))
    return out


# ---------------------------------------------------------------- sufficient conditions


def check_oo_sufficient(sc, cap=None):
    """Sufficient conditions for R_S = R_CO (each PASS gives R_S >= ρ)."""
    cap = cap or secrecy_capacity(sc, cross_check=False)
    o, _ = _conditioned(sc)
    rho = _rho(sc, cap, o)
    if rho != cap.rho and abs(rho - cap.rho) > o.tol:
        raise AssertionError(f"ρ mismatch {rho} vs {cap.rho}")
    U0 = sc.V - sc.D
    T = _t(sc)
    out = []

    def done(tag, ok, w, sens=False):
        imp = BoundEvidence("lower", cap.rho, tag, dict(w)) if ok else None
        st = PASS if ok else FAIL
        if ok and cap.rho_bar > o.tol:
            # the untrusted users still have to reveal ρ̄ > 0, so only R_S >= ρ follows
            st = BOUND
            w["rho_bar"] = cap.rho_bar
        out.append(ConditionResult(tag, st, w, imp, sens or (ok and near_tie(cap.rho_bar, 0, o.tol))))

    if _helper_free_shape(sc):
        m = mmi(o, _ids(U0))
        vals = {C: o.h(U0) - o.h(U0 - C) for C in m.fundamental}
        zs = [_zero(o, v) for v in vals.values()]
        bad = [sorted(C) for C, z in zip(vals, zs) if not z[0]]
        done("oo-no-helper", not bad, {"partition": m.fundamental, "nonzero_blocks": bad},
             any(z[1] for z in zs) or m.sensitive)
    else:
        out.append(ConditionResult("oo-no-helper", NOT_APPLICABLE, {"reason": "needs S = ∅ and A = V∖D"}))

    if not sc.S and sc.A != U0:
        flp = capacity_fractional_lp(sc)
        zero_sets, sens = [], False
        for B in flp.h_family:
            z, s = _zero(o, o.h(U0) - o.h(U0 - B))
            sens = sens or s
            if z:
                zero_sets.append(B)
        lam = None
        if zero_sets:
            _, lam = lambda_lp(o, _ids(U0), zero_sets, objective="feasible")
        w = {"H_family": flp.h_family, "zero_sets": zero_sets}
        if lam is not None:
            w["lambda"] = lam
        done("oo-lambda", lam is not None, w, sens)
    else:
        out.append(ConditionResult("oo-lambda", NOT_APPLICABLE, {"reason": "needs S = ∅ and A ⊊ V∖D"}))

    if _silent_shape(sc):
        s = alpha_and_sstar(sc)
        w = {"alpha": s.alpha, "S_star": s.s_star, "branch": s.branch}
        if s.branch == BRANCH_LT:
            vals = {C: o.h(T) - o.h(T - C) for C in s.fundamental}
            zs = [_zero(o, v) for v in vals.values()]
            bad = [sorted(C) for C, z in zip(vals, zs) if not z[0]]
            w.update(partition=s.fundamental, nonzero_blocks=bad)
            done("oo-silent-1", not bad, w, s.sensitive or any(z[1] for z in zs))
        elif s.branch in (BRANCH_SINGLE, BRANCH_GT):
            hit, sens = None, s.sensitive
            for i in _ids(s.s_star):
                z, n = _zero(o, o.h(T | {i}) - o.h({i}))
                sens = sens or n
                if z and hit is None:
                    hit = i
            w["determining_user"] = hit
            done("oo-silent-2", hit is not None, w, sens)
        else:
            hit, sens = None, s.sensitive
            for i in _ids(s.s_star):
                ok = True
                for C in s.fundamental:
                    z, n = _zero(o, o.h(T | {i}) - o.h((T - C) | {i}))
                    sens = sens or n
                    ok = ok and z
                if ok and hit is None:
                    hit = i
            w.update(partition=s.fundamental, determining_user=hit)
            done("oo-silent-3", hit is not None, w, sens)
    else:
        out.append(ConditionResult("oo-silent", NOT_APPLICABLE, {"reason": "needs ∅ ≠ S ⊊ A = V∖D"}))
    return out


# ---------------------------------------------------------------- normalization and transforms


@dataclass
class Claim:
    capacity: str          # relation of C_S' to C_S: "=", "<=", ">="
    rs: str                # relation of R_S' to R_S when C_S' = C_S
    rco: str | None = None
    text: str = ""

    def to_json(self):
        d = {"C_S": self.capacity, "R_S_if_equal_capacity": self.rs}
        if self.rco:
            d["R_CO"] = self.rco
        d["text"] = self.text
        return d


def _new_id(sc, i):
    if all(isinstance(u, int) for u in sc.V):
        return max(sc.V) + 1
    n = f"{i}'"
    while n in sc.V:
        n += "'"
    return n


def _user(sc, spec, key="user"):
    if key not in spec:
        raise TransformRejected(f"transform needs a {key!r} field")
    raw = spec[key]
    for u in sc.V:
        if u == raw or str(u) == str(raw):
            return u
    raise TransformRejected(f"unknown user id {raw!r}")


def _relabel(sc, users, source, suffix):
    name = f"{sc.name} [{suffix}]" if sc.name else suffix
    return Scenario(users, source, name, sc.meta)


def _edge_labels(sc, spec, pred, what):
    src = sc.source
    if not isinstance(src, HypergraphSource):
        raise TransformRejected(f"{what} needs a hypergraph source")
    wanted = spec.get("edges")
    if wanted is None:
        return [e.label for e in src.edges if pred(e)]
    out = []
    for lab in wanted:
        try:
            e = src.edge(str(lab))
        except KeyError:
            raise TransformRejected(f"unknown edge {lab!r}") from None
        if not pred(e):
            raise TransformRejected(f"edge {lab!r} does not satisfy the hypothesis of {what}")
        out.append(e.label)
    return out


def transform_scenario(sc, spec):
    """Apply one change of scenario; returns (new scenario, claim)."""
    kind = spec.get("kind")
    u = sc.users
    src = sc.source
    o = src
    if kind == "silence-vocal-active":
        i = _user(sc, spec)
        if i not in sc.A - sc.S:
            raise TransformRejected(f"user {i} is not a vocal active user")
        if sc.S | {i} == sc.A:
            raise TransformRejected("silencing this user would leave no vocal active user")
        new = spec.get("new_user", _new_id(sc, i))
        if new in sc.V:
            raise TransformRejected(f"user {new} already exists")
        users = UserSet(tuple(sc.V | {new}), sc.A, sc.D, sc.S | {i})
        return (_relabel(sc, users, src.with_copy(i, new), f"silence {i}, copy {new}"),
                Claim("<=", ">=", text="vocal active user silenced and copied as a trusted helper"))
    if kind == "remove-trusted-helper":
        i = _user(sc, spec)
        if i in sc.A or i in sc.D:
            raise TransformRejected(f"user {i} is not a trusted helper")
        users = UserSet(tuple(sc.V - {i}), sc.A, sc.D, sc.S)
        return (_relabel(sc, users, src.restricted(sc.V - {i}), f"remove helper {i}"),
                Claim("<=", ">=", text="trusted helper removed"))
    if kind == "silence-untrusted":
        raise TransformRejected("silent untrusted users are outside the scenario model (an untrusted user "
                                "must stay vocal), so this change cannot be represented")
    if kind == "remove-determined-helper":
        i = _user(sc, spec)
        if i in sc.A or i in sc.D:
            raise TransformRejected(f"user {i} is not a trusted helper")
        vals = {j: o.h({i, j}) - o.h({j}) for j in _ids(sc.V - sc.S - {i})}
        best = min(vals.values(), default=None)
        if best is None or best > o.tol:
            raise TransformRejected(f"no vocal user determines user {i}: min H(Z_{i}|Z_j) = {best}", best)
        j = next(j for j, v in vals.items() if v <= o.tol)
        users = UserSet(tuple(sc.V - {i}), sc.A, sc.D, sc.S)
        return (_relabel(sc, users, src.restricted(sc.V - {i}), f"remove helper {i}"),
                Claim("=", "=", text=f"trusted helper {i} removed; H(Z_{i}|Z_{j}) = 0"))
    if kind == "remove-silent-active":
        i = _user(sc, spec)
        if i not in sc.A & sc.S:
            raise TransformRejected(f"user {i} is not a silent active user")
        if len(sc.A) <= 2:
            raise TransformRejected("removing this user would leave fewer than two active users")
        users = UserSet(tuple(sc.V - {i}), sc.A - {i}, sc.D, sc.S - {i})
        return (_relabel(sc, users, src.restricted(sc.V - {i}), f"remove silent {i}"),
                Claim(">=", "<=", text="silent active user removed"))
    if kind == "unsilence":
        i = _user(sc, spec)
        if i not in sc.A & sc.S:
            raise TransformRejected(f"user {i} is not a silent active user")
        users = UserSet(u.ground, sc.A, sc.D, sc.S - {i})
        return (_relabel(sc, users, src, f"unsilence {i}"),
                Claim(">=", "<=", text="silent active user made vocal"))
    if kind == "drop-wiretapped-edges":
        labels = _edge_labels(sc, spec, lambda e: bool(e.on & sc.D), kind)
        return (_relabel(sc, u, src.without_edges(labels), "drop wiretapped edges"),
                Claim("=", "=", text=f"edges {labels} meet the wiretapped users"))
    if kind == "drop-silent-edges":
        labels = _edge_labels(sc, spec, lambda e: e.on <= sc.S, kind)
        return (_relabel(sc, u, src.without_edges(labels), "drop silent edges"),
                Claim("=", "=", "=", text=f"edges {labels} are seen only by silent users"))
    if kind == "remove-constant-untrusted":
        i = _user(sc, spec)
        if i not in sc.D:
            raise TransformRejected(f"user {i} is not untrusted")
        v = o.h({i})
        if v > o.tol:
            raise TransformRejected(f"user {i} is not constant: H(Z_{i}) = {v}", v)
        users = UserSet(tuple(sc.V - {i}), sc.A, sc.D - {i}, sc.S)
        return (_relabel(sc, users, src.restricted(sc.V - {i}), f"remove constant {i}"),
                Claim("=", "=", text=f"untrusted user {i} observes a constant"))
    raise TransformRejected(f"unknown transform kind {kind!r}")


def _certify_capacity(sc, new, claim):
    c0 = secrecy_capacity(sc, cross_check=False).C_S
    c1 = secrecy_capacity(new, cross_check=False).C_S
    tol = sc.source.tol
    ok = {"=": abs(c1 - c0) <= tol, "<=": c1 <= c0 + tol, ">=": c1 >= c0 - tol}[claim.capacity]
    if not ok:
        raise AssertionError(f"capacity claim C_S' {claim.capacity} C_S violated: {c1} vs {c0}")
    return c0, c1


def normalize(sc, helpers=True):
    """Chain the R_S-preserving simplifications; returns (scenario, steps)."""
    steps = []
    cur = sc

    def apply(spec):
        nonlocal cur
        new, claim = transform_scenario(cur, spec)
        c0, c1 = _certify_capacity(cur, new, claim)
        steps.append({"transform": spec, "claim": claim.to_json(), "C_S": c1})
        cur = new

    if isinstance(cur.source, HypergraphSource) and any(e.on & cur.D for e in cur.source.edges):
        apply({"kind": "drop-wiretapped-edges"})
    for i in _ids(cur.D):
        if cur.source.h({i}) <= cur.source.tol:
            apply({"kind": "remove-constant-untrusted", "user": i})
    if isinstance(cur.source, HypergraphSource) and any(e.on <= cur.S for e in cur.source.edges):
        apply({"kind": "drop-silent-edges"})
    if helpers:
        changed = True
        while changed:
            changed = False
            for i in _ids(cur.V - cur.A - cur.D):
                try:
                    apply({"kind": "remove-determined-helper", "user": i})
                    changed = True
                    break
                except TransformRejected:
                    pass
    return cur, steps


# ---------------------------------------------------------------- hypergraph iff


@dataclass
class HypergraphVerdict:
    status: str                  # OPTIMAL, SUBOPTIMAL or NOT_APPLICABLE
    tag: str
    witness: dict
    normalized: Scenario | None = None
    R_CO: Fraction | None = None          # of the scenario passed in
    R_CO_normalized: Fraction | None = None
    bounds: list = field(default_factory=list)


def _hyp_iff_normalized(N):
    """Decide R_S = R_CO on a normalized hypergraph scenario with D = ∅."""
    src = N.source
    if N.D:
        return None
    if not N.S and N.A == N.V:
        m = mmi(src, _ids(N.V))
        inside = [e.label for e in src.edges if any(e.on <= C for C in m.fundamental)]
        w = {"partition": m.fundamental}
        if inside:
            e = src.edge(inside[0])
            w.update(edge=e.label, block=m.fundamental.block_of(next(iter(e.on))))
            return SUBOPTIMAL, "thm-hyp-iff", w
        return OPTIMAL, "thm-hyp-iff", w
    if N.S and N.A == N.V:
        s = alpha_and_sstar(N)
        T = N.V - N.S
        w = {"alpha": s.alpha, "S_star": s.s_star, "branch": s.branch}
        if s.branch == BRANCH_LT:
            bad = [sorted(C) for C in s.fundamental if src.h(T) - src.h(T - C) != 0]
            w.update(partition=s.fundamental, nonzero_blocks=bad)
            return (SUBOPTIMAL if bad else OPTIMAL), "thm-hyp-silent-1", w
        if s.branch in (BRANCH_SINGLE, BRANCH_GT):
            v = src.h(T | s.s_star) - src.h(s.s_star)
            w["H(Z_T|Z_S*)"] = v
            return (SUBOPTIMAL if v else OPTIMAL), "thm-hyp-silent-2", w
        W = T | s.s_star
        bad = [sorted(C) for C in s.fundamental if src.h(W) - src.h(W - C) != 0]
        w.update(partition=s.fundamental, nonzero_blocks=bad)
        return (SUBOPTIMAL if bad else OPTIMAL), "thm-hyp-silent-3", w
    return None


def check_oo_hypergraph(sc, cap=None):
    """Decisive verdict for hypergraphs covered by an iff characterization."""
    if not isinstance(sc.source, HypergraphSource):
        return HypergraphVerdict(NOT_APPLICABLE, "thm-hyp-iff", {"reason": "needs a hypergraph source"})
    cap = cap or secrecy_capacity(sc, cross_check=False)
    N, steps = normalize(sc, helpers=False)
    res = _hyp_iff_normalized(N)
    if res is None:
        return HypergraphVerdict(NOT_APPLICABLE, "thm-hyp-iff",
                                 {"reason": "needs S ⊊ A = V after normalization", "normalization": steps},
                                 N, cap.R_CO)
    status, tag, w = res
    rn = secrecy_capacity(N, cross_check=False).R_CO
    if steps:
        w["normalization"] = [s["transform"] for s in steps]
    if status == OPTIMAL:
        bounds = [BoundEvidence("lower", rn, tag, dict(w)), BoundEvidence("upper", rn, tag, dict(w))]
        if rn < cap.R_CO:
            w["R_CO_normalized"] = rn
            status = SUBOPTIMAL
    else:
        bounds = [BoundEvidence("upper", rn, tag, dict(w), strict=True)]
    return HypergraphVerdict(status, tag, w, N, cap.R_CO, rn, bounds)


# ---------------------------------------------------------------- necessary conditions


def check_oo_necessary(sc, cap=None):
    """Necessary conditions for R_S = R_CO (each FAIL gives an upper bound)."""
    cap = cap or secrecy_capacity(sc, cross_check=False)
    src = sc.source
    tol = src.tol
    R = cap.R_CO
    out = []

    if sc.A == sc.V and len(sc.V) == 2 and not sc.S and not sc.D:
        ok = R <= tol
        out.append(ConditionResult("nec-two-user", PASS if ok else FAIL, {"R_CO": R},
                                   None if ok else BoundEvidence("upper", R, "nec-two-user", {"R_CO": R}, strict=True),
                                   near_tie(R, 0, tol)))
    else:
        out.append(ConditionResult("nec-two-user", NOT_APPLICABLE, {"reason": "needs A = V, |V| = 2, S = D = ∅"}))

    # silence subsets of the vocal active users and drop every trusted helper
    Vp = sc.A | sc.D
    H0 = src.h(sc.V - sc.S)
    free = _ids(sc.A - sc.S)
    tried, fails, uppers, sens = 0, [], [], False
    for k in range(len(free)):
        for extra in combinations(free, k):
            Sp = sc.S | set(extra)
            if Sp == sc.S and Vp == sc.V:
                continue
            tried += 1
            users = UserSet(tuple(Vp), sc.A, sc.D, Sp)
            sub = Scenario(users, src.restricted(Vp), sc.name)
            cp = secrecy_capacity(sub, cross_check=False)
            if abs(cp.C_S - cap.C_S) > tol:
                continue
            sens = sens or near_tie(cp.C_S, cap.C_S, tol)
            Hp = src.h(Vp - Sp)
            w = {"S'": Sp, "V'": Vp, "C_S'": cp.C_S, "H'": Hp, "H": H0, "R_CO'": cp.R_CO}
            sens = sens or near_tie(Hp, H0, tol)
            if Hp < H0 - tol:
                fails.append(w)
            if cp.R_CO < R - tol:
                uppers.append(w)
    if fails:
        best = min(fails, key=lambda w: (w["R_CO'"], len(w["S'"]), _ids(w["S'"])))
        out.append(ConditionResult("nec-silence", FAIL, best,
                                   BoundEvidence("upper", R, "nec-silence", best, strict=True), sens))
    else:
        out.append(ConditionResult("nec-silence", PASS if tried else NOT_APPLICABLE, {"candidates": tried}, None, sens))
    if uppers:
        best = min(uppers, key=lambda w: (w["R_CO'"], len(w["S'"]), _ids(w["S'"])))
        out.append(ConditionResult("ub-silence", BOUND, best,
                                   BoundEvidence("upper", best["R_CO'"], "ub-silence", best), sens))

    # maximal common function of the active users
    try:
        tab = tabularize(src)
    except UnsupportedBackend as exc:
        out.append(ConditionResult("nec-common-function", UNEVALUATED, {"reason": str(exc)}))
        return out
    gk = gk_common_part(tab, sc.A)
    hu = rationalize(gk.cond(sc.D))
    gtol = max(tol, Fraction(1, 10**9))
    w = {"H(U|Z_D)": hu, "C_S": cap.C_S, "components": len(set(gk.labels.values()))}
    sens = near_tie(cap.C_S, hu, gtol)
    if cap.C_S <= hu + gtol:
        ok = R <= tol
        out.append(ConditionResult("nec-common-function", PASS if ok else FAIL, w,
                                   BoundEvidence("upper", Fraction(0), "nec-common-function", w), sens))
    else:
        w["reason"] = "C_S exceeds the entropy of the maximal common function"
        out.append(ConditionResult("nec-common-function", NOT_APPLICABLE, w, None, sens))
    return out


# ---------------------------------------------------------------- processing plans


@dataclass
class PlanEntry:
    label: str
    p: Fraction
    retain: dict = field(default_factory=dict)   # hypergraph: user -> edge labels kept
    tables: dict = field(default_factory=dict)   # tabular: user -> {value: value}


@dataclass
class ProcessingPlan:
    entries: list
    name: str = ""

    def validate(self, sc):
        if not self.entries:
            raise PlanError("a processing plan needs at least one entry")
        if sum((e.p for e in self.entries), Fraction(0)) != 1:
            raise PlanError("plan probabilities must sum to 1")
        if any(e.p < 0 for e in self.entries):
            raise PlanError("plan probabilities must be nonnegative")
        labels = [e.label for e in self.entries]
        if len(set(labels)) != len(labels):
            raise PlanError("plan labels must be distinct")
        src = sc.source
        for e in self.entries:
            if isinstance(src, HypergraphSource):
                if e.tables:
                    raise PlanError("lookup tables need a tabular source")
                for u, keep in e.retain.items():
                    if u not in sc.V:
                        raise PlanError(f"unknown user id {u!r} in plan {e.label!r}")
                    inc = {x.label for x in src.incident(u)}
                    bad = set(keep) - inc
                    if bad:
                        raise PlanError(f"plan {e.label!r}: user {u} cannot retain edges {sorted(bad)}")
            elif isinstance(src, TabularSource):
                if e.retain:
                    raise PlanError("retained edge sets need a hypergraph source")
                for u, tab in e.tables.items():
                    if u not in sc.V:
                        raise PlanError(f"unknown user id {u!r} in plan {e.label!r}")
                    missing = [a for a in src.alphabets[u] if a not in tab]
                    if missing:
                        raise PlanError(f"plan {e.label!r}: table of user {u} misses value {missing[0]!r}")
            else:
                raise UnsupportedBackend("processing plans need a hypergraph or tabular source")


def _processed_hypergraph(src, entry):
    ground = list(src.ground)
    edges, ext = [], []
    idx = {u: k for k, u in enumerate(ground)}
    n = len(ground)
    for e in src.edges:
        on = frozenset(u for u in e.on if e.label in entry.retain.get(u, {e.label}))
        if on:
            edges.append(Edge(e.label, on, e.weight))
        ext.append(Edge(e.label, frozenset(idx[u] for u in e.on) | frozenset(n + idx[u] for u in on), e.weight))
    return HypergraphSource(ground, edges), HypergraphSource(range(2 * n), ext)


def _processed_tabular(src, entry):
    ground = list(src.ground)
    n = len(ground)
    maps = [entry.tables.get(u) for u in ground]

    def proc(z):
        return tuple(z[k] if m is None else m[z[k]] for k, m in enumerate(maps))

    alph = {}
    for k, u in enumerate(ground):
        m = maps[k]
        seen = []
        for a in src.alphabets[u]:
            b = a if m is None else m[a]
            if b not in seen:
                seen.append(b)
        alph[u] = seen
    pmf = [(proc(z), p) for z, p in src.pmf]
    ext_alph = {k: src.alphabets[u] for k, u in enumerate(ground)}
    ext_alph.update({n + k: alph[u] for k, u in enumerate(ground)})
    ext_pmf = [(tuple(z) + proc(z), p) for z, p in src.pmf]
    return TabularSource(alph, pmf), TabularSource(ext_alph, ext_pmf)


@dataclass
class ProcessingOutcome:
    bound: BoundEvidence | None
    rejection: str | None
    R_CO_prime: Fraction | None
    H_Q: Fraction | None
    per_q: list

    @property
    def ok(self):
        return self.bound is not None


def processing_upper_bound(sc, plan, cap=None):
    plan.validate(sc)
    cap = cap or secrecy_capacity(sc, cross_check=False)
    src = sc.source
    tol = src.tol
    n = len(src.ground)
    idx = {u: k for k, u in enumerate(src.ground)}
    rows = []
    rco = Fraction(0)
    hq = Fraction(0)
    for e in plan.entries:
        if isinstance(src, HypergraphSource):
            proc, ext = _processed_hypergraph(src, e)
        else:
            proc, ext = _processed_tabular(src, e)
        outside = [n + idx[u] for u in sc.V - sc.D]
        secrecy = mutual_info(ext, outside, [idx[u] for u in sc.D], [n + idx[u] for u in sc.D]) if sc.D \
            else Fraction(0)
        psc = Scenario(sc.users, proc, f"{sc.name} [{e.label}]")
        r = secrecy_capacity(psc, cross_check=False).R_CO
        h = proc.h(sc.V - sc.S)
        rows.append({"q": e.label, "p": e.p, "secrecy_leak": secrecy, "R_CO": r, "H": h})
        if secrecy > tol:
            return ProcessingOutcome(None, f"secrecy condition fails for q={e.label}: leakage {fmt(secrecy, src.exact)}",
                                     None, None, rows)
        rco += e.p * r
        hq += e.p * h
    w = {"plan": plan.name, "R_CO'": rco, "H(Z'|Q)": hq, "C_S": cap.C_S, "per_q": rows}
    if cap.C_S > hq - rco + tol:
        return ProcessingOutcome(None, f"capacity condition fails: C_S = {fmt(cap.C_S, src.exact)} > "
                                       f"H(Z'|Q) - R_CO' = {fmt(hq - rco, src.exact)}", rco, hq, rows)
    b = BoundEvidence("upper", rco, "ub-processing", w,
                      sensitive=near_tie(cap.C_S, hq - rco, tol))
    return ProcessingOutcome(b, None, rco, hq, rows)


# ---------------------------------------------------------------- verdict engine


@dataclass
class AnalysisReport:
    name: str
    backend: str
    exact: bool
    C_S: Fraction
    rho: Fraction
    rho_bar: Fraction
    R_CO: Fraction
    verdict: str
    lower: Fraction
    upper: Fraction
    upper_strict: bool
    evidence: list = field(default_factory=list)     # BoundEvidence / ConditionResult
    notes: list = field(default_factory=list)        # rejected plans and transforms
    normalization: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    derivation: list = field(default_factory=list)

    @property
    def bracket(self):
        return self.lower, self.upper

    def bounds(self, kind=None, tag=None):
        out = []
        for e in self.evidence:
            b = e if isinstance(e, BoundEvidence) else None
            if b is not None and (kind is None or b.kind == kind) and (tag is None or b.tag == tag):
                out.append(b)
        return out

    def conditions(self, tag=None):
        return [e for e in self.evidence if isinstance(e, ConditionResult) and (tag is None or e.tag == tag)]

    def to_json(self):
        x = self.exact
        ev = sorted((e.to_json(x) for e in self.evidence),
                    key=lambda d: (d["kind"], d["tag"], json.dumps(d, sort_keys=True, ensure_ascii=False)))
        return {
            "scenario": self.name,
            "backend": self.backend,
            "C_S": fmt(self.C_S, x),
            "rho": fmt(self.rho, x),
            "rho_bar": fmt(self.rho_bar, x),
            "R_CO": fmt(self.R_CO, x),
            "verdict": self.verdict,
            "bracket": {"lower": fmt(self.lower, x), "upper": fmt(self.upper, x),
                        "upper_strict": self.upper_strict},
            "flags": list(self.flags),
            "normalization": _js(self.normalization, x),
            "evidence": ev,
            "notes": _js(self.notes, x),
        }


def _bracket(R, bounds, tol):
    lo, hi, strict = Fraction(0), R, False
    for b in bounds:
        if b.kind == "lower":
            lo = max(lo, b.value)
        elif b.value < hi or (b.value == hi and b.strict):
            hi, strict = b.value, b.strict
    if lo > hi + tol or (strict and tol == 0 and lo >= hi):
        trace = "\n".join(f"  {b.kind} {b.value} {'<' if b.strict else ''} {b.tag}: {b.witness}" for b in bounds)
        raise InconsistentEvidence(f"empty bracket: lower {lo} vs upper {hi}\n{trace}")
    return lo, hi, strict


def _collect(items):
    out = []
    for it in items:
        if isinstance(it, BoundEvidence):
            out.append(it)
        elif isinstance(it, ConditionResult) and it.implies is not None:
            out.append(it.implies)
    return out


def _transfer(sc, cap, spec, tol):
    """Evidence from a user-supplied change of scenario."""
    new, claim = transform_scenario(sc, spec)
    _, c1 = _certify_capacity(sc, new, claim)
    w = {"transform": spec, "claim": claim.to_json(), "C_S'": c1}
    if abs(c1 - cap.C_S) > tol:
        w["reason"] = "secrecy capacity changed; no conclusion about R_S"
        return [ConditionResult("transform", NOT_APPLICABLE, w)]
    sub = analyze(new, _depth=1)
    w.update(verdict=sub.verdict, bracket=[sub.lower, sub.upper])
    out = []
    if claim.rs in ("=", ">="):
        out.append(BoundEvidence("upper", sub.upper, "transform", dict(w), sub.upper_strict,
                                 TOLERANCE_SENSITIVE in sub.flags))
    if claim.rs in ("=", "<=") and sub.lower > 0:
        out.append(BoundEvidence("lower", sub.lower, "transform", dict(w),
                                 sensitive=TOLERANCE_SENSITIVE in sub.flags))
    return out


def analyze(sc, plans=(), transforms=(), _depth=0):
    cap = secrecy_capacity(sc)
    src = sc.source
    tol = src.tol
    R = cap.R_CO
    rep = AnalysisReport(sc.name, backend_name(src), src.exact, cap.C_S, cap.rho, cap.rho_bar, R,
                         UNDECIDED, Fraction(0), R, False, derivation=list(cap.derivation))
    if R <= tol:
        rep.evidence.append(BoundEvidence("lower", R, "rco-zero", {"R_CO": R}))
        rep.verdict, rep.lower = OO_OPTIMAL, R
        if near_tie(R, 0, tol):
            rep.flags.append(TOLERANCE_SENSITIVE)
            rep.verdict = UNDECIDED
        return rep
    items = []
    N, steps = normalize(sc)
    rep.normalization = steps
    capN = secrecy_capacity(N, cross_check=False)
    if capN.R_CO < R - tol:
        items.append(BoundEvidence("upper", capN.R_CO, "normalized-rco",
                                   {"steps": [s["transform"] for s in steps], "R_CO'": capN.R_CO}))
    if isinstance(N.source, HypergraphSource):
        res = _hyp_iff_normalized(N)
        if res is not None:
            status, tag, w = res
            if status == OPTIMAL:
                items += [BoundEvidence("lower", capN.R_CO, tag, w), BoundEvidence("upper", capN.R_CO, tag, w)]
            else:
                items.append(BoundEvidence("upper", capN.R_CO, tag, w, strict=True))
    items += check_oo_sufficient(N, capN)
    items += check_oo_necessary(N, capN)
    items += lower_bound_rs(N, capN)
    for plan in plans:
        try:
            out = processing_upper_bound(sc, plan, cap)
        except (PlanError, UnsupportedBackend) as exc:
            rep.notes.append({"plan": plan.name, "rejected": str(exc)})
            continue
        if out.ok:
            items.append(out.bound)
        else:
            rep.notes.append({"plan": plan.name, "rejected": out.rejection, "R_CO'": out.R_CO_prime,
                              "H(Z'|Q)": out.H_Q, "per_q": out.per_q})
    if _depth == 0:
        for spec in transforms:
            try:
                items += _transfer(sc, cap, spec, tol)
            except (TransformRejected, ScenarioError) as exc:
                rep.notes.append({"transform": spec, "rejected": str(exc)})
    bounds = _collect(items)
    lo, hi, strict = _bracket(R, bounds, tol)
    rep.lower, rep.upper, rep.upper_strict = lo, hi, strict
    rep.evidence = items
    if lo >= R - tol:
        verdict = OO_OPTIMAL
    elif hi < R - tol or (strict and hi <= R + tol):
        verdict = OO_SUBOPTIMAL
    else:
        verdict = UNDECIDED
    if not src.exact and verdict != UNDECIDED:
        sens = any(getattr(i, "sensitive", False) for i in items) or \
            near_tie(lo, R, tol) or near_tie(hi, R, tol) or \
            any(near_tie(s["C_S"], cap.C_S, tol) for s in steps)
        if sens:
            rep.flags.append(TOLERANCE_SENSITIVE)
            verdict = UNDECIDED
    rep.verdict = verdict
    return rep
