"""Secrecy capacity and the minimum rate of communication for omniscience.

The normative route is the pair of omniscience LPs (rates of the trusted
vocal users, and of the untrusted users).  Three independent routes are
used as cross-checks when the scenario shape allows them: brute-force MMI,
the fractional-partition LP and the silent-user α formula.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .entropy import FiniteLinearSource, HypergraphSource, TabularSource, mutual_info, restrict_oracle
from .lp import RationalLP, feasible, lexmin, solve_lp
from .numerics import check_size, near_tie
from .partitions import FractionalPartition, mmi

MAX_FLP_USERS = 10


class CrossCheckError(AssertionError):
    pass


def _subsets(mask):
    """Nonempty submasks of `mask`, increasing."""
    out = []
    sub = mask
    while sub:
        out.append(sub)
        sub = (sub - 1) & mask
    return sorted(out)


def _sorted_ids(o, mask):
    return sorted(o.ids(mask))


def rho_constraints(sc):
    """[(B, rhs)] with r(B) >= max_{j∈A∖B} H(Z_B | Z_{V∖S∖B}, Z_j).

    B = ∅ and, for each j, the constraints with j ∈ B are redundant and
    dropped; B ⊇ A leaves nothing to maximize over and is dropped too.
    """
    o = sc.source
    T = sc.users.trusted_vocal
    check_size(len(T), "trusted vocal set")
    tm = o.mask(T)
    vs = o.mask(sc.V - sc.S)
    am = o.mask(sc.A)
    jbits = [o.mask([j]) for j in sorted(sc.A)]
    out = []
    for B in _subsets(tm):
        if am & ~B == 0:
            continue
        rhs = max(o.hm(vs | jb) - o.hm((vs & ~B) | jb) for jb in jbits if not jb & B)
        out.append((o.ids(B), rhs))
    return out


def rho(sc):
    """min r(V∖D∖S) over the omniscience rate constraints; returns (value, r*)."""
    T = sorted(sc.users.trusted_vocal)
    lp = RationalLP(T, {i: 1 for i in T}, "min", name="rho")
    # r >= 0 is implied by the singleton constraints since |A| >= 2
    for B, rhs in rho_constraints(sc):
        lp.add({i: 1 for i in B}, ">=", rhs, "B=" + ",".join(map(str, sorted(B))))
    res = lexmin(lp)
    if not res.ok:
        raise RuntimeError(f"rho LP returned {res.status}")
    return res.value, dict(res.x)


def rho_bar(sc):
    """min r(D) over the rate region of Z_D with the omniscience constraints."""
    D = sorted(sc.D)
    if not D:
        return Fraction(0), {}
    o = sc.source
    dm = o.mask(D)
    jbits = [o.mask([j]) for j in sorted(sc.A)]
    lp = RationalLP(D, {i: 1 for i in D}, "min", name="rho_bar")
    for B in _subsets(dm):
        ids = o.ids(B)
        tag = ",".join(map(str, sorted(ids)))
        lp.add({i: 1 for i in ids}, "<=", o.hm(B), "region B=" + tag)
        rhs = max(o.hm(dm | jb) - o.hm((dm & ~B) | jb) for jb in jbits)
        lp.add({i: 1 for i in ids}, ">=", rhs, "B=" + tag)
    res = lexmin(lp)
    if not res.ok:
        raise RuntimeError(f"rho_bar LP is {res.status}; the entropy oracle is not a polymatroid")
    return res.value, dict(res.x)


@dataclass
class CapacityResult:
    C_S: Fraction
    rho: Fraction
    rho_bar: Fraction
    R_CO: Fraction
    r_star: dict
    r_bar_star: dict
    derivation: list = field(default_factory=list)
    exact: bool = True


def _same(a, b, tol, what):
    if abs(a - b) > tol:
        raise CrossCheckError(f"{what}: {a} != {b}")


def secrecy_capacity(sc, cross_check=True):
    o = sc.source
    T = sc.users.trusted_vocal
    D = set(sc.D)
    r, rs = rho(sc)
    rb, rbs = rho_bar(sc)
    h_td = o.h(T | D) - o.h(D)
    C = h_td - r
    tol = o.tol
    if C < -tol:
        raise RuntimeError(f"negative secrecy capacity {C}")
    res = CapacityResult(C, r, rb, r + rb, rs, rbs, ["general LP"], o.exact)
    if not cross_check:
        return res
    U = sc.V - D
    if not sc.S and sc.A == U and len(U) <= 8:
        m = mmi(o, sorted(U), sorted(D))
        _same(C, m.value, tol, "capacity vs MMI")
        res.derivation.append("MMI cross-check")
    if not sc.S and len(U) <= 6:
        f = capacity_fractional_lp(sc, support=False)
        _same(C, f.value, tol, "capacity vs fractional LP")
        res.derivation.append("fractional LP cross-check")
    if sc.S and sc.A == U:
        s = alpha_and_sstar(sc)
        _same(C, s.C_S, tol, "capacity vs silent-user formula")
        res.derivation.append("silent-user formula")
    return res


def rco(sc, cap=None):
    cap = cap or secrecy_capacity(sc, cross_check=False)
    if sc.A == sc.V and not sc.S and not sc.D and len(sc.V) <= 8:
        o = sc.source
        _same(cap.R_CO, o.h(sc.V) - mmi(o, sorted(sc.V)).value, o.tol, "R_CO vs H - I")
    return cap.R_CO


# ---------------------------------------------------------------- fractional partition LP


@dataclass
class FractionalLPResult:
    value: Fraction
    lam_star: FractionalPartition | None
    support_union: list
    h_family: list
    vertices: list
    ground: frozenset
    family: list


def _lambda_lp(oracle, U, family, name):
    """Coverage constraints of Λ(U, family); variables are the sets themselves."""
    lp = RationalLP(list(family), {}, "min", name=name)
    for i in sorted(U):
        lp.add({B: 1 for B in family if i in B}, "==", 1, f"cover {i}")
    return lp


def _as_lambda(U, x, family=None):
    return FractionalPartition(U, {B: v for B, v in x.items() if v}, family)


def _family_order(sets):
    return sorted(sets, key=lambda B: (len(B), sorted(B)))


def capacity_fractional_lp(sc, support=True):
    """C_S = min over λ ∈ Λ(V∖D, H) of I_λ(Z_{V∖D}|Z_D), H = {B : ∅ ≠ B ⊉ A}."""
    # sources are immutable, so results are cached on the source per role assignment
    cache = sc.source.__dict__.setdefault("_flp_cache", {})
    key = (frozenset(sc.A), frozenset(sc.S), frozenset(sc.D), frozenset(sc.V))
    hit = cache.get((key, True)) or (cache.get((key, False)) if not support else None)
    if hit is None:
        hit = cache[(key, support)] = _fractional_lp(sc, support)
    return hit


def _fractional_lp(sc, support):
    if sc.S:
        raise ValueError("the fractional-partition characterization needs S = ∅")
    U = sorted(sc.V - sc.D)
    if len(U) > MAX_FLP_USERS:
        raise ValueError(f"fractional LP is limited to {MAX_FLP_USERS} users")
    o = restrict_oracle(sc.source, U, sc.D)
    full = o.mask(U)
    am = o.mask(sc.A)
    fam_masks = [B for B in _subsets(full) if am & ~B]
    family = _family_order(o.ids(B) for B in fam_masks)
    hU = o.hm(full)
    cost = {B: hU - o.h(set(U) - B) for B in family}
    lp = _lambda_lp(o, U, family, "fractional")
    lp.objective = {B: -c for B, c in cost.items()}
    res = solve_lp(lp)
    if not res.ok:
        raise RuntimeError(f"fractional LP returned {res.status}")
    value = hU + res.value
    if not support:
        return FractionalLPResult(value, None, [], [], [], frozenset(U), family)
    res = lexmin(lp, res)
    lam = _as_lambda(U, res.x, family)
    vertices = [lam]
    union = set(lam.weights)
    base = lp.copy()
    base.add(dict(lp.objective), "==", res.value, "optimal-face")
    for B in family:
        if B in union:
            continue
        probe = base.copy()
        probe.objective = {B: 1}
        probe.sense = "max"
        r = solve_lp(probe)
        if r.ok and r.value > 0:
            v = _as_lambda(U, r.x, family)
            vertices.append(v)
            union |= set(v.weights)
    union = _family_order(union)
    fullset = frozenset(U)
    hfam = _family_order({B for B in union} | {fullset - B for B in union})
    return FractionalLPResult(value, lam, union, hfam, vertices, fullset, family)


def lambda_lp(oracle, U, family, objective="max_info"):
    """Optimize I_λ(Z_U) over Λ(U, family); returns (value, λ) or (None, None)."""
    family = _family_order({frozenset(B) for B in family})
    full = set(U)
    hU = oracle.h(full)
    lp = _lambda_lp(oracle, U, family, "lambda")
    if objective == "feasible":
        r = feasible(lp)
        return (None, _as_lambda(U, r.x, family)) if r.ok else (None, None)
    # maximize I_λ = H - Σ λ c  <=>  minimize Σ λ c
    lp.objective = {B: hU - oracle.h(full - B) for B in family}
    r = solve_lp(lp)
    if not r.ok:
        return None, None
    r = lexmin(lp, r)
    return hU - r.value, _as_lambda(U, r.x, family)


# ---------------------------------------------------------------- silent users


BRANCH_SINGLE, BRANCH_LT, BRANCH_GT, BRANCH_EQ = "|V∖S|=1", "I<α", "I>α", "I=α"


@dataclass
class SilentCapacity:
    alpha: Fraction
    s_star: frozenset
    branch: str
    C_S: Fraction
    I: Fraction | None = None        # I(Z_{V∖D∖S} | Z_D) when |V∖D∖S| > 1
    fundamental: object = None       # P*(Z_{V∖D∖S} | Z_D)
    sensitive: bool = False


def alpha_and_sstar(sc):
    U = sc.V - sc.D
    if not sc.S or sc.A != U:
        raise ValueError("alpha_and_sstar needs ∅ ≠ S ⊊ A = V∖D")
    o = sc.source
    tol = o.tol
    T = U - sc.S
    D = set(sc.D)
    mi = {i: mutual_info(o, T, {i}, D) for i in sorted(sc.S)}
    alpha = min(mi.values())
    s_star = frozenset(i for i, v in mi.items() if v - alpha <= tol)
    sens = any(near_tie(v, alpha, tol) for v in mi.values())
    if len(T) == 1:
        return SilentCapacity(alpha, s_star, BRANCH_SINGLE, alpha, sensitive=sens)
    m = mmi(o, sorted(T), sorted(D))
    I = m.value
    if abs(I - alpha) <= tol:
        branch = BRANCH_EQ
    elif I < alpha:
        branch = BRANCH_LT
    else:
        branch = BRANCH_GT
    sens = sens or near_tie(I, alpha, tol) or m.sensitive
    return SilentCapacity(alpha, s_star, branch, min(alpha, I), I, m.fundamental, sens)


def amin_constraints(sc):
    """Constraints r(B∖S) >= H(Z_{B∖S}|Z_{V∖B}), B ∈ {∅ ≠ B ⊉ A}, for S ⊊ A = V.

    Normalized to one constraint per left-hand side (the largest right-hand
    side), dropping B∖S = ∅; used to test the specialization of the general
    constraint generator.
    """
    o = sc.source
    V = set(sc.V)
    out = {}
    am = o.mask(sc.A)
    for B in _subsets(o.full):
        if not am & ~B:
            continue
        ids = o.ids(B)
        lhs = frozenset(ids - sc.S)
        if not lhs:
            continue
        rhs = o.h(V) - o.h(V - ids) if not (ids & sc.S) else o.h(lhs | (V - ids)) - o.h(V - ids)
        if lhs not in out or rhs > out[lhs]:
            out[lhs] = rhs
    return out


def csiszar_narayan_constraints(sc):
    """r(B) >= H(Z_B|Z_{V∖B}) for B ∈ {B ⊆ V∖D : ∅ ≠ B ⊉ A} (S = ∅), conditioned on Z_D."""
    o = sc.source
    U = set(sc.V - sc.D)
    D = set(sc.D)
    out = {}
    for B in _subsets(o.mask(U)):
        ids = o.ids(B)
        if sc.A <= ids:
            continue
        out[frozenset(ids)] = o.h(U | D) - o.h((U - ids) | D)
    return out


def backend_name(src):
    for cls, name in ((HypergraphSource, "hypergraph"), (FiniteLinearSource, "linear"),
                      (TabularSource, "tabular")):
        if isinstance(src, cls):
            return name
    return type(src).__name__
