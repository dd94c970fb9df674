"""Partitions, fractional partitions, MMI and the fundamental partition."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .entropy import TabularSource, ViewOracle, mutual_info
from .numerics import check_size, near_tie, to_fraction


class Partition:
    """Immutable set partition with canonical block order (by minimum id)."""

    __slots__ = ("blocks", "ground")

    def __init__(self, blocks):
        bl = [tuple(sorted(b)) for b in blocks]
        if any(not b for b in bl):
            raise ValueError("partition blocks must be nonempty")
        flat = [u for b in bl for u in b]
        if len(flat) != len(set(flat)):
            raise ValueError("partition blocks must be disjoint")
        self.blocks = tuple(sorted(bl, key=lambda b: b[0]))
        self.ground = frozenset(flat)

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return (frozenset(b) for b in self.blocks)

    def __eq__(self, other):
        return isinstance(other, Partition) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        return "{" + ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"

    def block_of(self, u):
        for b in self.blocks:
            if u in b:
                return frozenset(b)
        raise KeyError(u)

    def finer_eq(self, other) -> bool:
        """Every block of self lies inside some block of other."""
        return self.ground == other.ground and all(any(set(b) <= set(c) for c in other.blocks)
                                                   for b in self.blocks)

    def to_json(self):
        return [list(b) for b in self.blocks]

    @classmethod
    def singletons(cls, U):
        return cls([[u] for u in U])


def _rgs(n):
    """Restricted growth strings of length n."""
    a = [0] * n
    m = [0] * n   # m[k] = max(a[:k+1])
    yield a
    while True:
        k = n - 1
        while k > 0 and a[k] > m[k - 1]:
            k -= 1
        if k == 0:
            return
        a[k] += 1
        m[k] = max(m[k - 1], a[k])
        for j in range(k + 1, n):
            a[j] = 0
            m[j] = m[k]
        yield a


def enumerate_partitions(U, min_blocks=2):
    """Every partition of U with at least `min_blocks` blocks, exactly once."""
    U = sorted(set(U))
    if len(U) < 2:
        raise ValueError("need at least two users to partition")
    check_size(len(U))
    for a in _rgs(len(U)):
        k = max(a) + 1
        if k < min_blocks:
            continue
        blocks = [[] for _ in range(k)]
        for u, b in zip(U, a):
            blocks[b].append(u)
        yield Partition(blocks)


def meet(P1, P2):
    if P1.ground != P2.ground:
        raise ValueError("meet needs partitions of the same ground set")
    return Partition([set(b) & set(c) for b in P1.blocks for c in P2.blocks if set(b) & set(c)])


def _check_disjoint(U, W):
    if set(U) & set(W):
        raise ValueError("the conditioning set must be disjoint from the partitioned users")


def partition_info(oracle, P, W=()):
    """I_P(Z_U|Z_W) = (Σ_C H(Z_C|Z_W) − H(Z_U|Z_W)) / (|P|−1)."""
    if len(P) < 2:
        raise ValueError("partition_info needs at least two blocks")
    _check_disjoint(P.ground, W)
    W = set(W)
    hw = oracle.h(W)
    total = sum((oracle.h(set(C) | W) - hw for C in P), Fraction(0))
    return (total - (oracle.h(set(P.ground) | W) - hw)) / (len(P) - 1)


@dataclass
class MmiResult:
    value: Fraction
    optimal: list          # Π*
    fundamental: Partition  # P*
    sensitive: bool = False

    def to_json(self, fmtv=str):
        return {"value": fmtv(self.value), "fundamental": self.fundamental.to_json(),
                "optimal": [p.to_json() for p in self.optimal]}


def mmi(oracle, U, W=()):
    """Brute-force multivariate mutual information over all partitions of U."""
    U = sorted(set(U))
    _check_disjoint(U, W)
    oracle.mask(U)
    if len(U) < 2:
        raise ValueError("MMI needs at least two users")
    check_size(len(U))
    wmask = oracle.mask(W)
    hw = oracle.hm(wmask)
    bit = [oracle.mask([u]) for u in U]
    hu = oracle.hm(oracle.mask(U) | wmask) - hw
    tol = oracle.tol
    band = 10 * tol
    best = None
    scored = []   # candidates within the guard band of the running minimum
    for a in _rgs(len(U)):
        k = max(a) + 1
        if k < 2:
            continue
        masks = [0] * k
        for b, m in zip(a, bit):
            masks[b] |= m
        s = sum((oracle.hm(m | wmask) for m in masks), Fraction(0)) - k * hw
        v = (s - hu) / (k - 1)
        if best is None or v < best:
            best = v
            scored = [t for t in scored if t[0] - best <= band]
        if v - best <= band:
            scored.append((v, tuple(a)))
    opt = []
    sensitive = False
    for v, a in scored:
        if v - best <= tol:
            opt.append(_from_rgs(U, a))
        elif near_tie(v, best, tol):
            sensitive = True
    fund = opt[0]
    for P in opt[1:]:
        fund = meet(fund, P)
    if fund not in opt:
        # the semilattice property fails only if the oracle is not entropic
        raise AssertionError(f"meet of optimal partitions {fund} is not optimal")
    return MmiResult(best, sorted(opt, key=lambda p: (len(p), p.blocks)), fund, sensitive)


def _from_rgs(U, a):
    blocks = [[] for _ in range(max(a) + 1)]
    for u, b in zip(U, a):
        blocks[b].append(u)
    return Partition(blocks)


# ---------------------------------------------------------------- fractional partitions


class FractionalPartition:
    """λ: proper nonempty subsets of U -> nonnegative rationals, unit coverage."""

    def __init__(self, U, weights, support=None):
        self.ground = frozenset(U)
        w = {}
        for B, x in weights.items():
            B = frozenset(B)
            x = to_fraction(x)
            if x < 0:
                raise ValueError("fractional partition weights must be nonnegative")
            if not B or not B <= self.ground:
                raise ValueError(f"invalid set {sorted(B)} in fractional partition")
            if B == self.ground:
                raise ValueError("the full ground set is not allowed in a fractional partition")
            if x:
                w[B] = w.get(B, Fraction(0)) + x
        self.weights = w
        for u in self.ground:
            cov = sum((x for B, x in w.items() if u in B), Fraction(0))
            if cov != 1:
                raise ValueError(f"user {u} is covered with total weight {cov}, not 1")
        if support is not None:
            support = {frozenset(B) for B in support}
            bad = [B for B in w if B not in support]
            if bad:
                raise ValueError(f"set {sorted(bad[0])} lies outside the declared support family")
        self.support = support

    def items(self):
        return sorted(self.weights.items(), key=lambda t: (len(t[0]), sorted(t[0])))

    def total(self):
        return sum(self.weights.values(), Fraction(0))

    def to_json(self):
        return [{"B": sorted(B), "w": str(x)} for B, x in self.items()]

    def shape(self):
        """('partition', P), ('co-partition', P) or (None, None)."""
        sets = list(self.weights)
        if all(x == 1 for x in self.weights.values()):
            try:
                P = Partition(sets)
                if P.ground == self.ground and len(P) >= 2:
                    return "partition", P
            except ValueError:
                pass
        comps = [self.ground - B for B in sets]
        k = len(comps)
        if k >= 2 and all(x == Fraction(1, k - 1) for x in self.weights.values()):
            try:
                P = Partition(comps)
                if P.ground == self.ground:
                    return "co-partition", P
            except ValueError:
                pass
        return None, None

    def __repr__(self):
        return "λ(" + ", ".join(f"{sorted(B)}:{x}" for B, x in self.items()) + ")"

    @classmethod
    def co_partition(cls, P):
        k = len(P)
        return cls(P.ground, {P.ground - C: Fraction(1, k - 1) for C in P})

    @classmethod
    def indicator(cls, P):
        return cls(P.ground, {C: 1 for C in P})


def fractional_info(oracle, lam, W=()):
    """I_λ(Z_U|Z_W) = H(Z_U|Z_W) − Σ_B λ(B) H(Z_B|Z_{U∖B},Z_W)."""
    _check_disjoint(lam.ground, W)
    W = set(W)
    U = set(lam.ground)
    hU = oracle.h(U | W)
    val = hU - oracle.h(W)
    for B, x in lam.items():
        val -= x * (hU - oracle.h((U - B) | W))
    return val


@dataclass
class ShearerResult:
    lower: Fraction
    value: Fraction
    upper: Fraction

    def __iter__(self):
        return iter((self.lower, self.value, self.upper))


def shearer_bounds(oracle, lam, W=()):
    """max_B λ(B) I(Z_B∧Z_{U∖B}|W) ≤ I_λ ≤ Σ_B λ(B) I(Z_B∧Z_{U∖B}|W)."""
    U = set(lam.ground)
    terms = [x * mutual_info(oracle, B, U - B, W) for B, x in lam.items()]
    lower = max(terms, default=Fraction(0))
    upper = sum(terms, Fraction(0))
    value = fractional_info(oracle, lam, W)
    tol = oracle.tol
    if not (lower - tol <= value <= upper + tol):
        raise AssertionError(f"Shearer sandwich violated: {lower} <= {value} <= {upper}")
    return ShearerResult(lower, value, upper)


# ---------------------------------------------------------------- data processing check


def add_channel(source, inputs, channel, new_id, alphabet=None):
    """Extend a tabular source with Y drawn from channel(inputs values).

    `channel` maps the tuple of values of `inputs` (sorted id order) to a
    dict {y: probability}.
    """
    if not isinstance(source, TabularSource):
        raise TypeError("add_channel needs a tabular source")
    inputs = sorted(set(inputs))
    idx = [source.ground.index(u) for u in inputs]
    ys = set()
    rows = []
    order = sorted(list(source.ground) + [new_id])
    pos = order.index(new_id)
    for z, p in source.pmf:
        key = tuple(z[k] for k in idx)
        dist = channel[key] if isinstance(channel, dict) else channel(key)
        tot = sum(map(to_fraction, dist.values()))
        if tot != 1:
            raise ValueError(f"channel row {key} sums to {tot}")
        for y, py in dist.items():
            py = to_fraction(py)
            if py:
                zz = list(z)
                zz.insert(pos, y)
                rows.append((tuple(zz), p * py))
                ys.add(y)
    alph = dict(source.alphabets)
    alph[new_id] = list(alphabet) if alphabet is not None else sorted(ys, key=repr)
    return TabularSource(alph, rows)


@dataclass
class DpiReport:
    delta: Fraction
    gamma: Fraction
    dpi1: tuple      # (lhs, rhs)
    dpi2: tuple
    ok: bool

    @property
    def slack1(self):
        return self.dpi1[0] - self.dpi1[1]

    @property
    def slack2(self):
        return self.dpi2[0] - self.dpi2[1]


def dpi_check(source, lam, i, y, W=()):
    """Evaluate both data-processing inequalities for I_λ with Z_i -> Y.

    `source` already contains the auxiliary variable under id `y`.
    """
    U = set(lam.ground)
    W = set(W)
    if i not in U:
        raise ValueError("the processed user must belong to the fractional partition's ground set")
    if y in U or y in W:
        raise ValueError("the auxiliary variable must be a separate column")
    source.mask(U | W | {y})
    base = fractional_info(source, lam, W)
    delta = (lam.total() - 1) * mutual_info(source, {y}, U - {i}, W | {i})
    swapped = ViewOracle(source, {u: (y if u == i else u) for u in U | W})
    processed = fractional_info(swapped, lam, W)
    cond_y = fractional_info(source, lam, W | {y})
    gamma = min(max((mutual_info(source, {y}, {j}, W) for j in U - B), default=Fraction(0))
                for B, _ in lam.items() if i in B)
    tol = source.tol
    d1 = (base, processed - delta)
    d2 = (base, cond_y - delta + gamma)
    return DpiReport(delta, gamma, d1, d2, d1[0] >= d1[1] - tol and d2[0] >= d2[1] - tol)
