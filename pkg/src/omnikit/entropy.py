"""Source models, entropy oracles and the basic information quantities.

Every source model is an entropy oracle: it maps a subset B of user ids to
H(Z_B) in bits.  Internally subsets are bitmasks over the oracle's ground
order; the public functions accept any iterable of ids.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

from .numerics import TABULAR_TOL, check_size, rationalize, to_fraction


class UnknownUser(KeyError):
    def __str__(self):
        return f"unknown user id {self.args[0]!r}"


class ScenarioError(ValueError):
    """A user-set or source rule is violated; the message names the rule."""


class UnsupportedBackend(ValueError):
    pass


def _bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class EntropyOracle:
    """h: 2^ground -> bits.  Subclasses implement `_eval(mask)`."""

    exact = True

    def __init__(self, ground):
        ground = tuple(ground)
        if len(set(ground)) != len(ground):
            raise ScenarioError("duplicate user id")
        self.ground = tuple(sorted(ground))
        self._index = {u: k for k, u in enumerate(self.ground)}
        self._cache = {0: Fraction(0)}
        self.full = (1 << len(self.ground)) - 1

    @property
    def tol(self):
        return Fraction(0) if self.exact else TABULAR_TOL

    def mask(self, B) -> int:
        m = 0
        for u in B:
            try:
                m |= 1 << self._index[u]
            except KeyError:
                raise UnknownUser(u) from None
        return m

    def ids(self, mask) -> frozenset:
        return frozenset(self.ground[k] for k in _bits(mask))

    def hm(self, mask: int) -> Fraction:
        # plain dict memo: a racing duplicate evaluation stores the same value
        v = self._cache.get(mask)
        if v is None:
            v = self._eval(mask)
            self._cache[mask] = v
        return v

    def h(self, B) -> Fraction:
        return self.hm(self.mask(B))

    def _eval(self, mask):
        raise NotImplementedError

    def restricted(self, vertices):
        """Marginal oracle on `vertices`; backends override with a native source."""
        keep = set(vertices)
        self.mask(keep)
        return restrict_oracle(self, [u for u in self.ground if u in keep])

    def __contains__(self, u):
        return u in self._index


# ---------------------------------------------------------------- backends


@dataclass(frozen=True)
class Edge:
    label: str
    on: frozenset
    weight: Fraction = Fraction(1)


class HypergraphSource(EntropyOracle):
    """Each edge is an independent variable of `weight` bits seen by `on`."""

    kind = "hypergraph"

    def __init__(self, vertices, edges):
        super().__init__(vertices)
        clean = []
        seen = set()
        for e in edges:
            if not isinstance(e, Edge):
                label, on, *w = e
                e = Edge(str(label), frozenset(on), to_fraction(w[0]) if w else Fraction(1))
            if e.label in seen:
                raise ScenarioError(f"duplicate edge label {e.label!r}")
            seen.add(e.label)
            if not e.on:
                raise ScenarioError(f"edge {e.label!r} has empty incidence")
            if e.weight <= 0:
                raise ScenarioError(f"edge {e.label!r} must have positive weight")
            self.mask(e.on)
            clean.append(Edge(e.label, frozenset(e.on), to_fraction(e.weight)))
        self.edges = tuple(clean)
        self._edge_masks = [self.mask(e.on) for e in self.edges]

    def _eval(self, mask):
        return sum((e.weight for e, m in zip(self.edges, self._edge_masks) if m & mask), Fraction(0))

    def edge(self, label):
        for e in self.edges:
            if e.label == label:
                return e
        raise KeyError(label)

    def incident(self, u):
        return [e for e in self.edges if u in e.on]

    def weight_of(self, edges):
        return sum((e.weight for e in edges), Fraction(0))

    def h_given_edges(self, B, given_labels) -> Fraction:
        """H(Z_B | X_E') for a set E' of edge labels."""
        m = self.mask(B)
        given = set(given_labels)
        return sum((e.weight for e, em in zip(self.edges, self._edge_masks)
                    if em & m and e.label not in given), Fraction(0))

    def without_edges(self, labels):
        labels = set(labels)
        return HypergraphSource(self.ground, [e for e in self.edges if e.label not in labels])

    def restricted(self, vertices):
        """Drop users outside `vertices`; edges keep their remaining incidences."""
        keep = frozenset(vertices)
        self.mask(keep)
        edges = [Edge(e.label, e.on & keep, e.weight) for e in self.edges if e.on & keep]
        return HypergraphSource(keep, edges)

    def with_copy(self, u, new):
        edges = [Edge(e.label, e.on | {new} if u in e.on else e.on, e.weight) for e in self.edges]
        return HypergraphSource(self.ground + (new,), edges)

    def __repr__(self):
        return f"HypergraphSource(V={list(self.ground)}, edges={len(self.edges)})"


def _rank_mod(rows, q):
    rows = [[x % q for x in r] for r in rows]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        inv = pow(rows[rank][c], q - 2, q)
        rows[rank] = [x * inv % q for x in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][c]:
                f = rows[i][c]
                rows[i] = [(x - f * y) % q for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def _is_prime(q):
    return q >= 2 and all(q % d for d in range(2, int(q ** 0.5) + 1))


class FiniteLinearSource(EntropyOracle):
    """Z_i = M_i s for a uniform seed s over GF(q)^m."""

    kind = "linear"

    def __init__(self, q, m, matrices):
        super().__init__(matrices.keys())
        if not _is_prime(q):
            raise ScenarioError(f"field order {q} is not prime")
        self.q, self.m = int(q), int(m)
        self.matrices = {}
        for u, rows in matrices.items():
            rows = [list(map(int, r)) for r in rows]
            if any(len(r) != self.m for r in rows):
                raise ScenarioError(f"matrix of user {u} must have {self.m} columns")
            self.matrices[u] = [[x % self.q for x in r] for r in rows]
        # rank * log2(q) is only rational for q = 2
        self.exact = self.q == 2

    def _eval(self, mask):
        rows = [r for k in _bits(mask) for r in self.matrices[self.ground[k]]]
        r = _rank_mod(rows, self.q) if rows else 0
        if self.exact:
            return Fraction(r)
        return rationalize(r * math.log2(self.q))

    def restricted(self, vertices):
        keep = set(vertices)
        self.mask(keep)
        return FiniteLinearSource(self.q, self.m, {u: self.matrices[u] for u in self.ground if u in keep})

    def with_copy(self, u, new):
        mats = dict(self.matrices)
        mats[new] = [list(r) for r in self.matrices[u]]
        return FiniteLinearSource(self.q, self.m, mats)

    def __repr__(self):
        return f"FiniteLinearSource(q={self.q}, m={self.m}, V={list(self.ground)})"


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


class TabularSource(EntropyOracle):
    """Explicit joint pmf; outcome tuples list user values in ground order."""

    kind = "tabular"
    exact = False

    def __init__(self, alphabets, pmf):
        super().__init__(alphabets.keys())
        self.alphabets = {u: [_freeze(a) for a in alphabets[u]] for u in self.ground}
        for u, al in self.alphabets.items():
            if not al:
                raise ScenarioError(f"user {u} has an empty alphabet")
            if len(set(al)) != len(al):
                raise ScenarioError(f"user {u} has a repeated alphabet symbol")
        sets = [set(self.alphabets[u]) for u in self.ground]
        total = Fraction(0)
        acc = Counter()
        for z, p in pmf:
            z = tuple(_freeze(x) for x in z)
            p = to_fraction(p)
            if len(z) != len(self.ground):
                raise ScenarioError(f"pmf outcome {z} has wrong length")
            for x, s, u in zip(z, sets, self.ground):
                if x not in s:
                    raise ScenarioError(f"value {x!r} not in the alphabet of user {u}")
            if p < 0:
                raise ScenarioError("pmf entries must be nonnegative")
            total += p
            acc[z] += p
        if total != 1:
            raise ScenarioError(f"pmf sums to {total}, not 1")
        self.pmf = tuple(sorted(((z, p) for z, p in acc.items() if p > 0), key=lambda t: repr(t[0])))

    def h_float(self, mask) -> float:
        idx = list(_bits(mask))
        marg = Counter()
        for z, p in self.pmf:
            marg[tuple(z[k] for k in idx)] += p
        return -sum(float(p) * math.log2(p) for p in marg.values() if p > 0) if idx else 0.0

    def _eval(self, mask):
        return max(rationalize(self.h_float(mask)), Fraction(0))

    def column(self, u):
        k = self._index[u]
        return [z[k] for z, _ in self.pmf]

    def restricted(self, vertices):
        keep = [u for u in self.ground if u in set(vertices)]
        self.mask(keep)
        idx = [self._index[u] for u in keep]
        acc = Counter()
        for z, p in self.pmf:
            acc[tuple(z[k] for k in idx)] += p
        return TabularSource({u: self.alphabets[u] for u in keep}, list(acc.items()))

    def with_copy(self, u, new):
        return self.with_column(new, self.alphabets[u], lambda z: z[self._index[u]])

    def with_column(self, new, alphabet, fn):
        """Append a user whose value is fn(outcome tuple)."""
        if new in self._index:
            raise ScenarioError(f"user {new} already exists")
        al = dict(self.alphabets)
        al[new] = list(alphabet)
        order = sorted(al)
        pos = order.index(new)
        pmf = []
        for z, p in self.pmf:
            zz = list(z)
            zz.insert(pos, fn(z))
            pmf.append((tuple(zz), p))
        return TabularSource(al, pmf)

    def __repr__(self):
        return f"TabularSource(V={list(self.ground)}, support={len(self.pmf)})"


class ViewOracle(EntropyOracle):
    """h'(B) = h(phi(B) ∪ G) − h(G) for an id map phi and a given set G."""

    def __init__(self, base, mapping, given=()):
        super().__init__(mapping.keys())
        self.base = base
        self.mapping = dict(mapping)
        self._gmask = base.mask(given)
        self._h_given = base.hm(self._gmask)
        self._lift = [base.mask([self.mapping[u]]) for u in self.ground]
        self.exact = base.exact

    def _eval(self, mask):
        m = self._gmask
        for k in _bits(mask):
            m |= self._lift[k]
        return self.base.hm(m) - self._h_given


def restrict_oracle(oracle, U, given=()):
    return ViewOracle(oracle, {u: u for u in U}, given)


# ---------------------------------------------------------------- user sets


@dataclass(frozen=True)
class UserSet:
    ground: tuple
    active: frozenset
    untrusted: frozenset = frozenset()
    silent: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "ground", tuple(sorted(self.ground)))
        for name in ("active", "untrusted", "silent"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        V = set(self.ground)
        if len(V) != len(self.ground):
            raise ScenarioError("duplicate user id")
        for name in ("active", "untrusted", "silent"):
            extra = getattr(self, name) - V
            if extra:
                raise ScenarioError(f"unknown user id {sorted(extra)[0]!r} in {name} set")
        A, D, S = self.active, self.untrusted, self.silent
        if len(A) < 2:
            raise ScenarioError("at least two active users")
        if A & D:
            raise ScenarioError("untrusted active user")
        if S & D:
            raise ScenarioError("silent untrusted user")
        if S - A:
            raise ScenarioError("silent trusted helper")
        if S == A:
            raise ScenarioError("at least one vocal active user")

    @property
    def V(self):
        return frozenset(self.ground)

    @property
    def helpers(self):
        return self.V - self.active

    @property
    def trusted_helpers(self):
        return self.helpers - self.untrusted

    @property
    def vocal(self):
        return self.V - self.silent

    @property
    def trusted_vocal(self):
        """V∖D∖S: the users whose rates the omniscience LP optimizes."""
        return self.V - self.untrusted - self.silent

    def describe(self):
        f = lambda s: "{" + ",".join(map(str, sorted(s))) + "}"
        return f"A={f(self.active)} S={f(self.silent)} D={f(self.untrusted)} V={f(self.V)}"


@dataclass(frozen=True)
class Scenario:
    users: UserSet
    source: EntropyOracle
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if tuple(self.source.ground) != tuple(self.users.ground):
            raise ScenarioError("source users differ from the declared users")

    @property
    def A(self):
        return self.users.active

    @property
    def S(self):
        return self.users.silent

    @property
    def D(self):
        return self.users.untrusted

    @property
    def V(self):
        return self.users.V

    def with_users(self, users=None, source=None, name=None):
        return Scenario(users or self.users, source or self.source, name or self.name, self.meta)


# ---------------------------------------------------------------- operations


def entropy(oracle, B):
    """H(Z_B); a float for tabular sources, an exact Fraction otherwise."""
    v = oracle.h(B)
    return float(oracle.h_float(oracle.mask(B))) if isinstance(oracle, TabularSource) else v


def cond_entropy(oracle, B, C=()):
    B, C = set(B), set(C)
    return oracle.h(B | C) - oracle.h(C)


def mutual_info(oracle, B, C, W=()):
    B, C, W = set(B), set(C), set(W)
    if B & C or B & W or C & W:
        raise ValueError("mutual_info arguments must be pairwise disjoint")
    return oracle.h(B | W) + oracle.h(C | W) - oracle.h(B | C | W) - oracle.h(W)


def condition_on_wiretap(source, D):
    """Oracle for H(Z_B | Z_D) on V∖D.

    For a hypergraph the edge-deleted hypergraph is attached as `.reduced`
    and checked against the conditional entropies on every subset.
    """
    D = frozenset(D)
    source.mask(D)
    rest = [u for u in source.ground if u not in D]
    if not D:
        return source
    view = restrict_oracle(source, rest, D)
    if isinstance(source, HypergraphSource):
        dropped = [e.label for e in source.edges if e.on & D]
        reduced = source.without_edges(dropped).restricted(rest)
        check_size(len(rest))
        for mask in range(1 << len(rest)):
            if reduced.hm(mask) != view.hm(mask):
                raise AssertionError(f"edge-deletion mismatch on {sorted(view.ids(mask))}")
        view.reduced = reduced
        view.dropped_edges = tuple(dropped)
    return view


@dataclass
class SubmodularReport:
    ok: bool
    witness: tuple | None = None   # (B, C, h(B)+h(C), h(B∪C)+h(B∩C))
    rule: str = ""

    def __bool__(self):
        return self.ok


def validate_submodular(oracle):
    """Exhaustive polymatroid check via the elemental inequalities.

    Elemental inequalities imply the full submodular/monotone family, and
    each violation is itself a violating pair (B∪i, B∪j).
    """
    n = len(oracle.ground)
    check_size(n)
    tol = oracle.tol
    if abs(oracle.hm(0)) > tol:
        return SubmodularReport(False, (frozenset(), frozenset(), oracle.hm(0), Fraction(0)), "h(∅)=0")
    full = oracle.full
    for i in range(n):
        rest = full & ~(1 << i)
        if oracle.hm(full) < oracle.hm(rest) - tol:
            return SubmodularReport(False, (oracle.ids(rest), oracle.ids(full), oracle.hm(rest), oracle.hm(full)),
                                    "monotone")
    for i, j in combinations(range(n), 2):
        bi, bj = 1 << i, 1 << j
        others = full & ~(bi | bj)
        sub = others
        while True:
            lhs = oracle.hm(sub | bi) + oracle.hm(sub | bj)
            rhs = oracle.hm(sub | bi | bj) + oracle.hm(sub)
            if lhs < rhs - tol:
                return SubmodularReport(False, (oracle.ids(sub | bi), oracle.ids(sub | bj), lhs, rhs),
                                        "submodular")
            if sub == 0:
                break
            sub = (sub - 1) & others
    return SubmodularReport(True)


class DictOracle(EntropyOracle):
    """Oracle given by an explicit table {frozenset: value}; mainly for tests."""

    def __init__(self, ground, table, exact=True):
        super().__init__(ground)
        self._table = {self.mask(k): to_fraction(v) for k, v in table.items()}
        self.exact = exact

    def _eval(self, mask):
        return self._table.get(mask, Fraction(0))


# ---------------------------------------------------------------- tabular expansion and GK


MAX_EXPANSION = 2**20


def tabularize(source):
    """Explicit pmf for a hypergraph (integer weights) or linear source."""
    if isinstance(source, TabularSource):
        return source
    if isinstance(source, HypergraphSource):
        sizes = []
        for e in source.edges:
            if e.weight.denominator != 1:
                raise UnsupportedBackend(f"edge {e.label!r} has non-integer weight; no finite uniform expansion")
            sizes.append(2 ** int(e.weight))
        total = math.prod(sizes) if sizes else 1
        if total > MAX_EXPANSION:
            raise UnsupportedBackend(f"tabular expansion needs {total} outcomes (limit {MAX_EXPANSION})")
        inc = {u: [k for k, e in enumerate(source.edges) if u in e.on] for u in source.ground}
        alph = {u: [list(t) for t in product(*[range(sizes[k]) for k in inc[u]])] for u in source.ground}
        p = Fraction(1, total)
        pmf = [([list(x[k] for k in inc[u]) for u in source.ground], p)
               for x in product(*[range(s) for s in sizes])]
        return TabularSource(alph, pmf)
    if isinstance(source, FiniteLinearSource):
        q, m = source.q, source.m
        total = q ** m
        if total > MAX_EXPANSION:
            raise UnsupportedBackend(f"tabular expansion needs {total} outcomes (limit {MAX_EXPANSION})")
        p = Fraction(1, total)
        pmf = []
        outs = {u: set() for u in source.ground}
        for s in product(range(q), repeat=m):
            z = []
            for u in source.ground:
                v = tuple(sum(a * b for a, b in zip(row, s)) % q for row in source.matrices[u])
                outs[u].add(v)
                z.append(v)
            pmf.append((z, p))
        alph = {u: sorted(outs[u]) for u in source.ground}
        return TabularSource(alph, pmf)
    raise UnsupportedBackend(f"cannot tabularize {type(source).__name__}")


@dataclass
class GKResult:
    labels: dict           # outcome tuple -> component id
    entropy: float
    source: TabularSource  # the input extended by a column holding U
    u_id: object

    def cond(self, C) -> float:
        """H(U | Z_C)."""
        C = set(C)
        src = self.source
        return src.h_float(src.mask(C | {self.u_id})) - src.h_float(src.mask(C))


def gk_common_part(source, A):
    """Maximal common function of Z_A (Gács–Körner common part).

    Support outcomes are joined whenever they agree on some Z_i, i ∈ A; the
    connected component is the common function.
    """
    if not isinstance(source, TabularSource):
        raise UnsupportedBackend("gk_common_part needs a tabular source; call tabularize() first")
    A = sorted(set(A))
    if len(A) < 2:
        raise ValueError("gk_common_part needs at least two users")
    source.mask(A)
    outcomes = [z for z, _ in source.pmf]
    parent = list(range(len(outcomes)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u in A:
        k = source._index[u]
        first = {}
        for n, z in enumerate(outcomes):
            r = first.setdefault(z[k], n)
            a, b = find(r), find(n)
            if a != b:
                parent[max(a, b)] = min(a, b)
    roots = sorted({find(n) for n in range(len(outcomes))})
    comp = {r: c for c, r in enumerate(roots)}
    labels = {z: comp[find(n)] for n, z in enumerate(outcomes)}
    u_id = max(source.ground) + 1 if all(isinstance(u, int) for u in source.ground) else "U"
    ext = source.with_column(u_id, list(range(len(roots))), lambda z: labels[z])
    return GKResult(labels, ext.h_float(ext.mask([u_id])), ext, u_id)
