"""Scenario files: JSON in, validated Scenario out, and back."""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .court import PlanEntry, ProcessingPlan
from .entropy import (FiniteLinearSource, HypergraphSource, Scenario, ScenarioError,
                      TabularSource, UserSet)
from .numerics import to_fraction

FORMAT_VERSION = 1
SOURCE_TYPES = ("hypergraph", "linear", "tabular")


class ScenarioFileError(ValueError):
    pass


def _thaw(v):
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


def _rat(v, where):
    try:
        return to_fraction(v)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ScenarioFileError(f"{where}: {v!r} is not a rational number") from None


def _num_str(x: Fraction):
    return str(x)


class _Ctx:
    def __init__(self, name):
        self.name = name

    def fail(self, where, msg):
        raise ScenarioFileError(f"{self.name}: {where}: {msg}")


def _resolve(ids, key, ctx, where):
    for u in ids:
        if str(u) == str(key):
            return u
    ctx.fail(where, f"unknown user id {key!r}")


def _users(raw, ctx):
    if not isinstance(raw, list) or not raw:
        ctx.fail("users", "expected a nonempty list")
    ids, A, D, S = [], set(), set(), set()
    for k, u in enumerate(raw):
        where = f"users[{k}]"
        if not isinstance(u, dict) or "id" not in u:
            ctx.fail(where, "each user needs an 'id'")
        i = u["id"]
        if not isinstance(i, (int, str)) or isinstance(i, bool):
            ctx.fail(where, "user ids must be integers or strings")
        extra = set(u) - {"id", "active", "untrusted", "silent"}
        if extra:
            ctx.fail(where, f"unknown field {sorted(extra)[0]!r}")
        if i in ids:
            ctx.fail(where, f"duplicate user id {i!r}")
        ids.append(i)
        for flag, bucket in (("active", A), ("untrusted", D), ("silent", S)):
            v = u.get(flag, False)
            if not isinstance(v, bool):
                ctx.fail(where, f"'{flag}' must be true or false")
            if v:
                bucket.add(i)
    if len({type(i) for i in ids}) > 1:
        ctx.fail("users", "user ids must be all integers or all strings")
    try:
        return UserSet(tuple(ids), A, D, S)
    except ScenarioError as exc:
        ctx.fail("users", str(exc))


def _source(raw, ids, ctx):
    if not isinstance(raw, dict):
        ctx.fail("source", "expected an object")
    kind = raw.get("type")
    if kind not in SOURCE_TYPES:
        ctx.fail("source.type", f"expected one of {list(SOURCE_TYPES)}")
    try:
        if kind == "hypergraph":
            edges = []
            for k, e in enumerate(raw.get("edges", [])):
                where = f"source.edges[{k}]"
                if not isinstance(e, dict) or "label" not in e or "on" not in e:
                    ctx.fail(where, "each edge needs 'label' and 'on'")
                on = [_resolve(ids, x, ctx, where) for x in e["on"]]
                edges.append((str(e["label"]), on, _rat(e.get("weight", 1), where)))
            return HypergraphSource(ids, edges)
        if kind == "linear":
            mats = raw.get("matrices", {})
            if not isinstance(mats, dict):
                ctx.fail("source.matrices", "expected an object keyed by user id")
            m = {_resolve(ids, k, ctx, "source.matrices"): v for k, v in mats.items()}
            missing = [u for u in ids if u not in m]
            if missing:
                ctx.fail("source.matrices", f"no matrix for user {missing[0]!r}")
            return FiniteLinearSource(raw.get("q", 2), raw["m"], m)
        al = raw.get("alphabets", {})
        if not isinstance(al, dict):
            ctx.fail("source.alphabets", "expected an object keyed by user id")
        alph = {_resolve(ids, k, ctx, "source.alphabets"): v for k, v in al.items()}
        missing = [u for u in ids if u not in alph]
        if missing:
            ctx.fail("source.alphabets", f"no alphabet for user {missing[0]!r}")
        pmf = []
        for k, row in enumerate(raw.get("pmf", [])):
            where = f"source.pmf[{k}]"
            if not isinstance(row, dict) or "z" not in row or "p" not in row:
                ctx.fail(where, "each pmf row needs 'z' and 'p'")
            pmf.append((row["z"], _rat(row["p"], where)))
        return TabularSource(alph, pmf)
    except ScenarioError as exc:
        ctx.fail("source", str(exc))
    except KeyError as exc:
        ctx.fail("source", f"missing field {exc.args[0]!r}")


def plan_from_dict(raw, sc, name="plan"):
    """Build a ProcessingPlan from its JSON form against a scenario."""
    ctx = _Ctx(name)
    if not isinstance(raw, dict) or not isinstance(raw.get("entries"), list):
        ctx.fail("plan", "expected an object with an 'entries' list")
    ids = list(sc.V)
    entries = []
    for k, e in enumerate(raw["entries"]):
        where = f"entries[{k}]"
        if not isinstance(e, dict) or "p" not in e:
            ctx.fail(where, "each entry needs a probability 'p'")
        retain = {_resolve(ids, u, ctx, where): set(map(str, labs)) for u, labs in e.get("retain", {}).items()}
        tables = {}
        for u, rows in e.get("tables", {}).items():
            uid = _resolve(ids, u, ctx, where)
            tab = {}
            for r in rows:
                if not isinstance(r, list) or len(r) != 2:
                    ctx.fail(where, "table rows are [from, to] pairs")
                tab[_freeze(r[0])] = _freeze(r[1])
            tables[uid] = tab
        entries.append(PlanEntry(str(e.get("q", k)), _rat(e["p"], where), retain, tables))
    return ProcessingPlan(entries, str(raw.get("name", name)))


def scenario_from_dict(raw, name="<scenario>"):
    ctx = _Ctx(name)
    if not isinstance(raw, dict):
        ctx.fail("top level", "expected an object")
    ver = raw.get("format", FORMAT_VERSION)
    if ver != FORMAT_VERSION:
        ctx.fail("format", f"unsupported format version {ver!r}")
    users = _users(raw.get("users"), ctx)
    src = _source(raw.get("source"), list(users.ground), ctx)
    meta = {"raw_plans": raw.get("plans", []), "transforms": raw.get("transforms", []),
            "notes": raw.get("notes", {})}
    try:
        sc = Scenario(users, src, str(raw.get("name", "")), meta)
    except ScenarioError as exc:
        ctx.fail("source", str(exc))
    sc.meta["plans"] = [plan_from_dict(p, sc, f"{name}: plans[{k}]") for k, p in enumerate(meta["raw_plans"])]
    if not isinstance(meta["transforms"], list):
        ctx.fail("transforms", "expected a list")
    return sc


def loads(text, name="<string>"):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"{name}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return scenario_from_dict(raw, name)


def parse_scenario(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioFileError(f"{path}: {exc.strerror}") from None
    return loads(text, str(path))


def source_to_dict(src):
    if isinstance(src, HypergraphSource):
        return {"type": "hypergraph",
                "edges": [{"label": e.label, "on": sorted(e.on), "weight": _num_str(e.weight)}
                          for e in src.edges]}
    if isinstance(src, FiniteLinearSource):
        return {"type": "linear", "q": src.q, "m": src.m,
                "matrices": {str(u): src.matrices[u] for u in src.ground}}
    if isinstance(src, TabularSource):
        return {"type": "tabular",
                "alphabets": {str(u): [_thaw(a) for a in src.alphabets[u]] for u in src.ground},
                "pmf": [{"z": _thaw(z), "p": _num_str(p)} for z, p in src.pmf]}
    raise ScenarioFileError(f"cannot serialize {type(src).__name__}")


def scenario_to_dict(sc):
    d = {"format": FORMAT_VERSION, "name": sc.name,
         "users": [{"id": u, "active": u in sc.A, "untrusted": u in sc.D, "silent": u in sc.S}
                   for u in sc.users.ground],
         "source": source_to_dict(sc.source)}
    for key in ("raw_plans", "transforms", "notes"):
        v = sc.meta.get(key)
        if v:
            d[{"raw_plans": "plans"}.get(key, key)] = v
    return d


def dumps(sc):
    return json.dumps(scenario_to_dict(sc), indent=2, ensure_ascii=False) + "\n"
