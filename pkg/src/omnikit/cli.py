"""Command-line entry point: omnikit <command> <scenario.json> [options]."""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import lp
from .capacity import alpha_and_sstar, capacity_fractional_lp, rco, secrecy_capacity
from .court import (TransformRejected, PlanError, analyze, check_oo_hypergraph, check_oo_necessary,
                    check_oo_sufficient, lower_bound_rs, processing_upper_bound, transform_scenario,
                    _certify_capacity, _js)
from .entropy import ScenarioError, UnsupportedBackend, condition_on_wiretap
from .numerics import GroundSetTooLarge, fmt, to_fraction
from .partitions import mmi
from .scenario_io import ScenarioFileError, dumps, parse_scenario, plan_from_dict

COMMANDS = ("capacity", "mmi", "rco", "bounds", "check", "transform", "analyze", "fixtures")


def _emit(args, data, lines):
    if args.json:
        print(json.dumps(data, indent=2, ensure_ascii=False))
    else:
        for ln in lines:
            print(ln)


def _plans(args, sc):
    plans = list(sc.meta.get("plans", []))
    if args.plan:
        raw = json.loads(Path(args.plan).read_text(encoding="utf-8"))
        for k, p in enumerate(raw if isinstance(raw, list) else [raw]):
            plans.append(plan_from_dict(p, sc, f"{args.plan}[{k}]"))
    return plans


def _transforms(args, sc):
    ts = list(sc.meta.get("transforms", []))
    if args.transform:
        raw = json.loads(Path(args.transform).read_text(encoding="utf-8"))
        ts += raw if isinstance(raw, list) else [raw]
    return ts


def cmd_capacity(args, sc):
    cap = secrecy_capacity(sc)
    x = sc.source.exact
    data = {"scenario": sc.name, "C_S": fmt(cap.C_S, x), "rho": fmt(cap.rho, x), "rho_bar": fmt(cap.rho_bar, x),
            "R_CO": fmt(cap.R_CO, x), "r_star": _js(cap.r_star, x), "r_bar_star": _js(cap.r_bar_star, x),
            "derivation": cap.derivation}
    lines = [f"scenario  {sc.name}  ({sc.users.describe()})",
             f"C_S       {data['C_S']}", f"rho       {data['rho']}", f"rho_bar   {data['rho_bar']}",
             f"R_CO      {data['R_CO']}",
             "r*        " + ", ".join(f"{k}: {v}" for k, v in data["r_star"].items()),
             "via       " + "; ".join(cap.derivation)]
    if sc.S and sc.A == sc.V - sc.D:
        s = alpha_and_sstar(sc)
        data["silent"] = {"alpha": fmt(s.alpha, x), "S_star": _js(s.s_star), "branch": s.branch}
        lines.append(f"alpha     {data['silent']['alpha']}  S*={data['silent']['S_star']}  branch {s.branch}")
    if not sc.S and len(sc.V - sc.D) <= 8:
        f = capacity_fractional_lp(sc)
        data["fractional"] = {"value": fmt(f.value, x), "lambda": _js(f.lam_star, x),
                              "support_union": _js(f.support_union), "H_family": _js(f.h_family)}
        lines.append(f"fractional optimum {data['fractional']['value']}, support union {data['fractional']['support_union']}")
    _emit(args, data, lines)
    return 0


def cmd_mmi(args, sc):
    o = condition_on_wiretap(sc.source, sc.D)
    U = sorted(sc.V - sc.D)
    m = mmi(o, U)
    x = sc.source.exact
    data = {"scenario": sc.name, "U": U, "given": sorted(sc.D), "value": fmt(m.value, x),
            "fundamental": m.fundamental.to_json(), "optimal": [p.to_json() for p in m.optimal]}
    lines = [f"I(Z_U|Z_D) = {data['value']}  for U={U}, D={sorted(sc.D)}",
             f"P*        = {data['fundamental']}",
             f"optimal   = {data['optimal']}"]
    if m.sensitive:
        data["flags"] = ["TOLERANCE_SENSITIVE"]
        lines.append("flag      TOLERANCE_SENSITIVE")
    _emit(args, data, lines)
    return 0


def cmd_rco(args, sc):
    v = rco(sc)
    data = {"scenario": sc.name, "R_CO": fmt(v, sc.source.exact)}
    _emit(args, data, [f"R_CO = {data['R_CO']}"])
    return 0


def cmd_bounds(args, sc):
    x = sc.source.exact
    cap = secrecy_capacity(sc, cross_check=False)
    lows = lower_bound_rs(sc, cap)
    data = {"scenario": sc.name, "R_CO": fmt(cap.R_CO, x), "lower": [b.to_json(x) for b in lows], "upper": [],
            "rejected": []}
    lines = [f"R_CO = {data['R_CO']}"]
    for b in lows:
        lines.append(f"lower {fmt(b.value, x):>8}  {b.tag}  {json.dumps(b.to_json(x)['witness'], ensure_ascii=False)}")
    for plan in _plans(args, sc):
        out = processing_upper_bound(sc, plan, cap)
        if out.ok:
            data["upper"].append(out.bound.to_json(x))
            lines.append(f"upper {fmt(out.bound.value, x):>8}  ub-processing  plan {plan.name}")
        else:
            data["rejected"].append({"plan": plan.name, "reason": out.rejection,
                                     "R_CO'": None if out.R_CO_prime is None else fmt(out.R_CO_prime, x)})
            lines.append(f"plan {plan.name} rejected: {out.rejection}")
    _emit(args, data, lines)
    return 0


def cmd_check(args, sc):
    x = sc.source.exact
    cap = secrecy_capacity(sc, cross_check=False)
    suff = check_oo_sufficient(sc, cap)
    nec = check_oo_necessary(sc, cap)
    hyp = check_oo_hypergraph(sc, cap)
    data = {"scenario": sc.name, "sufficient": [c.to_json(x) for c in suff],
            "necessary": [c.to_json(x) for c in nec],
            "hypergraph": {"status": hyp.status, "tag": hyp.tag, "witness": _js(hyp.witness, x)}}
    lines = []
    for title, group in (("sufficient", suff), ("necessary", nec)):
        for c in group:
            lines.append(f"{title:10s} {c.tag:22s} {c.status}")
    lines.append(f"{'hypergraph':10s} {hyp.tag:22s} {hyp.status}  {json.dumps(data['hypergraph']['witness'], ensure_ascii=False)}")
    _emit(args, data, lines)
    return 0


def cmd_transform(args, sc):
    specs = []
    if args.transform:
        raw = json.loads(Path(args.transform).read_text(encoding="utf-8"))
        specs = raw if isinstance(raw, list) else [raw]
    if not specs:
        raise ScenarioFileError("transform needs --transform t.json")
    cur = sc
    steps = []
    for spec in specs:
        new, claim = transform_scenario(cur, spec)
        c0, c1 = _certify_capacity(cur, new, claim)
        steps.append({"transform": spec, "claim": claim.to_json(), "C_S": fmt(c0, sc.source.exact),
                      "C_S'": fmt(c1, sc.source.exact)})
        cur = new
    new_doc = json.loads(dumps(cur))
    data = {"scenario": sc.name, "steps": steps, "result": new_doc}
    lines = []
    for s in steps:
        after = s["C_S'"]
        lines.append(f"{s['transform']['kind']}: C_S {s['C_S']} -> {after}; claim {s['claim']['text']}")
    lines.append(dumps(cur).rstrip())
    _emit(args, data, lines)
    return 0


def cmd_analyze(args, sc):
    rep = analyze(sc, _plans(args, sc), _transforms(args, sc))
    data = rep.to_json()
    x = rep.exact
    lines = [f"scenario  {sc.name}  ({sc.users.describe()})",
             f"C_S       {data['C_S']}", f"R_CO      {data['R_CO']}  (rho {data['rho']}, rho_bar {data['rho_bar']})",
             f"bracket   [{data['bracket']['lower']}, {data['bracket']['upper']}]"
             + ("  (upper strict)" if rep.upper_strict else ""),
             f"verdict   {rep.verdict}"]
    if rep.flags:
        lines.append("flags     " + ", ".join(rep.flags))
    for e in data["evidence"]:
        what = e.get("status") or (("< " if e.get("strict") else "") + e["value"])
        lines.append(f"  {e['kind']:9s} {e['tag']:22s} {what}")
    for n in data["notes"]:
        lines.append(f"  note: {n}")
    _emit(args, data, lines)
    return 0


# ---------------------------------------------------------------- fixture corpus


def fixture_dir():
    return Path(str(resources.files("omnikit") / "fixtures"))


def _close(a, b, exact):
    fa, fb = to_fraction(a), to_fraction(b)
    return fa == fb if exact else abs(fa - fb) <= Fraction(1, 10**9)


def check_fixture(path, expect):
    """Return a list of mismatch strings (empty when everything matches)."""
    sc = parse_scenario(path)
    x = sc.source.exact
    got = {}
    rep = analyze(sc, sc.meta.get("plans", []), sc.meta.get("transforms", []))
    got.update(C_S=rep.C_S, R_CO=rep.R_CO, rho=rep.rho, rho_bar=rep.rho_bar, verdict=rep.verdict,
               lower=rep.lower, upper=rep.upper)
    if "mmi" in expect or "partition" in expect:
        m = mmi(condition_on_wiretap(sc.source, sc.D), sorted(sc.V - sc.D))
        got.update(mmi=m.value, partition=m.fundamental.to_json())
    if {"alpha", "S_star", "branch"} & set(expect):
        s = alpha_and_sstar(sc)
        got.update(alpha=s.alpha, S_star=sorted(s.s_star), branch=s.branch)
    if "fractional" in expect:
        got["fractional"] = capacity_fractional_lp(sc, support=False).value
    if "plan" in expect:
        out = processing_upper_bound(sc, sc.meta["plans"][0])
        got["plan"] = {"accepted": out.ok, "R_CO'": out.R_CO_prime}
    bad = []
    for k, want in expect.items():
        have = got.get(k)
        if k == "plan":
            ok = have["accepted"] == want["accepted"] and _close(have["R_CO'"], want["R_CO'"], x)
        elif isinstance(want, str) and k not in ("verdict", "branch"):
            ok = have is not None and _close(have, want, x)
        else:
            ok = have == want
        if not ok:
            bad.append(f"{k}: expected {want}, got {_js(have, x)}")
    return bad


PROVENANCE = ("worked example", "derived", "trivial")


def _run_fixture(job):
    path, entry = job
    prov = entry.get("provenance", {})
    bad = [f"{k}: no provenance tag" for k in entry["expect"] if prov.get(k) not in PROVENANCE]
    try:
        bad += check_fixture(path, entry["expect"])
    except Exception as exc:  # report and keep going
        bad.append(f"error: {type(exc).__name__}: {exc}")
    return bad


def run_corpus(root=None, jobs=None):
    """{fixture name: [mismatches]} for the whole corpus, in name order."""
    root = Path(root) if root else fixture_dir()
    exp = json.loads((root / "expectations.json").read_text(encoding="utf-8"))
    names = sorted(exp)
    work = [(str(root / exp[n]["file"]), exp[n]) for n in names]
    try:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_fixture, work))
    except (OSError, NotImplementedError, BrokenProcessPool):
        outs = [_run_fixture(w) for w in work]
    return dict(zip(names, outs))


def cmd_fixtures(args):
    results = run_corpus(args.scenario)
    failed = sum(bool(v) for v in results.values())
    data = {"fixtures": len(results), "failed": failed,
            "results": {k: ("ok" if not v else v) for k, v in results.items()}}
    lines = [f"{k:14s} {'ok' if not v else 'MISMATCH: ' + '; '.join(v)}" for k, v in results.items()]
    lines.append(f"{len(results) - failed}/{len(results)} fixtures match")
    _emit(args, data, lines)
    return 1 if failed else 0


HANDLERS = {"capacity": cmd_capacity, "mmi": cmd_mmi, "rco": cmd_rco, "bounds": cmd_bounds,
            "check": cmd_check, "transform": cmd_transform, "analyze": cmd_analyze}


def build_parser():
    p = argparse.ArgumentParser(prog="omnikit", description="Secret key agreement and omniscience analysis kit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("scenario", nargs="?", help="scenario JSON file (for fixtures: corpus directory)")
    p.add_argument("--json", action="store_true", help="emit the stable JSON report")
    p.add_argument("--trace-lp", action="store_true", help="dump every LP and its pivots to stderr")
    p.add_argument("--plan", help="processing plan JSON (object or list)")
    p.add_argument("--transform", help="scenario transform JSON (object or list)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    tok = lp.TRACE.set(sys.stderr) if args.trace_lp else None
    try:
        if args.command == "fixtures":
            return cmd_fixtures(args)
        if not args.scenario:
            print(f"omnikit {args.command}: a scenario file is required", file=sys.stderr)
            return 2
        sc = parse_scenario(args.scenario)
        return HANDLERS[args.command](args, sc)
    except (ScenarioFileError, ScenarioError, TransformRejected, PlanError, UnsupportedBackend,
            GroundSetTooLarge, ValueError, OSError) as exc:
        print(f"omnikit {args.command}: {exc}", file=sys.stderr)
        return 1
    finally:
        if tok is not None:
            lp.TRACE.reset(tok)


if __name__ == "__main__":
    sys.exit(main())
