import itertools
from fractions import Fraction

import pytest

from omnikit.cli import fixture_dir
from omnikit.entropy import HypergraphSource, Scenario, TabularSource, UserSet
from omnikit.scenario_io import parse_scenario

F = Fraction


def load(stem):
    return parse_scenario(fixture_dir() / f"{stem}.json")


def scenario(src, A, D=(), S=(), name="t"):
    return Scenario(UserSet(tuple(src.ground), A, D, S), src, name)


def hyp(edges, V=None):
    """hyp([("a", [1, 2]), ...]) with unit weights unless a third item is given."""
    V = V or sorted({u for _, on, *_ in edges for u in on})
    return HypergraphSource(V, edges)


def uniform_tabular(columns, nbits):
    """Tabular source over nbits uniform bits; columns maps user -> fn(bits)."""
    users = sorted(columns)
    rows = []
    for x in itertools.product((0, 1), repeat=nbits):
        rows.append(([columns[u](x) for u in users], F(1, 2 ** nbits)))
    alph = {u: sorted({r[0][k] for r in rows}, key=repr) for k, u in enumerate(users)}
    return TabularSource(alph, rows)


@pytest.fixture
def fx():
    return load


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}  {detail}")
