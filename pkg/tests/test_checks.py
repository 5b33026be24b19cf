import json

import pytest

from oracles import cooperative_by_simple_cycles, cooperative_by_subsets
from sessionck.budget import BudgetExceeded
from sessionck.checks import (
    NotGloballyCooperative,
    NotZeroReachable,
    RefutedNotImplementable,
    VerifiedUpToBound,
    collapse,
    decide,
    gaut_cooperation_shortcut,
    globally_cooperative,
    i_closed,
    independent,
    is_local,
    segments,
    zero_reachable,
)
from sessionck.csm import replay
from sessionck.events import SyncEvent, format_word
from sessionck.generators import corpus, ex56
from sessionck.hmsc import encode
from sessionck.syntax import parse_global, well_formed

CP = corpus()

# entry: (zero_reachable, globally_cooperative, i_closed, is_local); unlisted entries pass all four
NEGATIVE = {
    "EX420": (False, False, False, False),
    "EX56_2": (True, True, False, True),
    "EX58": (True, True, False, False),
    "G_TCLog": (True, True, False, True),
    "NONGC": (True, False, False, False),
}


@pytest.mark.parametrize("name", sorted(CP.globals))
def test_classification_table(name):
    g = CP.globals[name]
    got = (zero_reachable(g).ok, globally_cooperative(g).ok, i_closed(g).ok, is_local(g).ok)
    assert well_formed(g).ok
    assert got == NEGATIVE.get(name, (True, True, True, True))


@pytest.mark.parametrize("name", sorted(CP.globals))
def test_cooperation_against_loop_oracles(name):
    h = encode(CP.globals[name])
    ok = globally_cooperative(h).ok
    by_subsets = cooperative_by_subsets(h)
    if by_subsets is not None:
        assert ok == by_subsets
    if ok:
        assert cooperative_by_simple_cycles(h)


def test_cooperation_budget():
    with pytest.raises(BudgetExceeded):
        globally_cooperative(CP.G_2BPWS, budget=1)


def test_cooperation_shortcut_is_advisory():
    assert not gaut_cooperation_shortcut(CP.NONGC).ok
    assert gaut_cooperation_shortcut(CP.G_2BP).ok


def test_zero_reachable_witness():
    res = zero_reachable(CP.EX420)
    assert res.witness in encode(CP.EX420).vertices


def test_independence():
    assert independent(SyncEvent("p", "q", "a"), SyncEvent("r", "s", "b"))
    assert not independent(SyncEvent("p", "q", "a"), SyncEvent("q", "s", "b"))


def test_i_closed_witness_on_ex58():
    res = i_closed(CP.EX58)
    assert res.witness == (SyncEvent("p", "q", "m"), SyncEvent("r", "s", "m"))


def test_i_closed_witness_on_ex56():
    res = i_closed(parse_global(ex56(2)))
    assert not res.ok
    assert res.witness == (SyncEvent("r1", "s1", "m1"), SyncEvent("p", "q0", "m0"))


def pairs_by_hand(g) -> int:
    a = collapse(g)
    return sum(len(a.into(s)) * len(a.out(s)) for s in a.states)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 8])
def test_pair_check_count(n):
    g = parse_global(ex56(n))
    got = i_closed(g, count_all=True).stats["pair_checks"]
    assert got == pairs_by_hand(g)
    # n loop-back edges meet n + 1 branches at the choice, plus two chain states per branch
    assert got == n * (n + 1) + 2 * (n + 1)


def test_collapsed_automaton_of_loop():
    a = collapse(parse_global("mu t.(p->q:a.t + p->q:b.0)"))
    assert len(a.states) == 2
    assert len(a.edges) == 2


def test_segments_and_locality():
    assert len(segments(CP.G_2BP)) == 6
    res = is_local(CP.NONGC)
    assert format_word(res.witness) == "p->q:m1.r->s:m2"


def test_decide_verdicts():
    assert isinstance(decide(CP.G_2BP, 2, 20), VerifiedUpToBound)
    assert isinstance(decide(CP.EX313, 2, 20), VerifiedUpToBound)
    assert isinstance(decide(CP.G_TC_2, 2, 20), VerifiedUpToBound)
    assert isinstance(decide(CP.EX420), NotZeroReachable)
    assert isinstance(decide(CP.NONGC), NotGloballyCooperative)
    assert isinstance(decide(CP.EX37, 2, 12), RefutedNotImplementable)


def test_refutation_counterexample():
    v = decide(CP.EX66, 1, 10)
    assert isinstance(v, RefutedNotImplementable)
    assert v.counterexample.kind == "prefix"
    assert format_word(v.counterexample.trace) == "p>q!r.p>r!m.r<p?m"
    assert replay(v.csm, v.counterexample.trace) is not None


def test_verdict_json_schema():
    for v in (decide(CP.G_2BP, 2, 12), decide(CP.NONGC), decide(CP.EX66, 1, 10), decide(CP.EX420)):
        data = json.loads(v.dumps())
        assert data["verdict"] == v.name
        assert data["bounds"] == {"channel": v.channel_bound, "trace": v.trace_bound}
        assert set(data["stats"]) == {"states_explored", "subsets_checked", "wallclock_ms"}
        assert ("witness" in data) == (not v.positive)
    w = decide(CP.NONGC).to_json()["witness"]
    assert sorted(w["components"]) == [["p", "q"], ["r", "s"]]
