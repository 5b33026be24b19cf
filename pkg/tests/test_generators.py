import random

import pytest

from oracles import brute_mpcp, tiles_agree
from sessionck.automata import build_laut, language_equiv, normalize
from sessionck.checks import erasure_candidate
from sessionck.csm import csm_from_locals
from sessionck.generators import (
    NOTES,
    TileInstance,
    approx_intersection_witness,
    approx_refute,
    bundled_csm,
    corpus,
    ex56,
    g_tc,
    gen_mpcp,
    global_sources,
    local_sources,
    mpcp_source,
    random_instances,
    solution_indices,
)
from sessionck.syntax import parse_global, parse_local, roles, well_formed


def test_corpus_loads():
    cp = corpus()
    assert {"G_2BP", "EX37", "EX313", "NONGC", "EX56_2", "G_TC_2"} <= set(cp.globals)
    assert ("G_2BP", "s") in cp.locals
    assert cp.G_2BP is cp.globals["G_2BP"]
    with pytest.raises(AttributeError):
        cp.MISSING


def test_sources_round_trip():
    for text in global_sources().values():
        assert well_formed(parse_global(text)).ok
    for text in local_sources().values():
        parse_local(text)


def test_families():
    assert roles(parse_global(ex56(2))) == ("p", "q0", "q1", "q2", "r0", "r1", "r2", "s0", "s1", "s2")
    g = parse_global(g_tc(3))
    assert roles(g) == ("p", "q1", "q2", "q3")
    assert well_formed(g).ok


def test_note_for_inexact_entry():
    assert "G_TCLog" in NOTES


def test_tile_validation():
    with pytest.raises(ValueError):
        TileInstance(("a",), ("a", "b"))
    with pytest.raises(ValueError):
        TileInstance(("",), ("a",))
    with pytest.raises(ValueError):
        TileInstance(("d",), ("a",))
    with pytest.raises(ValueError):
        TileInstance(("A",), ("a",))
    with pytest.raises(ValueError):
        TileInstance((), ())


def test_tile_json():
    t = TileInstance.from_json('{"u": ["ab", "b"], "v": ["a", "bb"]}')
    assert t == TileInstance(("ab", "b"), ("a", "bb"))
    assert TileInstance.from_json(t.to_json()) == t


def test_encoding_is_well_formed():
    t = TileInstance(("ab", "b"), ("a", "bb"))
    g = gen_mpcp(t)
    rep = well_formed(g)
    assert rep.ok
    assert roles(g) == ("p", "q", "r")
    assert "r->p:ack_u" in mpcp_source(t) and "ack" not in mpcp_source(t, with_ack=False)


def test_brute_force_oracle():
    assert brute_mpcp(("ab", "b"), ("a", "bb"), 12) == (1, 2)
    assert brute_mpcp(("ab",), ("ba",), 12) is None
    assert brute_mpcp(("a",), ("a",), 1) == (1,)
    assert tiles_agree(("ab", "b"), ("a", "bb"), (1, 2))


def test_witness_for_solvable_instance():
    t = TileInstance(("ab", "b"), ("a", "bb"))
    w = approx_intersection_witness(t, 12)
    assert w is not None
    assert solution_indices(t, w) == (1, 2)


def test_no_witness_for_unsolvable_instance():
    assert approx_intersection_witness(TileInstance(("ab",), ("ba",)), 12) is None


def test_witness_respects_bound():
    t = TileInstance(("a", "ba"), ("ab", "a"))
    assert brute_mpcp(t.u, t.v, 3) == (1, 2)
    assert brute_mpcp(t.u, t.v, 2) is None
    assert approx_intersection_witness(t, 2) is None
    assert approx_intersection_witness(t, 3) is not None


@pytest.mark.parametrize("seed", range(6))
def test_random_instances_against_oracle(seed):
    for t in random_instances(random.Random(seed), 5):
        assert 1 <= t.n <= 3 and all(1 <= len(x) <= 3 for x in t.u + t.v)
        expected = brute_mpcp(t.u, t.v, 9)
        got = approx_intersection_witness(t, 9)
        assert (got is None) == (expected is None)
        if got is not None:
            assert tiles_agree(t.u, t.v, solution_indices(t, got))


def test_bundled_machine_uses_printed_local():
    cp = corpus()
    c = bundled_csm("EX66")
    assert set(c.roles) == {"p", "q", "r"}
    printed = normalize(build_laut(cp.locals[("EX66", "r")], "r"))
    assert language_equiv(c.machines["r"], printed)[0]
    assert language_equiv(c.machines["p"], erasure_candidate(cp.EX66).machines["p"])[0]


def test_approx_refute_finds_missing_behaviour():
    g = parse_global("(p->q:a.0 + p->q:b.0)")
    c = csm_from_locals({"p": parse_local("q!a.0"), "q": parse_local("(p?a.0 (&) p?b.0)")})
    ev = approx_refute(g, 6, c)
    assert ev is not None and ev.kind == "missing"
    assert approx_refute(g, 6) is None
