import itertools

import pytest

from sessionck.automata import (
    backward_edges,
    bounded_traces,
    build_gaut,
    build_laut,
    check_shape,
    determinize,
    from_edges,
    language_equiv,
    minimize,
    normalize,
)
from sessionck.events import SyncEvent, parse_word
from sessionck.generators import corpus
from sessionck.syntax import parse_global, parse_local

A, B = SyncEvent("p", "q", "a"), SyncEvent("p", "q", "b")


def brute_accepts(f, w) -> bool:
    """Nondeterministic run with ε-moves, without any normalization."""
    cur = f.closure((f.initial,))
    for x in w:
        cur = f.closure({t for s in cur for y, t in f.out[s] if y == x})
    return bool(cur & f.finals)


def test_gaut_states_follow_subterms():
    g = parse_global("mu t.(p->q:a.t + p->q:b.0)")
    f = build_gaut(g)
    assert len(f.states) == 4  # mu, choice, t, 0
    assert brute_accepts(f, (A, A, B))
    assert not brute_accepts(f, (A,))


def test_gaut_rejects_local_type():
    with pytest.raises(TypeError):
        build_gaut(parse_local("q?m.0"))


def test_determinize_and_minimize_preserve_language():
    f = from_edges(
        [(0, A, 1), (0, A, 2), (1, B, 3), (2, B, 3), (0, None, 4), (4, A, 3)],
        0,
        [3],
    )
    d = normalize(f)
    assert d.is_deterministic
    for n in range(4):
        for w in itertools.product((A, B), repeat=n):
            assert brute_accepts(f, w) == brute_accepts(d, w)
    assert len(d.states) == 3


def test_minimize_merges_equivalent_states():
    f = from_edges([(0, A, 1), (0, B, 2), (1, A, 3), (2, A, 3)], 0, [3])
    assert len(minimize(determinize(f)).states) == 3


def test_minimize_requires_determinism():
    with pytest.raises(ValueError):
        minimize(from_edges([(0, None, 1)], 0, [1]))


def test_language_equiv_witness():
    f1 = build_gaut(parse_global("(p->q:a.0 + p->q:b.0)"))
    f2 = build_gaut(parse_global("p->q:a.0"))
    same, w = language_equiv(f1, f2)
    assert not same and w == (B,)
    assert language_equiv(f1, f1)[0]


def test_language_equiv_of_unrolled_loop():
    f1 = build_gaut(parse_global("mu t.p->q:a.t"))
    f2 = build_gaut(parse_global("mu t.p->q:a.p->q:a.t"))
    assert language_equiv(f1, f2)[0]


def test_language_equiv_role_mismatch():
    with pytest.raises(ValueError):
        language_equiv(build_laut(parse_local("q?a.0"), "p"), build_laut(parse_local("q?a.0"), "r"))


def test_laut_alphabet():
    f = build_laut(parse_local("mu t.(q?l.0 (&) q?r.t)"), "r")
    assert set(f.letters) == set(parse_word("r<q?l.r<q?r"))


def test_bounded_traces():
    f = build_gaut(parse_global("mu t.(p->q:a.t + p->q:b.0)"))
    t = bounded_traces(f, 3)
    assert (A, A, B) in t.maximal and (A, A, A) in t.prefixes
    assert all(len(w) <= 3 for w in t.prefixes)
    assert len(t.maximal) == 3


def test_backward_edges_only_at_variables():
    f = build_gaut(parse_global("mu t.(p->q:a.t + p->q:b.0)"))
    back = backward_edges(f)
    assert len(back) == 1 and next(iter(back))[1] is None


def test_shape_flags_on_corpus():
    cp = corpus()
    for g in cp.globals.values():
        assert check_shape(build_gaut(g)).all
    for (_, r), l in cp.locals.items():
        assert check_shape(build_laut(l, r)).all


def test_shape_detects_loop_without_variable():
    f = from_edges([(0, A, 1), (1, B, 0), (1, None, 2)], 0, [2])
    assert not check_shape(f).all


def test_dot_output():
    dot = build_gaut(parse_global("p->q:a.0")).to_dot("G")
    assert dot.startswith("digraph G")
    assert 'q0 -> q1 [label="p->q:a"];' in dot
    assert "doublecircle" in dot
