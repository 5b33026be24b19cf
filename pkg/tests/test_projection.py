import pytest

from sessionck.automata import build_laut, language_equiv, normalize
from sessionck.generators import corpus
from sessionck.projection import MergeError, MergeKind, canonical, merge, merge_all, project, project_all, subterm_at
from sessionck.syntax import Choice, Done, parse_global, parse_local, render

CP = corpus()
PLAIN, SEMIFULL, FULL = MergeKind.PLAIN, MergeKind.SEMIFULL, MergeKind.FULL


def L(text):
    return parse_local(text)


def test_merge_identical():
    assert merge(L("q?a.0"), L("q?a.0"), PLAIN) == L("q?a.0")


def test_plain_refuses_different_receives():
    with pytest.raises(MergeError) as info:
        merge(L("q?a.0"), L("q?b.0"), PLAIN)
    assert info.value.case == 2


def test_semifull_unions_receives():
    m = merge(L("q?a.0"), L("q?b.0"), SEMIFULL)
    assert canonical(m) == canonical(L("(q?a.0 (&) q?b.0)"))


def test_semifull_merges_shared_branches():
    m = merge(L("(q?a.p!x.0 (&) q?b.0)"), L("(q?a.p!x.0 (&) q?c.0)"), SEMIFULL)
    assert canonical(m) == canonical(L("(q?a.p!x.0 (&) q?b.0 (&) q?c.0)"))


def test_branch_order():
    m = merge(L("(q?b.0 (&) q?a.0)"), L("(q?a.0 (&) q?c.0)"), SEMIFULL)
    assert render(m) == "(q?b.0 (&) q?a.0 (&) q?c.0)"


def test_receives_from_different_peers_do_not_merge():
    with pytest.raises(MergeError) as info:
        merge(L("q?a.0"), L("p?b.0"), FULL)
    assert info.value.case is None


def test_sends_never_merge_when_different():
    with pytest.raises(MergeError):
        merge(L("q!a.0"), L("q!b.0"), FULL)


def test_full_merges_recursions_up_to_renaming():
    a = L("mu s.(q?l.s (&) q?m.0)")
    b = L("mu u.(q?r.u (&) q?m.0)")
    with pytest.raises(MergeError) as info:
        merge(a, b, SEMIFULL)
    assert info.value.case == 3
    m = merge(a, b, FULL)
    assert language_equiv(normalize(build_laut(m, "r")), normalize(build_laut(L("mu t.(q?l.t (&) q?m.0 (&) q?r.t)"), "r")))[0]


def test_merge_all_of_one():
    assert merge_all([L("0")]) == Done()


def test_sender_and_receiver_projections():
    g = parse_global("(p->q:a.0 + p->q:b.0)")
    assert render(project(g, "p").local) == "(q!a.0 (+) q!b.0)"
    assert render(project(g, "q").local) == "(p?a.0 (&) p?b.0)"


def test_uninvolved_role_gets_done():
    g = parse_global("p->q:a.0")
    res = project(g, "r")
    assert res.ok and res.local == Done()


def test_unused_binder_dropped_and_empty_loop_is_done():
    g = parse_global("mu t.p->q:a.mu u.q->p:b.0")
    assert render(project(g, "p").local) == "q!a.q?b.0"
    assert project(parse_global("mu t.p->q:a.t"), "r").local == Done()
    # exiting and looping cannot be merged for an observer
    assert not project(parse_global("mu t.(p->q:a.t + p->q:b.0)"), "r").ok


EXPECTED = {
    # (entry, kind): printed result, or the rejection text
    ("EX37", PLAIN): "mu t.(q?l.0 (&) q?r.t)",
    ("EX37", SEMIFULL): None,
    ("EX38", PLAIN): "Case(2)-needed",
    ("EX39", PLAIN): "Case(2)-needed",
    ("EX39", SEMIFULL): "mu t.(q?l.0 (&) q?m.0 (&) q?r.t)",
    ("EX310", PLAIN): "Case(3)-needed",
    ("EX310", SEMIFULL): "Case(3)-needed",
    ("EX310", FULL): "mu t1.(q?l.t1 (&) q?m.0 (&) q?r.t1)",
}


@pytest.mark.parametrize("key", sorted(EXPECTED, key=lambda k: (k[0], k[1].value)))
def test_projection_table(key):
    name, kind = key
    res = project(CP.globals[name], "r", kind)
    want = EXPECTED[key]
    if want is None:
        assert res.ok
    elif "needed" in want:
        assert not res.ok and want in res.rejection.describe()
    else:
        assert res.ok and render(canonical(res.local)) == render(canonical(L(want)))


def test_no_merge_case():
    res = project(CP.EX311, "r", FULL)
    assert not res.ok
    assert res.rejection.case is None
    assert "no-merge-case" in res.rejection.describe()


def test_rejection_path_points_at_choice():
    res = project(CP.EX311, "r", FULL)
    assert isinstance(subterm_at(CP.EX311, res.rejection.path), Choice)


def test_loop_exit_not_projectable_for_sender():
    res = project(CP.EX37, "p", FULL)
    assert not res.ok


def test_project_all_roles():
    out = project_all(CP.EX38, SEMIFULL)
    assert set(out) == {"p", "q", "r"} and all(r.ok for r in out.values())


def test_sort_branches_option():
    g = parse_global("(p->q:b.q->r:b.0 + p->q:a.q->r:a.0)")
    unsorted = project(g, "r", SEMIFULL)
    ordered = project(g, "r", SEMIFULL, sort_branches=True)
    assert render(unsorted.local) == "(q?b.0 (&) q?a.0)"
    assert render(ordered.local) == "(q?a.0 (&) q?b.0)"
