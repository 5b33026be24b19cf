"""End-to-end acceptance checks. Each criterion prints one pass/fail line."""

from __future__ import annotations

import random

import pytest

from oracles import brute_mpcp, tiles_agree
from sessionck.automata import bounded_traces, build_gaut, build_laut, check_shape, language_equiv, normalize
from sessionck.checks import (
    RefutedNotImplementable,
    VerifiedUpToBound,
    decide,
    erasure_candidate,
    globally_cooperative,
    i_closed,
    is_local,
    zero_reachable,
)
from sessionck.csm import csm_closure_check, csm_from_locals, replay
from sessionck.events import SyncEvent
from sessionck.generators import (
    TileInstance,
    approx_intersection_witness,
    approx_refute,
    bundled_csm,
    ex56,
    random_instances,
    solution_indices,
)
from sessionck.hmsc import HmscMatcher, compare_bounded, encode, erasure_projection, projected_language
from sessionck.kernels import run_exhaustive
from sessionck.projection import MergeKind, canonical, project, project_all
from sessionck.syntax import parse_global
from sessionck.trace import GlobalMatcher

RESULTS: dict[int, str] = {}

PLAIN, SEMIFULL, FULL = MergeKind.PLAIN, MergeKind.SEMIFULL, MergeKind.FULL


def report(n: int, title: str, checks: list[tuple[str, bool]]) -> None:
    failed = [name for name, ok in checks if not ok]
    line = f"[{'PASS' if not failed else 'FAIL'}] {n:2d} {title}"
    if failed:
        line += "  (failed: " + "; ".join(failed) + ")"
    RESULTS[n] = line
    print(line)
    assert not failed, line


def same_local(a, b, role: str) -> bool:
    return language_equiv(normalize(build_laut(a, role)), normalize(build_laut(b, role)))[0]


def test_01_merge_matrix(cp):
    def res(name, role, kind):
        return project(cp.globals[name], role, kind)

    p37 = res("EX37", "r", PLAIN)
    s39 = res("EX39", "r", SEMIFULL)
    f310 = res("EX310", "r", FULL)
    checks = [
        ("plain accepts EX37", p37.ok),
        ("EX37 result matches printed", p37.ok and same_local(p37.local, cp.locals[("EX37", "r")], "r")),
        ("plain rejects EX38", not res("EX38", "r", PLAIN).ok),
        ("semifull accepts EX38", res("EX38", "r", SEMIFULL).ok),
        ("semifull accepts EX39", s39.ok),
        ("EX39 result equals printed", s39.ok and canonical(s39.local) == canonical(cp.locals[("EX39", "r")])),
        ("semifull rejects EX310", not res("EX310", "r", SEMIFULL).ok),
        ("full accepts EX310", f310.ok),
        ("EX310 result matches printed", f310.ok and same_local(f310.local, cp.locals[("EX310", "r")], "r")),
        ("full rejects EX311", not res("EX311", "r", FULL).ok),
        ("full rejects EX313", not res("EX313", "s", FULL).ok),
        ("full rejects G_2BPWS", not res("G_2BPWS", "b", FULL).ok),
        ("full rejects G_2BPIR", not res("G_2BPIR", "s", FULL).ok),
    ]
    report(1, "merge acceptance/rejection matrix", checks)


def test_02_i_closedness(cp):
    counts = {n: i_closed(parse_global(ex56(n)), count_all=True).stats["pair_checks"] for n in (2, 4, 8)}
    checks = [
        ("i_closed(G_2BP)", i_closed(cp.G_2BP).ok),
        ("not i_closed(EX58)", not i_closed(cp.EX58).ok),
    ]
    for n1, n2 in ((2, 4), (4, 8)):
        ratio = counts[n2] / counts[n1]
        target = (n2 / n1) ** 2
        checks.append((f"pair checks {counts[n1]}->{counts[n2]} ratio {ratio:.2f} vs {target:.0f}", abs(ratio - target) <= 0.2 * target))
    report(2, "I-closedness and quadratic pair checks", checks)


def test_03_two_buyer_pipeline(cp):
    v = decide(cp.G_2BP, 2, 20)
    seller = erasure_projection(encode(cp.G_2BP), "s")
    checks = [
        ("verified up to bound", isinstance(v, VerifiedUpToBound)),
        ("no deadlocks", isinstance(v, VerifiedUpToBound) and v.deadlocks == 0),
        ("seller machine matches printed", language_equiv(seller, normalize(build_laut(cp.locals[("G_2BP", "s")], "s")))[0]),
    ]
    report(3, "two-buyer pipeline", checks)


def test_04_incompleteness_of_merging(cp):
    g = cp.EX313
    v = decide(g, 2, 20)
    seller = erasure_projection(encode(g), "s")
    checks = [(f"{k.value} merge rejects", not project(g, "s", k).ok) for k in MergeKind]
    checks += [
        ("verified up to bound", isinstance(v, VerifiedUpToBound)),
        ("seller machine matches printed", language_equiv(seller, normalize(build_laut(cp.locals[("EX313", "s")], "s")))[0]),
    ]
    report(4, "implementable yet rejected by every merge", checks)


def test_05_negative_classifications(cp):
    gc = globally_cooperative(cp.NONGC)
    h = encode(cp.NONGC)
    loop_labels = {e.label for v in gc.witness.loop for e in h.mu[v].events} if gc.witness else set()
    loc = is_local(cp.NONGC)
    checks = [
        ("EX420 not 0-reachable", not zero_reachable(cp.EX420).ok),
        ("NONGC not cooperative", not gc.ok),
        ("witness loop carries m1 and m2", loop_labels == {"m1", "m2"}),
        ("witness graph splits p,q from r,s", gc.witness is not None and sorted(map(sorted, gc.witness.graph.components())) == [["p", "q"], ["r", "s"]]),
        ("NONGC not local", not loc.ok),
        ("segment p->q:m1 . r->s:m2", loc.witness == (SyncEvent("p", "q", "m1"), SyncEvent("r", "s", "m2"))),
        ("G_2BP local", is_local(cp.G_2BP).ok),
    ]
    report(5, "negative classifications with witnesses", checks)


def test_06_refutation_separation(cp):
    g = cp.EX66
    v = decide(g, 1, 10)
    checks = [("refuted", isinstance(v, RefutedNotImplementable))]
    if isinstance(v, RefutedNotImplementable):
        cex = v.counterexample
        checks.append(("counterexample replays on the candidate", replay(v.csm, cex.trace) is not None))
        outside = not GlobalMatcher(g, finite_only=False).run(cex.trace)
        checks.append(("counterexample is outside the global language", cex.kind != "prefix" or outside))
    checks.append(("bundled machine consistent up to reordering", approx_refute(g, 10, bundled_csm("EX66")) is None))
    report(6, "refutation versus reordering-consistency", checks)


@pytest.mark.slow
def test_07_exhaustive_equivalence_engines():
    checks = []
    for n in range(8):
        r = run_exhaustive(3, 2, n)
        checks.append((f"length {n}: {r.words} words agree", r.agrees))
        checks.append((f"length {n}: sim implies approx", r.sim_not_approx == 0))
    report(7, "equivalence keys versus swap closure, lengths 0..7", checks)


@pytest.mark.slow
def test_08_bounded_language_equalities(cp):
    checks = []
    for name, g in cp.globals.items():
        h = encode(g)
        gm = GlobalMatcher(g, finite_only=False)
        alphabet = sorted(set(gm.alphabet) | {e for v in h.vertices for e in h.mu[v].events})
        ag = compare_bounded(gm, HmscMatcher(h), alphabet, 12)
        checks.append((f"{name}: global versus HMSC ({ag.prefixes} prefixes)", ag.equal))
        for p in h.roles:
            via_machine = bounded_traces(erasure_projection(h, p), 12).maximal
            checks.append((f"{name}: erasure of {p}", via_machine == projected_language(h, p, 12)))
    report(8, "bounded language equalities at length 12", checks)


def _all_shapes(cp):
    for name, g in cp.globals.items():
        yield f"GAut {name}", build_gaut(g)
        for r, res in project_all(g, FULL).items():
            if res.ok:
                yield f"LAut {name}/{r}", build_laut(res.local, r)
    for (name, r), l in cp.locals.items():
        yield f"printed {name}/{r}", build_laut(l, r)


def test_09_automaton_shapes(cp):
    checks = [(label, check_shape(f).all) for label, f in _all_shapes(cp)]
    report(9, f"automaton shape flags on {len(checks)} automata", checks)


def _constructed(cp):
    for name, g in cp.globals.items():
        yield f"erasure {name}", erasure_candidate(g)
        res = project_all(g, FULL)
        if all(r.ok for r in res.values()):
            yield f"projected {name}", csm_from_locals({r: x.local for r, x in res.items()})
    for name in sorted({n for n, _ in cp.locals}):
        yield f"bundled {name}", bundled_csm(name)


@pytest.mark.slow
def test_10_closure_of_csm_languages(cp):
    checks = [(label, csm_closure_check(c, 12)) for label, c in _constructed(cp)]
    report(10, f"reordering closure on {len(checks)} machines", checks)


def test_11_tile_matching():
    fixed = [TileInstance(("ab", "b"), ("a", "bb")), TileInstance(("ab",), ("ba",))]
    instances = fixed + list(random_instances(random.Random(63), 8))
    checks = []
    for k, t in enumerate(instances):
        expected = brute_mpcp(t.u, t.v, 12)
        got = approx_intersection_witness(t, 12)
        ok = (got is None) == (expected is None)
        if got is not None:
            ok = ok and tiles_agree(t.u, t.v, solution_indices(t, got))
        checks.append((f"instance {t.to_json()}", ok))
    checks.append(("first fixed instance solvable", brute_mpcp(fixed[0].u, fixed[0].v, 12) is not None))
    checks.append(("second fixed instance unsolvable", brute_mpcp(fixed[1].u, fixed[1].v, 12) is None))
    report(11, "tile-matching witness versus brute force", checks)
