"""Classification checks on global types and the bounded implementability pipeline."""

from __future__ import annotations

import itertools
import json
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Optional

from .automata import Fsm, build_gaut
from .csm import BudgetExceeded, Counterexample, Csm, verify_against
from .events import SyncEvent, format_word, split
from .hmsc import CommGraph, Hmsc, comm_graph, encode, erasure_projection, msc_of_word
from .syntax import Choice, Done, Rec, Term, Var, indexed


@dataclass
class CheckResult:
    ok: bool
    witness: Any = None
    stats: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------- 0-reachability


def zero_reachable(g: Term) -> CheckResult:
    """Every vertex reachable in the HMSC encoding can still reach a terminal vertex."""
    h = encode(g)
    live = _coreach(h)
    for v in sorted(h.reachable_from(h.initial), key=_vertex_order):
        if v not in live:
            return CheckResult(False, v)
    return CheckResult(True)


def _vertex_order(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in v[1:].split("."))


def _coreach(h: Hmsc) -> set[str]:
    preds: dict[str, list[str]] = {v: [] for v in h.vertices}
    for a, b in h.edges:
        preds[b].append(a)
    seen = set(h.terminals)
    todo = list(seen)
    while todo:
        v = todo.pop()
        for u in preds[v]:
            if u not in seen:
                seen.add(u)
                todo.append(u)
    return seen


# ---------------------------------------------------------------- collapsed global automaton


@dataclass(frozen=True)
class Collapsed:
    """The global automaton with variable states rebent and binders merged into their successor."""

    states: tuple[int, ...]
    edges: tuple[tuple[int, SyncEvent, int], ...]
    initial: int
    finals: frozenset[int]

    def out(self, s: int) -> list[tuple[SyncEvent, int]]:
        return [(x, t) for a, x, t in self.edges if a == s]

    def into(self, s: int) -> list[tuple[int, SyncEvent]]:
        return [(a, x) for a, x, t in self.edges if t == s]


def collapse(g: Term) -> Collapsed:
    nodes, kids = indexed(g)
    env_binder: dict[int, int] = {}

    def scope(k: int, env: dict[str, int]) -> None:
        node = nodes[k]
        if isinstance(node, Var):
            env_binder[k] = env[node.name]
            return
        if isinstance(node, Rec):
            env = {**env, node.var: k}
        for c in kids[k]:
            scope(c, env)

    scope(0, {})

    def resolve(k: int) -> int:
        seen = set()
        while isinstance(nodes[k], (Var, Rec)):
            if k in seen:
                raise ValueError("unguarded recursion")
            seen.add(k)
            k = env_binder[k] if isinstance(nodes[k], Var) else kids[k][0]
        return k

    init = resolve(0)
    edges = []
    states = []
    seen = {init}
    todo = [init]
    while todo:
        k = todo.pop()
        states.append(k)
        node = nodes[k]
        if isinstance(node, Choice):
            for b, c in zip(node.branches, kids[k]):
                t = resolve(c)
                edges.append((k, SyncEvent(node.sender, b.receiver, b.label), t))
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
    finals = frozenset(k for k in states if isinstance(nodes[k], Done))
    return Collapsed(tuple(sorted(states)), tuple(sorted(edges, key=lambda e: (e[0], e[2], str(e[1])))), init, finals)


# ---------------------------------------------------------------- I-closedness


def independent(x: SyncEvent, y: SyncEvent) -> bool:
    return not ({x.sender, x.receiver} & {y.sender, y.receiver})


def i_closed(g: Term, count_all: bool = False) -> CheckResult:
    """No state of the collapsed automaton is entered and left by independent interactions.

    With ``count_all`` every pair is examined so that ``pair_checks`` measures the full work.
    """
    a = collapse(g)
    checks = 0
    witness = None
    for s in a.states:
        outs = a.out(s)
        for _, x in a.into(s):
            for y, _ in outs:
                checks += 1
                if witness is None and independent(x, y):
                    witness = (x, y)
                    if not count_all:
                        return CheckResult(False, witness, {"pair_checks": checks})
    return CheckResult(witness is None, witness, {"pair_checks": checks})


# ---------------------------------------------------------------- global cooperation


def _sccs(vertices: list[str], succ: dict[str, list[str]]) -> list[list[str]]:
    """Tarjan's algorithm; only components containing a cycle are returned."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on: set[str] = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = itertools.count()

    for root in vertices:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for u in it:
                if u not in index:
                    index[u] = low[u] = next(counter)
                    stack.append(u)
                    on.add(u)
                    work.append((u, iter(succ[u])))
                    advanced = True
                    break
                if u in on:
                    low[v] = min(low[v], index[u])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    u = stack.pop()
                    on.discard(u)
                    comp.append(u)
                    if u == v:
                        break
                if len(comp) > 1 or v in succ[v]:
                    out.append(sorted(comp, key=_vertex_order))
    return out


def _msg_roles(h: Hmsc, v: str) -> frozenset[str]:
    return frozenset(e.active for e in h.mu[v].events)


def _path(succ: dict[str, list[str]], allowed: set[str], src: str, dst: str) -> list[str]:
    """Shortest path from src to dst through allowed vertices (src first, dst last)."""
    prev = {src: None}
    q = deque([src])
    while q:
        v = q.popleft()
        for u in succ[v]:
            if u in allowed and u not in prev:
                prev[u] = v
                if u == dst:
                    q.clear()
                    break
                q.append(u)
    if dst not in prev:
        raise AssertionError("no path inside a strongly connected set")
    out = [dst]
    while out[-1] != src:
        out.append(prev[out[-1]])
    return out[::-1]


@dataclass(frozen=True)
class CooperationWitness:
    loop: tuple[str, ...]
    graph: CommGraph

    def describe(self, h: Hmsc) -> str:
        msgs = [h.labels.get(v, v) for v in self.loop if h.mu[v].events]
        comps = " | ".join("{" + ",".join(sorted(c)) + "}" for c in self.graph.components())
        return f"loop {' . '.join(msgs)} has components {comps}"


def globally_cooperative(g: Term | Hmsc, budget: int = 1_000_000) -> CheckResult:
    """Every loop of the HMSC encoding has a weakly connected communication graph.

    A loop is disconnected iff its roles split into two sides with no message
    crossing. For each strongly connected component and each split of its
    roles, keep the vertices whose message stays on one side; a violation is a
    strongly connected piece of that restriction with messages on both sides.
    """
    h = g if isinstance(g, Hmsc) else encode(g)
    reach = h.reachable_from(h.initial)
    verts = [v for v in h.vertices if v in reach]
    succ = {v: [u for u in h.succ[v] if u in reach] for v in verts}
    checked = 0
    for comp in _sccs(verts, succ):
        roles = sorted(set().union(*(_msg_roles(h, v) for v in comp)))
        if len(roles) < 2:
            continue
        first, rest = roles[0], roles[1:]
        for k in range(len(rest) + 1):
            for combo in itertools.combinations(rest, k):
                side_a = frozenset((first,) + combo)
                side_b = frozenset(roles) - side_a
                if not side_b:
                    continue
                checked += 1
                if checked > budget:
                    raise BudgetExceeded(f"more than {budget} role splits")
                keep = [v for v in comp if _msg_roles(h, v) <= side_a or _msg_roles(h, v) <= side_b]
                keep_set = set(keep)
                sub = {v: [u for u in succ[v] if u in keep_set] for v in keep}
                for piece in _sccs(keep, sub):
                    a_side = [v for v in piece if h.mu[v].events and _msg_roles(h, v) <= side_a]
                    b_side = [v for v in piece if h.mu[v].events and _msg_roles(h, v) <= side_b]
                    if a_side and b_side:
                        allowed = set(piece)
                        there = _path(sub, allowed, a_side[0], b_side[0])
                        back = _path(sub, allowed, b_side[0], a_side[0])
                        loop = tuple(there + back[1:-1])
                        graph = comm_graph(h.mu[v] for v in loop)
                        return CheckResult(False, CooperationWitness(loop, graph), {"subsets_checked": checked})
    return CheckResult(True, None, {"subsets_checked": checked})


def gaut_cooperation_shortcut(g: Term) -> CheckResult:
    """Advisory check: the shortest run from each binder to each of its variables is connected."""
    aut = build_gaut(g)
    nodes, kids = indexed(g)
    env: dict[int, int] = {}

    def scope(k: int, bound: dict[str, int]) -> None:
        node = nodes[k]
        if isinstance(node, Var):
            env[k] = bound[node.name]
            return
        if isinstance(node, Rec):
            bound = {**bound, node.var: k}
        for c in kids[k]:
            scope(c, bound)

    scope(0, {})
    for var, binder in sorted(env.items()):
        word = _shortest_word(aut, binder, var)
        if word is not None and word and not comm_graph(word).weakly_connected:
            return CheckResult(False, word)
    return CheckResult(True)


def _shortest_word(aut: Fsm, src: int, dst: int) -> Optional[tuple]:
    prev: dict[int, Optional[tuple]] = {src: None}
    q = deque([src])
    while q:
        s = q.popleft()
        if s == dst:
            break
        for x, t in aut.out[s]:
            if t not in prev:
                prev[t] = (s, x)
                q.append(t)
    if dst not in prev:
        return None
    word = []
    s = dst
    while prev[s] is not None:
        s, x = prev[s]
        if x is not None:
            word.append(x)
    return tuple(reversed(word))


# ---------------------------------------------------------------- locality


def segments(g: Term) -> list[tuple[SyncEvent, ...]]:
    """Maximal branch-free, loop-free runs of the collapsed automaton.

    One run starts at every transition leaving a branching state, and one at
    the initial state if it has a single successor. A run continues through
    states with exactly one outgoing transition.
    """
    a = collapse(g)
    outs = {s: a.out(s) for s in a.states}
    starts = []
    for s in a.states:
        if len(outs[s]) >= 2:
            starts.extend((s, x, t) for x, t in outs[s])
    if len(outs[a.initial]) == 1:
        x, t = outs[a.initial][0]
        starts.insert(0, (a.initial, x, t))
    found = []
    for s, x, t in starts:
        word = [x]
        visited = {s, t}
        cur = t
        while len(outs[cur]) == 1 and cur not in a.finals:
            y, nxt = outs[cur][0]
            if nxt in visited:
                word.append(y)
                break
            word.append(y)
            visited.add(nxt)
            cur = nxt
        found.append(tuple(word))
    return found


def is_local(g: Term) -> CheckResult:
    """Every segment's chart has exactly one minimal event."""
    segs = segments(g)
    for w in segs:
        if len(msc_of_word(split(w)).minimal()) != 1:
            return CheckResult(False, w, {"segments": len(segs)})
    return CheckResult(True, None, {"segments": len(segs)})


# ---------------------------------------------------------------- decision pipeline


@dataclass
class Verdict:
    channel_bound: int
    trace_bound: int
    stats: dict = field(default_factory=dict)

    name = "Verdict"
    positive = False

    def witness_json(self) -> Optional[Any]:
        return None

    def to_json(self) -> dict:
        out = {
            "verdict": self.name,
            "bounds": {"channel": self.channel_bound, "trace": self.trace_bound},
            "stats": {
                "states_explored": self.stats.get("states_explored", 0),
                "subsets_checked": self.stats.get("subsets_checked", 0),
                "wallclock_ms": self.stats.get("wallclock_ms", 0),
            },
        }
        w = self.witness_json()
        if w is not None:
            out["witness"] = w
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


@dataclass
class NotZeroReachable(Verdict):
    vertex: str = ""
    name = "NotZeroReachable"

    def witness_json(self):
        return {"vertex": self.vertex}


@dataclass
class NotGloballyCooperative(Verdict):
    witness: Optional[CooperationWitness] = None
    name = "NotGloballyCooperative"

    def witness_json(self):
        return {
            "loop": list(self.witness.loop),
            "components": [sorted(c) for c in self.witness.graph.components()],
        }


@dataclass
class RefutedNotImplementable(Verdict):
    counterexample: Optional[Counterexample] = None
    csm: Optional[Csm] = field(default=None, repr=False)
    name = "RefutedNotImplementable"

    def witness_json(self):
        return self.counterexample.to_json()


@dataclass
class VerifiedUpToBound(Verdict):
    csm: Optional[Csm] = field(default=None, repr=False)
    deadlocks: int = 0
    name = "VerifiedUpToBound"
    positive = True


def erasure_candidate(g: Term) -> Csm:
    h = encode(g)
    return Csm({p: erasure_projection(h, p) for p in h.roles}, normalized=True)


def decide(g: Term, channel_bound: int = 2, trace_bound: int = 20, strict_progress: bool = False) -> Verdict:
    start = time.perf_counter()
    stats: dict = {}

    def done(v: Verdict) -> Verdict:
        stats["wallclock_ms"] = int((time.perf_counter() - start) * 1000)
        v.stats = stats
        return v

    zr = zero_reachable(g)
    if not zr:
        return done(NotZeroReachable(channel_bound, trace_bound, vertex=zr.witness))
    gc = globally_cooperative(g)
    stats["subsets_checked"] = gc.stats["subsets_checked"]
    if not gc:
        return done(NotGloballyCooperative(channel_bound, trace_bound, witness=gc.witness))
    c = erasure_candidate(g)
    rep = verify_against(c, g, channel_bound, trace_bound, strict_progress)
    stats["states_explored"] = rep.explored.classes
    if rep.counterexamples:
        return done(RefutedNotImplementable(channel_bound, trace_bound, counterexample=rep.counterexamples[0], csm=c))
    return done(VerifiedUpToBound(channel_bound, trace_bound, csm=c, deadlocks=len(rep.explored.deadlocks)))


def describe_pair(pair: tuple[SyncEvent, SyncEvent]) -> str:
    return f"({pair[0]}, {pair[1]})"


def describe_segment(w: tuple[SyncEvent, ...]) -> str:
    return format_word(w)
