"""Finite state machines over interaction or per-role event alphabets."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Iterator, Optional

from .events import AsyncEvent, SyncEvent, rcv, snd
from .syntax import Choice, Done, External, Internal, Rec, Term, Var, indexed

Label = Optional[Hashable]  # None is the empty letter ε

# state kinds used for DOT styling
FINAL, BINDER, RECVAR, SENDING, RECEIVING, NEUTRAL = (
    "final",
    "binder",
    "var",
    "send",
    "recv",
    "neutral",
)

_DOT_STYLE = {
    FINAL: 'shape=doublecircle',
    BINDER: 'shape=circle, style=dashed',
    RECVAR: 'shape=circle, style="dashed,bold"',
    SENDING: 'shape=diamond',
    RECEIVING: 'shape=box',
    NEUTRAL: 'shape=circle',
}


@dataclass(frozen=True)
class Fsm:
    """A state machine with integer states; ``role`` is None for interaction alphabets."""

    states: tuple[int, ...]
    transitions: tuple[tuple[int, Label, int], ...]
    initial: int
    finals: frozenset[int]
    role: Optional[str] = None
    kinds: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self) -> None:
        known = set(self.states)
        if self.initial not in known or not self.finals <= known:
            raise ValueError("initial/final states must be states")
        for src, _, dst in self.transitions:
            if src not in known or dst not in known:
                raise ValueError(f"transition endpoint outside state set: {src}->{dst}")

    @cached_property
    def out(self) -> dict[int, list[tuple[Label, int]]]:
        adj: dict[int, list[tuple[Label, int]]] = {s: [] for s in self.states}
        for src, x, dst in self.transitions:
            adj[src].append((x, dst))
        return adj

    @cached_property
    def letters(self) -> tuple:
        return tuple(sorted({x for _, x, _ in self.transitions if x is not None}))

    @cached_property
    def is_deterministic(self) -> bool:
        for s in self.states:
            seen = set()
            for x, _ in self.out[s]:
                if x is None or x in seen:
                    return False
                seen.add(x)
        return True

    def closure(self, states: Iterable[int]) -> frozenset[int]:
        """ε-closure of a set of states."""
        todo = list(states)
        seen = set(todo)
        while todo:
            s = todo.pop()
            for x, t in self.out[s]:
                if x is None and t not in seen:
                    seen.add(t)
                    todo.append(t)
        return frozenset(seen)

    def step(self, states: frozenset[int], x: Label) -> frozenset[int]:
        return self.closure(t for s in states for y, t in self.out[s] if y == x)

    def delta(self, state: int, x: Label) -> Optional[int]:
        """Deterministic successor, or None when undefined."""
        for y, t in self.out[state]:
            if y == x:
                return t
        return None

    def accepts(self, word: Iterable) -> bool:
        cur = self.closure((self.initial,))
        for x in word:
            cur = self.step(cur, x)
            if not cur:
                return False
        return bool(cur & self.finals)

    def runs_prefix(self, word: Iterable) -> bool:
        cur = self.closure((self.initial,))
        for x in word:
            cur = self.step(cur, x)
            if not cur:
                return False
        return True

    @cached_property
    def coreachable(self) -> frozenset[int]:
        """States from which a final state is reachable."""
        back: dict[int, list[int]] = {s: [] for s in self.states}
        for src, _, dst in self.transitions:
            back[dst].append(src)
        todo = list(self.finals)
        seen = set(todo)
        while todo:
            s = todo.pop()
            for p in back[s]:
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
        return frozenset(seen)

    @cached_property
    def reachable(self) -> frozenset[int]:
        todo = [self.initial]
        seen = {self.initial}
        while todo:
            s = todo.pop()
            for _, t in self.out[s]:
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        return frozenset(seen)

    @property
    def omega_sane(self) -> bool:
        """Every reachable state can still reach a final state."""
        return self.reachable <= self.coreachable

    def kind(self, s: int) -> str:
        if s in self.kinds:
            return self.kinds[s]
        if s in self.finals:
            return FINAL
        labels = [x for x, _ in self.out[s] if x is not None]
        if labels and all(isinstance(x, AsyncEvent) and x.is_send for x in labels):
            return SENDING
        if labels and all(isinstance(x, AsyncEvent) and not x.is_send for x in labels):
            return RECEIVING
        return NEUTRAL

    def to_dot(self, name: str = "fsm") -> str:
        return "\n".join(_dot_lines(self, name)) + "\n"


def _dot_lines(f: Fsm, name: str) -> Iterator[str]:
    yield f"digraph {name} {{"
    yield "  rankdir=LR;"
    yield '  __start [shape=point, label=""];'
    for s in f.states:
        yield f'  q{s} [label="{s}", {_DOT_STYLE[f.kind(s)]}];'
    yield f"  __start -> q{f.initial};"
    for src, x, dst in f.transitions:
        label = "ε" if x is None else str(x)
        yield f'  q{src} -> q{dst} [label="{label}"];'
    yield "}"


# ---------------------------------------------------------------- constructions


def _binder_of(nodes: list[Term], kids: list[tuple[int, ...]]) -> dict[int, int]:
    """Map every Var occurrence to the index of the binder it refers to."""
    out: dict[int, int] = {}

    def visit(k: int, env: dict[str, int]) -> None:
        node = nodes[k]
        if isinstance(node, Var):
            out[k] = env[node.name]
            return
        if isinstance(node, Rec):
            env = {**env, node.var: k}
        for c in kids[k]:
            visit(c, env)

    visit(0, {})
    return out


def _term_automaton(t: Term, role: Optional[str]) -> Fsm:
    nodes, kids = indexed(t)
    back = _binder_of(nodes, kids)
    trans: list[tuple[int, Label, int]] = []
    kinds: dict[int, str] = {}
    for k, node in enumerate(nodes):
        if isinstance(node, Done):
            kinds[k] = FINAL
        elif isinstance(node, Var):
            kinds[k] = RECVAR
            trans.append((k, None, back[k]))
        elif isinstance(node, Rec):
            kinds[k] = BINDER
            trans.append((k, None, kids[k][0]))
        elif isinstance(node, Choice):
            kinds[k] = NEUTRAL
            for b, c in zip(node.branches, kids[k]):
                trans.append((k, SyncEvent(node.sender, b.receiver, b.label), c))
        else:
            sending = isinstance(node, Internal)
            kinds[k] = SENDING if sending else RECEIVING
            for b, c in zip(node.branches, kids[k]):
                x = snd(role, b.peer, b.label) if sending else rcv(role, b.peer, b.label)
                trans.append((k, x, c))
    finals = frozenset(k for k, n in enumerate(nodes) if isinstance(n, Done))
    return Fsm(tuple(range(len(nodes))), tuple(trans), 0, finals, role, kinds)


def build_gaut(g: Term) -> Fsm:
    """One state per indexed subterm of a global type, over interactions."""
    if any(isinstance(n, (Internal, External)) for n in indexed(g)[0]):
        raise TypeError("build_gaut expects a global type")
    return _term_automaton(g, None)


def build_laut(l: Term, role: str) -> Fsm:
    """One state per indexed subterm of a local type for ``role``."""
    if any(isinstance(n, Choice) for n in indexed(l)[0]):
        raise TypeError("build_laut expects a local type")
    return _term_automaton(l, role)


def from_edges(
    edges: Iterable[tuple[Hashable, Label, Hashable]],
    initial: Hashable,
    finals: Iterable[Hashable],
    role: Optional[str] = None,
    states: Iterable[Hashable] = (),
) -> Fsm:
    """Build an Fsm from arbitrary hashable state names, numbering them in first-seen order."""
    names: dict[Hashable, int] = {}

    def num(s: Hashable) -> int:
        if s not in names:
            names[s] = len(names)
        return names[s]

    num(initial)
    for s in states:
        num(s)
    trans = [(num(a), x, num(b)) for a, x, b in edges]
    fin = frozenset(num(s) for s in finals)
    return Fsm(tuple(range(len(names))), tuple(trans), 0, fin, role)


# ---------------------------------------------------------------- normalization


def determinize(f: Fsm) -> Fsm:
    """Subset construction over ε-closures, subsets named by sorted member lists."""
    start = f.closure((f.initial,))
    index = {start: 0}
    order = [start]
    trans: list[tuple[int, Label, int]] = []
    i = 0
    while i < len(order):
        cur = order[i]
        letters = sorted({x for s in cur for x, _ in f.out[s] if x is not None})
        for x in letters:
            nxt = f.step(cur, x)
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
            trans.append((i, x, index[nxt]))
        i += 1
    finals = frozenset(k for k, sub in enumerate(order) if sub & f.finals)
    return Fsm(tuple(range(len(order))), tuple(trans), 0, finals, f.role)


def minimize(d: Fsm) -> Fsm:
    """Moore refinement of a deterministic machine with a partial transition map."""
    if not d.is_deterministic:
        raise ValueError("minimize expects a deterministic machine")
    block = {s: int(s in d.finals) for s in d.states}
    while True:
        sigs = {
            s: (block[s], tuple(sorted((x, block[t]) for x, t in d.out[s])))
            for s in d.states
        }
        ids: dict = {}
        new = {s: ids.setdefault(sigs[s], len(ids)) for s in sorted(d.states)}
        if len(ids) == len(set(block.values())):
            break
        block = new
    # renumber blocks in BFS order from the initial state
    start = block[d.initial]
    rep = {}
    for s in sorted(d.states):
        rep.setdefault(block[s], s)
    order = {start: 0}
    queue = deque([start])
    trans = []
    while queue:
        b = queue.popleft()
        for x, t in sorted(d.out[rep[b]], key=lambda e: e[0]):
            tb = block[t]
            if tb not in order:
                order[tb] = len(order)
                queue.append(tb)
            trans.append((order[b], x, order[tb]))
    finals = frozenset(order[block[s]] for s in d.finals if block[s] in order)
    return Fsm(tuple(range(len(order))), tuple(trans), 0, finals, d.role)


def normalize(f: Fsm) -> Fsm:
    """ε-elimination, subset construction and minimization."""
    return minimize(determinize(f))


# ---------------------------------------------------------------- language utilities


def language_equiv(f1: Fsm, f2: Fsm) -> tuple[bool, Optional[tuple]]:
    """Compare finite maximal-trace languages; on difference return a shortest witness."""
    if f1.role != f2.role:
        raise ValueError(f"alphabet mismatch: {f1.role!r} vs {f2.role!r}")
    a, b = normalize(f1), normalize(f2)
    live_a, live_b = a.coreachable, b.coreachable
    start = (a.initial, b.initial)
    parent: dict = {start: None}
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        sa, sb = pair
        fa = sa is not None and sa in a.finals
        fb = sb is not None and sb in b.finals
        if fa != fb:
            word = []
            while parent[pair] is not None:
                pair, x = parent[pair]
                word.append(x)
            return False, tuple(reversed(word))
        letters = set()
        if sa is not None:
            letters.update(x for x, _ in a.out[sa])
        if sb is not None:
            letters.update(x for x, _ in b.out[sb])
        for x in sorted(letters):
            na = a.delta(sa, x) if sa is not None else None
            nb = b.delta(sb, x) if sb is not None else None
            if na is not None and na not in live_a:
                na = None
            if nb is not None and nb not in live_b:
                nb = None
            nxt = (na, nb)
            if nxt == (None, None) or nxt in parent:
                continue
            parent[nxt] = (pair, x)
            queue.append(nxt)
    return True, None


@dataclass(frozen=True)
class BoundedTraces:
    maximal: frozenset
    prefixes: frozenset


def bounded_traces(f: Fsm, maxlen: int) -> BoundedTraces:
    """Traces of length at most ``maxlen``; ε letters do not count."""
    maximal: set = set()
    prefixes: set = set()
    stack = [(f.closure((f.initial,)), ())]
    while stack:
        cur, w = stack.pop()
        prefixes.add(w)
        if cur & f.finals:
            maximal.add(w)
        if len(w) >= maxlen:
            continue
        for x in sorted({x for s in cur for x, _ in f.out[s] if x is not None}):
            stack.append((f.step(cur, x), w + (x,)))
    return BoundedTraces(frozenset(maximal), frozenset(prefixes))


# ---------------------------------------------------------------- shape


@dataclass(frozen=True)
class ShapeReport:
    ancestor_recursive: bool
    free_of_intermediate_recursion: bool
    non_merging: bool
    dense: bool
    lvl: Optional[dict] = field(default=None, compare=False)

    @property
    def all(self) -> bool:
        return (
            self.ancestor_recursive
            and self.free_of_intermediate_recursion
            and self.non_merging
            and self.dense
        )


def _reach(f: Fsm, src: int, avoid: Optional[int] = None) -> set[int]:
    if src == avoid:
        return set()
    seen = {src}
    todo = [src]
    while todo:
        s = todo.pop()
        for _, t in f.out[s]:
            if t != avoid and t not in seen:
                seen.add(t)
                todo.append(t)
    return seen


def backward_edges(f: Fsm) -> set[tuple[int, Label, int]]:
    """ε-edges q -> q' where q' is reachable from the start avoiding q and q' reaches q."""
    out = set()
    for edge in f.transitions:
        q, x, q2 = edge
        if x is not None:
            continue
        if q2 in _reach(f, f.initial, avoid=q) and q in _reach(f, q2):
            out.add(edge)
    return out


def _levels(f: Fsm, forward: list[tuple[int, Label, int]]) -> Optional[dict[int, int]]:
    succ: dict[int, set[int]] = {s: set() for s in f.states}
    indeg = {s: 0 for s in f.states}
    for q, _, q2 in forward:
        if q == q2:
            return None
        if q2 not in succ[q]:
            succ[q].add(q2)
            indeg[q2] += 1
    order = [s for s in f.states if indeg[s] == 0]
    i = 0
    while i < len(order):
        for t in succ[order[i]]:
            indeg[t] -= 1
            if indeg[t] == 0:
                order.append(t)
        i += 1
    if len(order) != len(f.states):
        return None
    lvl: dict[int, int] = {}
    for s in reversed(order):
        lvl[s] = 1 + max((lvl[t] for t in succ[s]), default=-1)
    return lvl


def check_shape(f: Fsm) -> ShapeReport:
    backward = backward_edges(f)
    forward = [e for e in f.transitions if e not in backward]
    lvl = _levels(f, forward)
    dense = all(len(f.out[q]) == 1 for q, x, _ in f.transitions if x is None)
    if lvl is None:
        return ShapeReport(False, False, False, dense, None)
    free = True
    for q in f.states:
        targets = {t for _, t in f.out[q]}
        if len(targets) > 1 and any(lvl[q] <= lvl[t] for t in targets):
            free = False
    higher: dict[int, set[int]] = {s: set() for s in f.states}
    for q, _, q2 in f.transitions:
        if lvl[q] > lvl[q2]:
            higher[q2].add(q)
    non_merging = all(len(v) <= 1 for v in higher.values())
    return ShapeReport(True, free, non_merging, dense, lvl)
