"""Message sequence charts, their high-level graphs, and projection by erasure."""

from __future__ import annotations

import sys

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Optional, Sequence, Union

from .automata import Fsm, from_edges, normalize
from .budget import BudgetExceeded, state_budget
from .events import AsyncEvent, SyncEvent, rcv, snd
from .syntax import Choice, Done, Rec, Term, Var, indexed
from .trace import matched_pairs


class InvalidMsc(ValueError):
    pass


@dataclass(frozen=True)
class Bmsc:
    """A basic MSC whose node ids are positions in ``events``.

    Per-role orders follow node order, and ``match`` pairs each receive with its send.
    """

    events: tuple[AsyncEvent, ...] = ()
    match: tuple[tuple[int, int], ...] = ()

    @cached_property
    def recv_of(self) -> dict[int, int]:
        return dict(self.match)

    @cached_property
    def send_of(self) -> dict[int, int]:
        return {r: s for s, r in self.match}

    @property
    def roles(self) -> tuple[str, ...]:
        return tuple(sorted({e.active for e in self.events}))

    @cached_property
    def preds(self) -> tuple[tuple[int, ...], ...]:
        """Immediate predecessors: previous node of the same role, and the matching send."""
        last: dict[str, int] = {}
        out = []
        for i, e in enumerate(self.events):
            ps = []
            if e.active in last:
                ps.append(last[e.active])
            if i in self.send_of:
                ps.append(self.send_of[i])
            last[e.active] = i
            out.append(tuple(ps))
        return tuple(out)

    def minimal(self) -> tuple[int, ...]:
        return tuple(i for i, ps in enumerate(self.preds) if not ps)

    def validate(self, allow_unmatched: bool = False) -> None:
        seen_s, seen_r = set(), set()
        for s, r in self.match:
            es, er = self.events[s], self.events[r]
            if not es.is_send or er.is_send or s in seen_s or r in seen_r:
                raise InvalidMsc(f"bad matching pair ({s}, {r})")
            if (es.active, es.peer, es.label) != (er.peer, er.active, er.label):
                raise InvalidMsc(f"labels do not respect the matching at ({s}, {r})")
            seen_s.add(s)
            seen_r.add(r)
        for i, e in enumerate(self.events):
            if not e.is_send and i not in seen_r:
                raise InvalidMsc(f"receive {i} is unmatched")
            if e.is_send and i not in seen_s and not allow_unmatched:
                raise InvalidMsc(f"send {i} is unmatched")
        by_chan: dict[tuple[str, str], list[tuple[int, int]]] = {}
        for s, r in self.match:
            by_chan.setdefault(self.events[s].channel, []).append((s, r))
        for pairs in by_chan.values():
            pairs.sort()
            recvs = [r for _, r in pairs]
            if recvs != sorted(recvs):
                raise InvalidMsc("matching is not FIFO")
        for ch, pairs in by_chan.items():
            # an unmatched send may not overtake a matched one on its channel
            matched = {s for s, _ in pairs}
            dangling = [i for i, e in enumerate(self.events) if e.is_send and e.channel == ch and i not in matched]
            if dangling and matched and min(dangling) < max(matched):
                raise InvalidMsc("unmatched send precedes a matched send on its channel")
        # acyclicity: predecessors must come earlier in some order
        indeg = [len(ps) for ps in self.preds]
        succ: list[list[int]] = [[] for _ in self.events]
        for i, ps in enumerate(self.preds):
            for p in ps:
                succ[p].append(i)
        todo = [i for i, d in enumerate(indeg) if d == 0]
        done = 0
        while todo:
            i = todo.pop()
            done += 1
            for j in succ[i]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    todo.append(j)
        if done != len(self.events):
            raise InvalidMsc("cyclic order")

    def linearizations(self, maxlen: Optional[int] = None) -> frozenset:
        """Label words of all linear extensions, truncated to ``maxlen`` letters if given."""
        n = len(self.events)
        full = (1 << n) - 1
        depth = n if maxlen is None else min(n, maxlen)
        pred_mask = [sum(1 << p for p in ps) for ps in self.preds]
        memo: dict[int, frozenset] = {}

        def suffixes(ideal: int, k: int) -> frozenset:
            if ideal == full or k == depth:
                return frozenset({()})
            key = ideal
            if key in memo:
                return memo[key]
            out = set()
            for i in range(n):
                bit = 1 << i
                if ideal & bit == 0 and pred_mask[i] & ideal == pred_mask[i]:
                    for rest in suffixes(ideal | bit, k + 1):
                        out.add((self.events[i],) + rest)
            res = frozenset(out)
            memo[key] = res
            return res

        # the depth reached from an ideal is its popcount, so memo on the ideal alone is sound
        return suffixes(0, 0)

    def to_dot(self, name: str = "bmsc") -> str:
        lines = [f"digraph {name} {{", "  rankdir=TB;"]
        for i, e in enumerate(self.events):
            lines.append(f'  n{i} [label="{e}", shape=box];')
        for i, ps in enumerate(self.preds):
            for p in ps:
                style = "solid" if p in self.recv_of and self.recv_of[p] == i else "dotted"
                lines.append(f"  n{p} -> n{i} [style={style}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


EMPTY = Bmsc()


def message(p: str, q: str, m: str) -> Bmsc:
    return Bmsc((snd(p, q, m), rcv(q, p, m)), ((0, 1),))


def concat(m1: Bmsc, m2: Bmsc) -> Bmsc:
    """Sequential composition: every node of m2 follows the same-role nodes of m1."""
    k = len(m1.events)
    return Bmsc(m1.events + m2.events, m1.match + tuple((s + k, r + k) for s, r in m2.match))


def concat_all(ms: Iterable[Bmsc]) -> Bmsc:
    out = EMPTY
    for m in ms:
        out = concat(out, m)
    return out


def msc_of_word(w: Sequence[AsyncEvent]) -> Bmsc:
    """The MSC induced by a feasible word; unmatched sends stay dangling."""
    w = tuple(w)
    return Bmsc(w, matched_pairs(w).pairs)


def linearizations(m: Bmsc, maxlen: Optional[int] = None) -> frozenset:
    return m.linearizations(maxlen)


# ---------------------------------------------------------------- communication graphs


@dataclass(frozen=True)
class CommGraph:
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]

    def components(self) -> list[frozenset[str]]:
        adj: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        seen: set[str] = set()
        comps = []
        for n in sorted(self.nodes):
            if n in seen:
                continue
            comp = {n}
            todo = [n]
            while todo:
                x = todo.pop()
                for y in adj[x]:
                    if y not in comp:
                        comp.add(y)
                        todo.append(y)
            seen |= comp
            comps.append(frozenset(comp))
        return comps

    @property
    def weakly_connected(self) -> bool:
        return len(self.components()) <= 1


def comm_graph(items: Iterable[Union[Bmsc, SyncEvent]]) -> CommGraph:
    """Active roles and sender-to-receiver edges of a sequence of MSCs or interactions."""
    nodes: set[str] = set()
    edges: set[tuple[str, str]] = set()
    for item in items:
        if isinstance(item, SyncEvent):
            nodes.update((item.sender, item.receiver))
            edges.add((item.sender, item.receiver))
            continue
        for e in item.events:
            nodes.add(e.active)
            if e.is_send:
                edges.add((e.active, e.peer))
    return CommGraph(frozenset(nodes), frozenset(edges))


# ---------------------------------------------------------------- HMSC


@dataclass(frozen=True)
class Hmsc:
    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    initial: str
    terminals: frozenset[str]
    mu: dict = field(compare=False, hash=False)
    labels: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self) -> None:
        known = set(self.vertices)
        if self.initial not in known or not self.terminals <= known:
            raise ValueError("initial and terminal vertices must be vertices")
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"edge {a}->{b} leaves the vertex set")

    @cached_property
    def succ(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {v: [] for v in self.vertices}
        for a, b in self.edges:
            out[a].append(b)
        return out

    @cached_property
    def roles(self) -> tuple[str, ...]:
        found = set()
        for m in self.mu.values():
            found.update(m.roles)
        return tuple(sorted(found))

    def reachable_from(self, v: str) -> set[str]:
        seen = {v}
        todo = [v]
        while todo:
            x = todo.pop()
            for y in self.succ[x]:
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
        return seen

    def to_json(self) -> str:
        data = {
            "vertices": [
                {
                    "id": v,
                    "label": self.labels.get(v, ""),
                    "events": [str(e) for e in self.mu[v].events],
                    "match": [list(p) for p in self.mu[v].match],
                }
                for v in self.vertices
            ],
            "edges": [list(e) for e in self.edges],
            "initial": self.initial,
            "terminals": sorted(self.terminals),
        }
        return json.dumps(data, indent=2, sort_keys=True)

    def to_dot(self, name: str = "hmsc") -> str:
        return "\n".join(_hmsc_dot(self, name)) + "\n"


def _hmsc_dot(h: Hmsc, name: str) -> Iterator[str]:
    yield f"digraph {name} {{"
    yield '  __start [shape=point, label=""];'
    for v in h.vertices:
        msgs = "\\n".join(str(e) for e in h.mu[v].events) or "∅"
        shape = "doubleoctagon" if v in h.terminals else "box"
        yield f'  "{v}" [shape={shape}, label="{v}\\n{msgs}"];'
    yield f'  __start -> "{h.initial}";'
    for a, b in h.edges:
        yield f'  "{a}" -> "{b}";'
    yield "}"


def encode(g: Term) -> Hmsc:
    """One vertex per subterm plus one per choice branch; branch vertices carry the message."""
    nodes, kids = indexed(g)
    binder: dict[int, int] = {}

    def scope(k: int, env: dict[str, int]) -> None:
        node = nodes[k]
        if isinstance(node, Var):
            binder[k] = env[node.name]
            return
        if isinstance(node, Rec):
            env = {**env, node.var: k}
        for c in kids[k]:
            scope(c, env)

    scope(0, {})
    vertices: list[str] = []
    edges: list[tuple[str, str]] = []
    mu: dict[str, Bmsc] = {}
    labels: dict[str, str] = {}
    for k, node in enumerate(nodes):
        v = f"v{k}"
        vertices.append(v)
        mu[v] = EMPTY
        if isinstance(node, Rec):
            labels[v] = f"mu {node.var}"
            edges.append((v, f"v{kids[k][0]}"))
        elif isinstance(node, Var):
            labels[v] = node.name
            edges.append((v, f"v{binder[k]}"))
        elif isinstance(node, Done):
            labels[v] = "0"
        elif isinstance(node, Choice):
            labels[v] = f"choice {node.sender}"
            for j, (b, c) in enumerate(zip(node.branches, kids[k])):
                bv = f"v{k}.{j}"
                vertices.append(bv)
                mu[bv] = message(node.sender, b.receiver, b.label)
                labels[bv] = f"{node.sender}->{b.receiver}:{b.label}"
                edges.append((v, bv))
                edges.append((bv, f"v{c}"))
        else:
            raise TypeError("encode expects a global type")
    terminals = frozenset(f"v{k}" for k, n in enumerate(nodes) if isinstance(n, Done))
    return Hmsc(tuple(vertices), tuple(edges), "v0", terminals, mu, labels)


@dataclass(frozen=True)
class HmscLanguage:
    maximal: frozenset
    prefixes: frozenset


def hmsc_bounded_language(h: Hmsc, maxlen: int, budget: Optional[int] = None) -> HmscLanguage:
    """Linearization words of path MSCs with at most ``maxlen`` letters.

    The search walks paths while keeping, per role, the events not yet emitted.
    Queues that outgrow the remaining length are cut, which marks the state as
    unable to yield a maximal word.
    """
    budget = state_budget() if budget is None else budget
    roles = h.roles
    ri = {r: i for i, r in enumerate(roles)}
    n_chan = len(roles) * len(roles)

    def chan_index(e: AsyncEvent) -> int:
        a, b = e.channel
        return ri[a] * len(roles) + ri[b]

    def add(queues: tuple, m: Bmsc, cap: int, dropped: bool) -> tuple[tuple, bool]:
        qs = list(queues)
        for e in m.events:
            r = ri[e.active]
            if len(qs[r]) < cap:
                qs[r] = qs[r] + (e,)
            else:
                dropped = True
        return tuple(qs), dropped

    empty_q = ((),) * len(roles)
    q0, d0 = add(empty_q, h.mu[h.initial], maxlen, False)
    start = (h.initial, q0, (0,) * n_chan, d0)
    maximal: set = set()
    prefixes: set = set()
    seen = {(start, ())}
    stack = [(start, ())]
    while stack:
        state, w = stack.pop()
        v, queues, bal, dropped = state
        prefixes.add(w)
        if v in h.terminals and not dropped and not any(queues):
            maximal.add(w)
        cap = maxlen - len(w)
        succs = []
        if cap > 0:
            for r, q in enumerate(queues):
                if not q:
                    continue
                e = q[0]
                c = chan_index(e)
                if not e.is_send and bal[c] == 0:
                    continue
                nb = list(bal)
                nb[c] += 1 if e.is_send else -1
                qs = list(queues)
                qs[r] = q[1:]
                nd = dropped
                if any(len(x) > cap - 1 for x in qs):
                    qs = [x[: cap - 1] for x in qs]
                    nd = True
                succs.append(((v, tuple(qs), tuple(nb), nd), w + (e,)))
        for u in h.succ[v]:
            qs, nd = add(queues, h.mu[u], cap, dropped)
            succs.append(((u, qs, bal, nd), w))
        for item in succs:
            if item not in seen:
                if len(seen) >= budget:
                    raise BudgetExceeded(f"HMSC language search exceeded {budget} states")
                seen.add(item)
                stack.append(item)
    return HmscLanguage(frozenset(maximal), frozenset(prefixes))


def projected_language(h: Hmsc, p: str, maxlen: int) -> frozenset:
    """Finite words ``w`` restricted to role ``p`` over terminal paths, via a path search."""
    start = (h.initial, tuple(e for e in h.mu[h.initial].events if e.active == p))
    out = set()
    seen = set()
    stack = [start]
    while stack:
        item = stack.pop()
        if item in seen or len(item[1]) > maxlen:
            continue
        seen.add(item)
        v, w = item
        if v in h.terminals:
            out.add(w)
        for u in h.succ[v]:
            stack.append((u, w + tuple(e for e in h.mu[u].events if e.active == p)))
    return frozenset(out)


def erasure_projection(h: Hmsc, p: str) -> Fsm:
    """Chain machines over ``p``'s events per vertex, glued along edges, then normalized."""
    edges: list = []
    for v in h.vertices:
        mine = [e for e in h.mu[v].events if e.active == p]
        if not mine:
            edges.append((("in", v), None, ("out", v)))
            continue
        edges.append((("in", v), None, ("n", v, 0)))
        for i, e in enumerate(mine):
            nxt = ("n", v, i + 1) if i + 1 < len(mine) else ("out", v)
            edges.append((("n", v, i), e, nxt))
    for a, b in h.edges:
        edges.append((("out", a), None, ("in", b)))
    finals = [("out", v) for v in h.terminals]
    raw = from_edges(edges, ("in", h.initial), finals, role=p)
    return normalize(raw)


class HmscMatcher:
    """Word-driven matching against path linearizations of an HMSC.

    A configuration is (vertex, per-role pending events, channel balances,
    dropped flag), as in ``hmsc_bounded_language``; ``step`` walks edges only as
    far as needed to expose the next event of the consuming role.
    """

    def __init__(self, h: Hmsc):
        self.h = h
        self.roles = h.roles
        self.ri = {r: i for i, r in enumerate(self.roles)}
        self.nr = len(self.roles)
        self._memo: dict = {}
        self._first_cache: dict = {}

    def _chan(self, e: AsyncEvent) -> int:
        a, b = e.channel
        return self.ri[a] * self.nr + self.ri[b]

    def _add(self, queues: tuple, m: Bmsc, cap: int, dropped: bool) -> tuple[tuple, bool]:
        qs = list(queues)
        for e in m.events:
            r = self.ri[e.active]
            if len(qs[r]) < cap:
                qs[r] = qs[r] + (e,)
            else:
                dropped = True
        return tuple(qs), dropped

    def start(self, maxlen: int) -> frozenset:
        qs, d = self._add(((),) * self.nr, self.h.mu[self.h.initial], maxlen, False)
        return frozenset({(self.h.initial, qs, (0,) * (self.nr * self.nr), d)})

    def _walk(self, configs: Iterable[tuple], cap: int, role: Optional[int]) -> set:
        """Configurations reachable along edges; a walk stops once ``role`` has a pending event.

        Walking only appends to queues, so a nonempty queue head is final for the
        next step. ``role=None`` walks only through vertices with empty charts.
        """
        seen = set(configs)
        todo = list(seen)
        while todo:
            v, qs, bal, d = todo.pop()
            if role is not None and qs[role]:
                continue
            for u in self.h.succ[v]:
                m = self.h.mu[u]
                if role is None and m.events:
                    continue
                nq, nd = self._add(qs, m, cap, d)
                c = (u, nq, bal, nd)
                if c not in seen:
                    seen.add(c)
                    todo.append(c)
        return seen

    def _firsts(self, r: int) -> dict:
        """Per vertex, the events that can be the next one of role ``r`` once it is entered."""
        got = self._first_cache.get(r)
        if got is not None:
            return got
        role = self.roles[r]
        own = {}
        for v in self.h.vertices:
            own[v] = next((e for e in self.h.mu[v].events if e.active == role), None)
        acc = {v: ({own[v]} if own[v] is not None else set()) for v in self.h.vertices}
        changed = True
        while changed:
            changed = False
            for v in self.h.vertices:
                if own[v] is not None:
                    continue
                before = len(acc[v])
                for u in self.h.succ[v]:
                    acc[v] |= acc[u]
                changed |= len(acc[v]) != before
        got = {v: frozenset(a) for v, a in acc.items()}
        self._first_cache[r] = got
        return got

    def _exposed(self, cfg: tuple, e: AsyncEvent, r: int, remaining: int) -> list:
        """Configurations from ``cfg`` whose pending events for role ``r`` start with ``e``."""
        key = (cfg, e, remaining)
        got = self._memo.get(key)
        if got is not None:
            return got
        firsts = self._firsts(r)
        got = []
        seen = {cfg}
        todo = [cfg]
        while todo:
            v, qs, bal, d = todo.pop()
            if qs[r]:
                if qs[r][0] == e:
                    got.append((v, qs, bal, d))
                continue
            for u in self.h.succ[v]:
                if e not in firsts[u]:
                    continue
                nq, nd = self._add(qs, self.h.mu[u], remaining, d)
                c = (u, nq, bal, nd)
                if c not in seen:
                    seen.add(c)
                    todo.append(c)
        self._memo[key] = got
        return got

    def step(self, configs: Iterable[tuple], e: AsyncEvent, remaining: int) -> frozenset:
        """Consume ``e``; ``remaining`` counts the letters still to come including ``e``."""
        r = self.ri.get(e.active)
        if r is None:
            return frozenset()
        c = self._chan(e)
        if not e.is_send and not any(cfg[2][c] for cfg in configs):
            return frozenset()
        out = set()
        for cfg in configs:
            if not e.is_send and cfg[2][c] == 0:
                continue
            for v, qs, bal, d in self._exposed(cfg, e, r, remaining):
                nb = bal[:c] + (bal[c] + (1 if e.is_send else -1),) + bal[c + 1 :]
                nq = qs[:r] + (qs[r][1:],) + qs[r + 1 :]
                nd = d
                if any(len(x) > remaining - 1 for x in nq):
                    nq = tuple(x[: remaining - 1] for x in nq)
                    nd = True
                out.add((v, nq, nb, nd))
        return frozenset(out)

    def complete(self, configs: Iterable[tuple]) -> bool:
        return any(
            v in self.h.terminals and not d and not any(qs) for v, qs, _, d in self._walk(configs, 0, None)
        )


@dataclass
class Agreement:
    equal: bool
    prefixes: int
    maximal: int
    mismatch: Optional[tuple] = None
    side: str = ""


def compare_bounded(left, right, alphabet: Sequence[AsyncEvent], maxlen: int) -> Agreement:
    """Exact comparison of two word-driven matchers on all words up to ``maxlen``.

    Each matcher offers ``start``, ``step(configs, e, remaining)`` and
    ``complete``. Subtrees reached with the same pair of configuration sets
    and the same channel contents are identical, so they are counted once.
    The result reports word counts and a shortest-first mismatch if any.
    """
    memo: dict = {}
    mismatch: list = []

    def visit(w: tuple, a: frozenset, b: frozenset, chans: tuple) -> tuple[int, int]:
        if bool(a) != bool(b):
            mismatch.append((w, "prefix"))
            return 0, 0
        if not a:
            return 0, 0
        key = (a, b, chans, maxlen - len(w))
        if key in memo:
            return memo[key]
        ca, cb = left.complete(a), right.complete(b)
        if ca != cb:
            mismatch.append((w, "maximal"))
        total, maxi = 1, int(ca)
        if len(w) < maxlen:
            for e in alphabet:
                nch = _advance(chans, e)
                if nch is None:
                    continue
                rem = maxlen - len(w)
                p, m = visit(w + (e,), left.step(a, e, rem), right.step(b, e, rem), nch)
                total += p
                maxi += m
        memo[key] = (total, maxi)
        return total, maxi

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * maxlen + 1000))
    try:
        total, maxi = visit((), left.start(maxlen), right.start(maxlen), ())
    finally:
        sys.setrecursionlimit(limit)
    if mismatch:
        w, side = min(mismatch, key=lambda x: (len(x[0]), x[0]))
        return Agreement(False, total, maxi, w, side)
    return Agreement(True, total, maxi)


def compare_classes(left, right, alphabet: Sequence[AsyncEvent], maxlen: int) -> Agreement:
    """Like ``compare_bounded`` but visits one word per class of equal per-role projections.

    Sound when both languages and their prefix sets are closed under swapping
    adjacent independent events, since then membership is a class property.
    Counts in the result are classes, not words.
    """
    roles = sorted({e.active for e in alphabet})
    ri = {r: i for i, r in enumerate(roles)}
    empty = ((),) * len(roles)
    level = {empty: ((), left.start(maxlen), right.start(maxlen), ())}
    total = maxi = 0
    mismatch = None
    for n in range(maxlen + 1):
        nxt: dict = {}
        for key in sorted(level):
            w, a, b, chans = level[key]
            total += 1
            ca, cb = left.complete(a), right.complete(b)
            maxi += ca
            if ca != cb and mismatch is None:
                mismatch = (w, "maximal")
            if n == maxlen:
                continue
            rem = maxlen - n
            for e in alphabet:
                i = ri[e.active]
                nkey = key[:i] + (key[i] + (e,),) + key[i + 1 :]
                if nkey in nxt:
                    continue
                nch = _advance(chans, e)
                if nch is None:
                    continue
                na, nb = left.step(a, e, rem), right.step(b, e, rem)
                if bool(na) != bool(nb):
                    if mismatch is None or len(mismatch[0]) > n:
                        mismatch = (w + (e,), "prefix")
                    continue
                if na:
                    nxt[nkey] = (w + (e,), na, nb, nch)
        if mismatch is not None:
            break
        level = nxt
    if mismatch:
        return Agreement(False, total, maxi, mismatch[0], mismatch[1])
    return Agreement(True, total, maxi)


def _advance(chans: tuple, e: AsyncEvent):
    d = dict(chans)
    q = d.get(e.channel, ())
    if e.is_send:
        d[e.channel] = q + (e.label,)
    elif not q or q[0] != e.label:
        return None
    elif len(q) > 1:
        d[e.channel] = q[1:]
    else:
        del d[e.channel]
    return tuple(sorted(d.items()))
