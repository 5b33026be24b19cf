"""Asynchronous words: feasibility, the swap relations and their keys, and membership."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .automata import Fsm, build_gaut
from .budget import BudgetExceeded, state_budget
from .events import AsyncEvent, format_word, roles_of, split
from .syntax import Term

__all__ = [
    "Rel",
    "Mode",
    "InducedStructure",
    "Matching",
    "GlobalMatcher",
    "InfeasibleWord",
    "split",
    "feasible",
    "swap_neighbors",
    "swap_closure",
    "sim_key",
    "approx_key",
    "sim_equiv",
    "approx_equiv",
    "matched_pairs",
    "induced_structure",
    "membership",
    "bounded_language",
    "BoundedLanguage",
    "projections",
]


class Rel(enum.Enum):
    SIM = "sim"
    APPROX = "approx"


class Mode(enum.Enum):
    PREFIX = "prefix"
    COMPLETE = "complete"


class InfeasibleWord(ValueError):
    pass


def feasible(w: Sequence[AsyncEvent]) -> bool:
    """Every receive reads the oldest pending message on its channel."""
    chans: dict[tuple[str, str], deque] = {}
    for e in w:
        q = chans.setdefault(e.channel, deque())
        if e.is_send:
            q.append(e.label)
        elif not q or q.popleft() != e.label:
            return False
    return True


def _require_feasible(*words) -> None:
    for w in words:
        if not feasible(w):
            raise InfeasibleWord(f"infeasible word {format_word(w)}")


@lru_cache(maxsize=256)
def _alphabet(roles: tuple[str, ...], labels: tuple[str, ...]) -> kernels.Alphabet:
    return kernels.Alphabet(roles, labels)


def _alphabet_of(*words) -> kernels.Alphabet:
    a = kernels.Alphabet.of_words(*words)
    return _alphabet(a.roles, a.labels)


def swap_neighbors(w: Sequence[AsyncEvent], rel: Rel = Rel.SIM) -> set[tuple[AsyncEvent, ...]]:
    """All words one swap-rule step away from ``w``."""
    w = tuple(w)
    _require_feasible(w)
    if len(w) < 2:
        return set()
    a = _alphabet_of(w)
    codes = a.encode(w)
    out = np.zeros((len(w) - 1, len(w)), dtype=np.int64)
    bal = np.zeros(a.n_channels, dtype=np.int64)
    n = kernels.swap_neighbors(codes, len(w), rel is Rel.APPROX, a.kind, a.act, a.peer, a.chan, bal, out)
    return {a.decode(out[i]) for i in range(n)}


def swap_closure(w: Sequence[AsyncEvent], rel: Rel = Rel.SIM, limit: int = 1_000_000) -> set[tuple]:
    """Breadth-first closure of ``w`` under swap steps (the reference for the keys)."""
    start = tuple(w)
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for u in swap_neighbors(cur, rel):
            if u not in seen:
                if len(seen) >= limit:
                    raise RuntimeError("swap closure exceeded its limit")
                seen.add(u)
                queue.append(u)
    return seen


def _key(w: Sequence[AsyncEvent], approx: bool) -> tuple[AsyncEvent, ...]:
    w = tuple(w)
    if not w:
        return ()
    a = _alphabet_of(w)
    codes = a.encode(w)
    out = np.zeros(len(w), dtype=np.int64)
    if approx:
        kernels.approx_key(codes, len(w), a.kind, a.act, a.peer, a.n_roles, out)
    else:
        kernels.sim_key(codes, len(w), a.act, a.n_roles, out)
    return a.decode(out)


def sim_key(w: Sequence[AsyncEvent]) -> tuple[AsyncEvent, ...]:
    """Per-role projections, concatenated in role order."""
    return _key(w, False)


def approx_key(w: Sequence[AsyncEvent]) -> tuple[AsyncEvent, ...]:
    """Per-role projections with each maximal receive run grouped by sender."""
    return _key(w, True)


def sim_equiv(w: Sequence[AsyncEvent], u: Sequence[AsyncEvent]) -> bool:
    _require_feasible(w, u)
    return sim_key(w) == sim_key(u)


def approx_equiv(w: Sequence[AsyncEvent], u: Sequence[AsyncEvent]) -> bool:
    _require_feasible(w, u)
    return approx_key(w) == approx_key(u)


def projections(w: Iterable[AsyncEvent], roles: Sequence[str] | None = None) -> dict[str, tuple[AsyncEvent, ...]]:
    w = tuple(w)
    roles = tuple(roles) if roles is not None else roles_of(w)
    out: dict[str, list[AsyncEvent]] = {r: [] for r in roles}
    for e in w:
        out.setdefault(e.active, []).append(e)
    return {r: tuple(v) for r, v in out.items()}


@dataclass(frozen=True)
class Matching:
    """FIFO matching as 0-based (send index, receive index) pairs."""

    pairs: tuple[tuple[int, int], ...]
    unmatched: tuple[int, ...]

    @property
    def perfect(self) -> bool:
        return not self.unmatched


def matched_pairs(w: Sequence[AsyncEvent]) -> Matching:
    _require_feasible(w)
    pending: dict[tuple[str, str], deque] = {}
    pairs = []
    for i, e in enumerate(w):
        q = pending.setdefault(e.channel, deque())
        if e.is_send:
            q.append(i)
        else:
            pairs.append((q.popleft(), i))
    unmatched = sorted(i for q in pending.values() for i in q)
    return Matching(tuple(sorted(pairs)), tuple(unmatched))


@dataclass(frozen=True)
class InducedStructure:
    """Per-role projections plus the FIFO matching in per-role coordinates.

    A position is (role, index within that role's projection), so the structure
    does not depend on how the roles' events are interleaved.
    """

    projections: tuple[tuple[str, tuple[AsyncEvent, ...]], ...]
    pairs: tuple[tuple[tuple[str, int], tuple[str, int]], ...]
    unmatched: tuple[tuple[str, int], ...]


def induced_structure(w: Sequence[AsyncEvent]) -> InducedStructure:
    w = tuple(w)
    m = matched_pairs(w)
    local = []
    seen: dict[str, int] = {}
    for e in w:
        local.append((e.active, seen.get(e.active, 0)))
        seen[e.active] = local[-1][1] + 1
    proj = projections(w)
    return InducedStructure(
        tuple(sorted(proj.items())),
        tuple(sorted((local[s], local[r]) for s, r in m.pairs)),
        tuple(sorted(local[i] for i in m.unmatched)),
    )


# ---------------------------------------------------------------- membership


Config = tuple  # (gaut state, per-role pending queues, dropped)


class GlobalMatcher:
    """Incremental matching of words against the semantics of a global type.

    A configuration holds a state of the global automaton together with, per
    role, the events that the automaton has already produced but the word has
    not yet consumed. Queues longer than the number of letters still to come
    are truncated and the configuration is marked as having dropped events.
    """

    def __init__(self, g: Term | Fsm, finite_only: bool = True):
        self.aut = g if isinstance(g, Fsm) else build_gaut(g)
        found = set()
        for x in self.aut.letters:
            found.update((x.sender, x.receiver))
        self.roles = tuple(sorted(found))
        self.index = {r: i for i, r in enumerate(self.roles)}
        self.finite_only = finite_only
        self.live = self.aut.coreachable if finite_only else frozenset(self.aut.states)
        self.final_closure = frozenset(s for s in self.aut.states if self.aut.closure((s,)) & self.aut.finals)
        events = set()
        for x in self.aut.letters:
            events.update(split((x,)))
        self.alphabet = tuple(sorted(events))
        self._memo: dict = {}
        self._first_cache: dict = {}

    def start(self, maxlen: Optional[int] = None) -> frozenset:
        """Initial configurations; ``maxlen`` is accepted for parity with ``HmscMatcher``."""
        empty = ((),) * len(self.roles)
        if self.aut.initial not in self.live:
            return frozenset()
        return frozenset({(self.aut.initial, empty, False)})

    def _truncate(self, queues: tuple, dropped: bool, cap: int) -> tuple[tuple, bool]:
        if any(len(q) > cap for q in queues):
            return tuple(q[:cap] for q in queues), True
        return queues, dropped

    def _firsts(self, p: int) -> dict[int, frozenset]:
        """Per state, the events that can be the next one of role ``p`` from there."""
        got = self._first_cache.get(p)
        if got is not None:
            return got
        role = self.roles[p]
        acc = {s: set() for s in self.aut.states}
        changed = True
        while changed:
            changed = False
            for s in self.aut.states:
                before = len(acc[s])
                for x, t in self.aut.out[s]:
                    if t not in self.live:
                        continue
                    if x is not None and role in (x.sender, x.receiver):
                        acc[s].update(ev for ev in split((x,)) if ev.active == role)
                    else:
                        acc[s] |= acc[t]
                changed |= len(acc[s]) != before
        got = {s: frozenset(a) for s, a in acc.items()}
        self._first_cache[p] = got
        return got

    def _exposed(self, config: Config, e: AsyncEvent, p: int, remaining: int) -> list:
        """Configurations from ``config`` whose pending events for role ``p`` start with ``e``.

        The automaton is advanced only while ``p`` has nothing pending, and only
        towards states from which ``e`` can be the next event of ``p``.
        """
        key = (config, e, remaining)
        got = self._memo.get(key)
        if got is not None:
            return got
        firsts = self._firsts(p)
        got = []
        seen = set()
        todo = [config]
        while todo:
            c = todo.pop()
            if c in seen:
                continue
            seen.add(c)
            state, queues, dropped = c
            if queues[p]:
                if queues[p][0] == e:
                    got.append(c)
                continue
            for x, t in self.aut.out[state]:
                if t not in self.live:
                    continue
                if x is None:
                    if e in firsts[t]:
                        todo.append((t, queues, dropped))
                    continue
                if self.roles[p] not in (x.sender, x.receiver) and e not in firsts[t]:
                    continue
                qs = list(queues)
                d = dropped
                for ev in split((x,)):
                    r = self.index[ev.active]
                    if len(qs[r]) < remaining:
                        qs[r] = qs[r] + (ev,)
                    else:
                        d = True
                todo.append((t, tuple(qs), d))
        self._memo[key] = got
        return got

    def step(self, configs: Iterable[Config], e: AsyncEvent, remaining: int) -> frozenset:
        """Consume ``e`` where ``remaining`` counts the letters still to come including ``e``."""
        p = self.index.get(e.active)
        if p is None:
            return frozenset()
        out = set()
        for c in configs:
            for state, queues, dropped in self._exposed(c, e, p, remaining):
                qs = queues[:p] + (queues[p][1:],) + queues[p + 1 :]
                out.add((state, *self._truncate(qs, dropped, remaining - 1)))
        return frozenset(out)

    def complete(self, configs: Iterable[Config]) -> bool:
        return any(
            not dropped and not any(queues) and state in self.final_closure
            for state, queues, dropped in configs
        )

    def run(self, w: Sequence[AsyncEvent], budget: Optional[int] = None) -> frozenset:
        configs = self.start()
        budget = len(w) if budget is None else budget
        for i, e in enumerate(w):
            if not configs:
                break
            configs = self.step(configs, e, budget - i)
        return configs


def membership(
    w: Sequence[AsyncEvent],
    g: Term | Fsm | GlobalMatcher,
    mode: Mode = Mode.COMPLETE,
    finite_only: bool = True,
) -> bool:
    """Whether ``w`` belongs to (``COMPLETE``) or prefixes (``PREFIX``) the language of ``g``.

    With ``finite_only`` (the default) only finite maximal words count; otherwise
    prefixes of infinite words are accepted in prefix mode as well.
    """
    w = tuple(w)
    _require_feasible(w)
    m = g if isinstance(g, GlobalMatcher) else GlobalMatcher(g, finite_only)
    configs = m.run(w)
    if mode is Mode.COMPLETE:
        return m.complete(configs)
    return bool(configs)


@dataclass(frozen=True)
class BoundedLanguage:
    maximal: frozenset
    prefixes: frozenset


def bounded_language(
    g: Term | Fsm, maxlen: int, finite_only: bool = True, budget: Optional[int] = None
) -> BoundedLanguage:
    """All words of length at most ``maxlen`` in, or prefixing, the language of ``g``."""
    budget = state_budget() if budget is None else budget
    m = GlobalMatcher(g, finite_only)
    maximal: set = set()
    prefixes: set = set()
    start = m.start()
    if not start:
        return BoundedLanguage(frozenset(), frozenset())
    stack: list = [((), start, ())]
    while stack:
        w, configs, chans = stack.pop()
        prefixes.add(w)
        if len(prefixes) > budget:
            raise BudgetExceeded(f"bounded language exceeded {budget} words")
        if m.complete(configs):
            maximal.add(w)
        if len(w) >= maxlen:
            continue
        for e in m.alphabet:
            nchans = _advance_channels(chans, e)
            if nchans is None:
                continue
            nxt = m.step(configs, e, maxlen - len(w))
            if nxt:
                stack.append((w + (e,), nxt, nchans))
    return BoundedLanguage(frozenset(maximal), frozenset(prefixes))


def _advance_channels(chans: tuple, e: AsyncEvent):
    """Channel contents after ``e`` (a sorted tuple of (channel, labels)), or None if blocked."""
    d = dict(chans)
    q = d.get(e.channel, ())
    if e.is_send:
        d[e.channel] = q + (e.label,)
    else:
        if not q or q[0] != e.label:
            return None
        q = q[1:]
        if q:
            d[e.channel] = q
        else:
            d.pop(e.channel, None)
    return tuple(sorted(d.items()))
