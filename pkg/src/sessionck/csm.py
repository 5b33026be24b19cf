"""Communicating state machines over FIFO channels: exploration and verification."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .budget import BudgetExceeded, state_budget
from .automata import Fsm, bounded_traces, build_gaut, build_laut, normalize
from .events import AsyncEvent, format_word, split
from .hmsc import msc_of_word
from .syntax import Term
from .trace import GlobalMatcher

@dataclass(frozen=True)
class Configuration:
    """Local states in role order and channel contents keyed by (sender, receiver)."""

    states: tuple[tuple[str, int], ...]
    channels: tuple[tuple[tuple[str, str], tuple[str, ...]], ...]

    def to_json(self) -> dict:
        return {
            "states": {r: s for r, s in self.states},
            "channels": {f"{a}->{b}": list(q) for (a, b), q in self.channels if q},
        }


class Csm:
    """One deterministic machine per role; machines are normalized on construction."""

    def __init__(self, machines: dict[str, Fsm], normalized: bool = False):
        self.roles = tuple(sorted(machines))
        self.machines = {r: (machines[r] if normalized else normalize(machines[r])) for r in self.roles}
        self.index = {r: i for i, r in enumerate(self.roles)}
        self.channels = tuple((a, b) for a in self.roles for b in self.roles if a != b)
        self.chan_index = {c: i for i, c in enumerate(self.channels)}
        for r, m in self.machines.items():
            for _, x, _ in m.transitions:
                if not isinstance(x, AsyncEvent) or x.active != r or x.peer not in self.index:
                    raise ValueError(f"machine for {r} has foreign letter {x}")

    def initial(self) -> tuple[tuple[int, ...], tuple[tuple[str, ...], ...]]:
        return tuple(self.machines[r].initial for r in self.roles), ((),) * len(self.channels)

    def is_final(self, states: Sequence[int], chans: Sequence[tuple]) -> bool:
        return not any(chans) and all(s in self.machines[r].finals for r, s in zip(self.roles, states))

    def moves(self, states: Sequence[int], chans: Sequence[tuple], bound: Optional[int] = None):
        """Enabled (event, states, chans) moves and whether some send was blocked by ``bound``."""
        out = []
        blocked = False
        for i, r in enumerate(self.roles):
            for x, t in self.machines[r].out[states[i]]:
                c = self.chan_index[x.channel]
                q = chans[c]
                if x.is_send:
                    if bound is not None and len(q) >= bound:
                        blocked = True
                        continue
                    nq = q + (x.label,)
                elif q and q[0] == x.label:
                    nq = q[1:]
                else:
                    continue
                ns = states[:i] + (t,) + states[i + 1 :]
                nc = chans[:c] + (nq,) + chans[c + 1 :]
                out.append((x, ns, nc))
        return out, blocked

    def configuration(self, states: Sequence[int], chans: Sequence[tuple]) -> Configuration:
        return Configuration(tuple(zip(self.roles, states)), tuple(zip(self.channels, chans)))


def replay(c: Csm, w: Sequence[AsyncEvent]) -> Optional[tuple]:
    """Run ``w`` with unbounded channels; returns (states, chans) or None if it gets stuck."""
    states, chans = c.initial()
    for e in w:
        if e.active not in c.index:
            return None
        i = c.index[e.active]
        t = c.machines[e.active].delta(states[i], e)
        if t is None:
            return None
        k = c.chan_index[e.channel]
        q = chans[k]
        if e.is_send:
            q = q + (e.label,)
        elif q and q[0] == e.label:
            q = q[1:]
        else:
            return None
        states = states[:i] + (t,) + states[i + 1 :]
        chans = chans[:k] + (q,) + chans[k + 1 :]
    return states, chans


def accepts(c: Csm, w: Sequence[AsyncEvent]) -> bool:
    end = replay(c, w)
    return end is not None and c.is_final(*end)


@dataclass
class _Class:
    """A ~-class of traces: all words with this tuple of per-role projections."""

    word: tuple
    states: tuple
    chans: tuple
    parent: int
    expanded: bool = False
    blocked: bool = False
    succ: list = field(default_factory=list)


@dataclass(frozen=True)
class Deadlock:
    configuration: Configuration
    trace: tuple

    def to_json(self) -> dict:
        return {"trace": format_word(self.trace), "configuration": self.configuration.to_json()}


@dataclass
class ExploreReport:
    channel_bound: int
    trace_bound: int
    reachable: int
    classes: int
    deadlocks: list[Deadlock]
    bound_limited: list[Configuration]
    maximal_traces: list[tuple]
    graph: list[_Class] = field(repr=False, default_factory=list)

    @property
    def deadlock_free(self) -> bool:
        return not self.deadlocks


def explore(c: Csm, channel_bound: int, trace_bound: int, budget: Optional[int] = None) -> ExploreReport:
    """Breadth-first search over trace classes of length at most ``trace_bound``."""
    if channel_bound < 1 or trace_bound < 0:
        raise ValueError("bounds must be positive")
    budget = state_budget() if budget is None else budget
    states, chans = c.initial()
    nodes = [_Class((), states, chans, -1)]
    index = {((),) * len(c.roles): 0}
    queue = deque([0])
    while queue:
        k = queue.popleft()
        node = nodes[k]
        if len(node.word) >= trace_bound:
            continue
        node.expanded = True
        moves, node.blocked = c.moves(node.states, node.chans, channel_bound)
        key_base = _proj_key(c, node.word)
        for x, ns, nc in moves:
            i = c.index[x.active]
            key = key_base[:i] + (key_base[i] + (x,),) + key_base[i + 1 :]
            j = index.get(key)
            if j is None:
                if len(nodes) >= budget:
                    raise BudgetExceeded(f"exploration exceeded {budget} trace classes")
                j = len(nodes)
                index[key] = j
                nodes.append(_Class(node.word + (x,), ns, nc, k))
                queue.append(j)
            node.succ.append((x, j))
    configs = {}
    deadlocks = {}
    limited = {}
    maximal = []
    for node in nodes:
        cfg = (node.states, node.chans)
        configs.setdefault(cfg, node)
        final = c.is_final(node.states, node.chans)
        if final:
            maximal.append(node.word)
        if node.expanded and not node.succ and not final:
            target = limited if node.blocked else deadlocks
            target.setdefault(cfg, node)
    return ExploreReport(
        channel_bound=channel_bound,
        trace_bound=trace_bound,
        reachable=len(configs),
        classes=len(nodes),
        deadlocks=[Deadlock(c.configuration(*cfg), n.word) for cfg, n in sorted(deadlocks.items(), key=_order)],
        bound_limited=[c.configuration(*cfg) for cfg, _ in sorted(limited.items(), key=_order)],
        maximal_traces=sorted(maximal, key=lambda w: (len(w), w)),
        graph=nodes,
    )


def _order(item):
    cfg, node = item
    return (len(node.word), node.word)


def _proj_key(c: Csm, w: Sequence[AsyncEvent]) -> tuple:
    parts = [[] for _ in c.roles]
    for e in w:
        parts[c.index[e.active]].append(e)
    return tuple(tuple(p) for p in parts)


# ---------------------------------------------------------------- verification


@dataclass(frozen=True)
class Counterexample:
    kind: str  # "prefix", "maximal", "missing", "deadlock", "progress"
    trace: tuple
    configuration: Optional[Configuration] = None

    def describe(self) -> str:
        what = {
            "prefix": "CSM trace is not a prefix of the global language",
            "maximal": "CSM maximal trace is not in the global language",
            "missing": "global trace is not accepted by the CSM",
            "deadlock": "CSM reaches a deadlock",
            "progress": "CSM reaches a configuration that cannot terminate",
        }[self.kind]
        return f"{what}: {format_word(self.trace)}"

    def to_json(self) -> dict:
        out = {"kind": self.kind, "trace": format_word(self.trace)}
        if self.configuration is not None:
            out["configuration"] = self.configuration.to_json()
        return out


@dataclass
class VerifyReport:
    fidelity_fwd: bool
    fidelity_bwd: bool
    deadlock_free: bool
    counterexamples: list[Counterexample]
    explored: ExploreReport
    progress: Optional[bool] = None

    @property
    def ok(self) -> bool:
        return self.fidelity_fwd and self.fidelity_bwd and self.deadlock_free and self.progress is not False


def verify_against(
    c: Csm,
    g: Term,
    channel_bound: int = 2,
    trace_bound: int = 20,
    strict_progress: bool = False,
    budget: Optional[int] = None,
) -> VerifyReport:
    """Bounded protocol fidelity in both directions plus deadlock freedom."""
    gaut = build_gaut(g)
    matcher = GlobalMatcher(gaut, finite_only=False)
    if set(matcher.roles) - set(c.roles):
        raise ValueError("the CSM lacks machines for some roles of the global type")
    rep = explore(c, channel_bound, trace_bound, budget)
    cex: list[Counterexample] = []
    fwd = True
    mconf: list = [None] * len(rep.graph)
    mconf[0] = matcher.start()
    for k, node in enumerate(rep.graph):
        if k:
            parent = mconf[node.parent]
            mconf[k] = matcher.step(parent, node.word[-1], trace_bound - len(node.word) + 1) if parent else frozenset()
        cfg = c.configuration(node.states, node.chans)
        if not mconf[k]:
            if node.parent < 0 or mconf[node.parent]:
                cex.append(Counterexample("prefix", node.word, cfg))
            fwd = False
        elif c.is_final(node.states, node.chans) and not matcher.complete(mconf[k]):
            cex.append(Counterexample("maximal", node.word, cfg))
            fwd = False
    bwd = True
    traces = bounded_traces(gaut, trace_bound // 2)
    for t in sorted(traces.prefixes, key=lambda t: (len(t), t)):
        w = split(t)
        end = replay(c, w)
        if end is None or (t in traces.maximal and not c.is_final(*end)):
            cex.append(Counterexample("missing", w))
            bwd = False
            break
    for d in rep.deadlocks:
        cex.append(Counterexample("deadlock", d.trace, d.configuration))
    progress = _progress(c, rep, cex) if strict_progress else None
    return VerifyReport(fwd, bwd, rep.deadlock_free, cex, rep, progress)


def _progress(c: Csm, rep: ExploreReport, cex: list[Counterexample]) -> bool:
    """Every fully explored class must reach a final class or an unexplored frontier."""
    nodes = rep.graph
    good = [c.is_final(n.states, n.chans) or not n.expanded for n in nodes]
    preds: list[list[int]] = [[] for _ in nodes]
    for k, n in enumerate(nodes):
        for _, j in n.succ:
            preds[j].append(k)
    todo = [k for k, ok in enumerate(good) if ok]
    while todo:
        k = todo.pop()
        for p in preds[k]:
            if not good[p]:
                good[p] = True
                todo.append(p)
    bad = [n for n, ok in zip(nodes, good) if not ok]
    if bad:
        n = min(bad, key=lambda n: (len(n.word), n.word))
        cex.append(Counterexample("progress", n.word, c.configuration(n.states, n.chans)))
    return not bad


def csm_closure_check(c: Csm, sample_bound: int = 12, budget: Optional[int] = None) -> bool:
    """Every reordering of an explored maximal trace within its ~-class is accepted as well."""
    rep = explore(c, sample_bound, sample_bound, budget)
    for w in rep.maximal_traces:
        for u in msc_of_word(w).linearizations():
            if not accepts(c, u):
                return False
    return True


def csm_from_locals(locals_: dict[str, Term]) -> Csm:
    return Csm({r: build_laut(l, r) for r, l in locals_.items()})


def report_json(rep: VerifyReport) -> str:
    return json.dumps(
        {
            "fidelity_fwd": rep.fidelity_fwd,
            "fidelity_bwd": rep.fidelity_bwd,
            "deadlock_free": rep.deadlock_free,
            "progress": rep.progress,
            "counterexamples": [x.to_json() for x in rep.counterexamples],
            "reachable": rep.explored.reachable,
        },
        indent=2,
        sort_keys=True,
    )

