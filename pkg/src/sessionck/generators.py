"""Bundled example corpus, the tile-matching encoding and bounded search for its witnesses."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from importlib import resources
from typing import Iterator, Optional, Sequence

from .automata import build_laut
from .csm import Csm, explore
from .checks import erasure_candidate
from .events import AsyncEvent, format_word
from .hmsc import encode, erasure_projection
from .syntax import Term, parse_global, parse_local
from .trace import approx_key, bounded_language

# ---------------------------------------------------------------- corpus


def ex56(n: int) -> str:
    arms = ["p->q0:m0.q0->r0:m0.r0->s0:m0.0"]
    arms += [f"p->q{i}:m{i}.q{i}->r{i}:m{i}.r{i}->s{i}:m{i}.t" for i in range(1, n + 1)]
    return "mu t.(" + " + ".join(arms) + ")"


def g_tc(n: int) -> str:
    tasks = ".".join(f"p->q{i}:task" for i in range(1, n + 1))
    results = ".".join(f"q{i}->p:result" for i in range(1, n + 1))
    dones = ".".join(f"p->q{i}:done" for i in range(1, n + 1))
    return f"mu t.({tasks}.{results}.t + {dones}.0)"


def _read(name: str) -> str:
    return resources.files("sessionck.corpus").joinpath(name).read_text(encoding="utf-8")


def _names(suffix: str) -> list[str]:
    files = resources.files("sessionck.corpus").iterdir()
    return sorted(f.name[: -len(suffix)] for f in files if f.name.endswith(suffix))


def global_sources() -> dict[str, str]:
    """Fixed-size corpus entries plus instances of the parametric families."""
    out = {name: _read(name + ".gt") for name in _names(".gt") if "." not in name}
    out["EX56_2"] = ex56(2)
    out["G_TC_2"] = g_tc(2)
    return dict(sorted(out.items()))


def local_sources() -> dict[tuple[str, str], str]:
    """Printed local types keyed by (global entry, role)."""
    out = {}
    for stem in _names(".lt"):
        entry, role = stem.rsplit(".", 1)
        out[(entry, role)] = _read(stem + ".lt")
    return out


@dataclass(frozen=True)
class Corpus:
    globals: dict[str, Term]
    locals: dict[tuple[str, str], Term]

    def __getattr__(self, name: str) -> Term:
        try:
            return self.globals[name]
        except KeyError:
            raise AttributeError(name) from None


def corpus() -> Corpus:
    gs = {k: parse_global(v) for k, v in global_sources().items()}
    ls = {k: parse_local(v) for k, v in local_sources().items()}
    return Corpus(gs, ls)


NOTES = {
    "G_TCLog": (
        "a single-state machine for r that loops on log from q1 and from q2 accepts every "
        "word of the closure projected onto r, but also words where the two log counts "
        "differ; no finite machine accepts that projection exactly"
    ),
}


# ---------------------------------------------------------------- tile matching


RESERVED = {"d"}


@dataclass(frozen=True)
class TileInstance:
    u: tuple[str, ...]
    v: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.u or len(self.u) != len(self.v):
            raise ValueError("tile lists must be nonempty and of equal length")
        for word in self.u + self.v:
            if not word:
                raise ValueError("tiles must be nonempty words")
            for ch in word:
                if not ch.isalpha() or not ch.islower() or ch in RESERVED:
                    raise ValueError(f"tile letter {ch!r} must be a lowercase letter other than 'd'")

    @property
    def n(self) -> int:
        return len(self.u)

    @classmethod
    def from_json(cls, text: str) -> "TileInstance":
        data = json.loads(text)
        return cls(tuple(data["u"]), tuple(data["v"]))

    def to_json(self) -> str:
        return json.dumps({"u": list(self.u), "v": list(self.v)})


def _letters(word: str) -> str:
    return "".join(f"q->r:{ch}." for ch in word)


def _half(tiles: Sequence[str], x: str, tail: str) -> str:
    n = len(tiles)
    t = f"t_{x}"
    arms = [f"p->q:i{i}.p->r:i{i}.{_letters(tiles[i - 1])}{t}" for i in range(1, n + 1)]
    arms.append(f"p->q:d.p->r:d.q->r:d.{tail}")
    return f"p->q:c_{x}.p->q:i1.p->r:i1.{_letters(tiles[0])}mu {t}.(" + " + ".join(arms) + ")"


def mpcp_source(t: TileInstance, with_ack: bool = True) -> str:
    tail_u = "r->p:ack_u.0" if with_ack else "0"
    tail_v = "r->p:ack_v.0" if with_ack else "0"
    return "(" + _half(t.u, "u", tail_u) + " + " + _half(t.v, "v", tail_v) + ")"


def gen_mpcp(t: TileInstance) -> Term:
    return parse_global(mpcp_source(t))


def half_source(t: TileInstance, x: str) -> str:
    """The encoding restricted to one tile list, without the acknowledgement."""
    tiles = t.u if x == "u" else t.v
    return _half(tiles, x, "0")


def approx_intersection_witness(t: TileInstance, maxlen: int) -> Optional[tuple[AsyncEvent, ...]]:
    """A word for r common to both halves up to receive reordering, or None within ``maxlen``.

    Both r-machines are run in lockstep over the letters from each sender.
    Per sender, one side may run ahead; the lag records the letters still owed
    by the other side. ``maxlen`` caps, per side, the letters from q before the end marker.
    """
    mu = erasure_projection(encode(parse_global(half_source(t, "u"))), "r")
    mv = erasure_projection(encode(parse_global(half_source(t, "v"))), "r")
    start = (mu.initial, mv.initial, (), (), (), (), (0, 0))
    prev: dict = {start: None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        su, sv, lag_pu, lag_pv, lag_qu, lag_qv, count = state
        if su in mu.finals and sv in mv.finals and not (lag_pu or lag_pv or lag_qu or lag_qv):
            return _rebuild(prev, state)
        for side, m, s in (("u", mu, su), ("v", mv, sv)):
            for x, nxt in m.out[s]:
                own, other = _lags(state, side, x.peer)
                if other:
                    if other[0] != x:
                        continue
                    new_own, new_other = own, other[1:]
                else:
                    new_own, new_other = own + (x,), other
                ncount = count
                if x.peer == "q" and x.label != "d":
                    ncount = (count[0] + 1, count[1]) if side == "u" else (count[0], count[1] + 1)
                if max(ncount) > maxlen:
                    continue
                nstate = _with(state, side, x.peer, nxt, new_own, new_other, ncount)
                if nstate not in prev:
                    prev[nstate] = (state, side, x)
                    queue.append(nstate)
    return None


def _lags(state, side: str, peer: str):
    _, _, pu, pv, qu, qv, _ = state
    u_lag, v_lag = (pu, pv) if peer == "p" else (qu, qv)
    return (u_lag, v_lag) if side == "u" else (v_lag, u_lag)


def _with(state, side, peer, nxt, own, other, count):
    su, sv, pu, pv, qu, qv, _ = state
    if side == "u":
        su = nxt
        u_lag, v_lag = own, other
    else:
        sv = nxt
        u_lag, v_lag = other, own
    if peer == "p":
        pu, pv = u_lag, v_lag
    else:
        qu, qv = u_lag, v_lag
    return (su, sv, pu, pv, qu, qv, count)


def _rebuild(prev: dict, state) -> tuple[AsyncEvent, ...]:
    word = []
    while prev[state] is not None:
        state, side, x = prev[state]
        if side == "u":
            word.append(x)
    return approx_key(tuple(reversed(word)))


def solution_indices(t: TileInstance, witness: Sequence[AsyncEvent]) -> tuple[int, ...]:
    return tuple(int(e.label[1:]) for e in witness if e.peer == "p" and e.label.startswith("i"))


# ---------------------------------------------------------------- refutation up to reordering


@dataclass(frozen=True)
class ApproxEvidence:
    kind: str  # "extra", "missing" or "deadlock"
    trace: tuple

    def describe(self) -> str:
        what = {
            "extra": "CSM trace not related to any global trace",
            "missing": "global trace not related to any CSM trace",
            "deadlock": "CSM deadlock",
        }[self.kind]
        return f"{what}: {format_word(self.trace)}"


def approx_refute(
    g: Term,
    bound: int,
    csm: Optional[Csm] = None,
    channel_bound: Optional[int] = None,
) -> Optional[ApproxEvidence]:
    """Compare receive-reordering classes of bounded traces of ``g`` and of a CSM.

    The CSM defaults to the erasure candidate. None means no violation up to ``bound``.
    """
    c = csm if csm is not None else erasure_candidate(g)
    rep = explore(c, channel_bound or max(bound, 1), bound)
    if rep.deadlocks:
        return ApproxEvidence("deadlock", rep.deadlocks[0].trace)
    target_keys = {}
    for w in bounded_language(g, bound).maximal:
        target_keys.setdefault(approx_key(w), w)
    impl_keys = {}
    for w in rep.maximal_traces:
        impl_keys.setdefault(approx_key(w), w)
    for k in sorted(impl_keys, key=lambda k: (len(k), k)):
        if k not in target_keys:
            return ApproxEvidence("extra", impl_keys[k])
    for k in sorted(target_keys, key=lambda k: (len(k), k)):
        if k not in impl_keys:
            return ApproxEvidence("missing", target_keys[k])
    return None


def bundled_csm(name: str) -> Csm:
    """Erasure candidate with the printed local types of the corpus substituted in."""
    cp = corpus()
    g = cp.globals[name]
    h = encode(g)
    machines = {}
    for p in h.roles:
        l = cp.locals.get((name, p))
        machines[p] = build_laut(l, p) if l is not None else erasure_projection(h, p)
    return Csm(machines)


def random_instances(rng, count: int, max_tiles: int = 3, max_len: int = 3, alphabet: str = "ab") -> Iterator[TileInstance]:
    for _ in range(count):
        n = rng.randint(1, max_tiles)
        u = tuple("".join(rng.choice(alphabet) for _ in range(rng.randint(1, max_len))) for _ in range(n))
        v = tuple("".join(rng.choice(alphabet) for _ in range(rng.randint(1, max_len))) for _ in range(n))
        yield TileInstance(u, v)
