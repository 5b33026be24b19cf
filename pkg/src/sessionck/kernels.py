"""Integer kernels for word equivalence.

Events are integer codes into an :class:`Alphabet`. The kernels compute the
two canonical keys (per-role projections, and the same with receive runs
sorted by sender), enumerate one-step swap neighbours, and run the exhaustive
cross-check of keys against breadth-first search over swaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .events import RECV, SEND, AsyncEvent

KIND_SEND = 0
KIND_RECV = 1


@dataclass(frozen=True)
class Alphabet:
    """Integer encoding of all events over a role and label set."""

    roles: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        events = []
        for kind in (SEND, RECV):
            for a in self.roles:
                for b in self.roles:
                    if a == b:
                        continue
                    for m in self.labels:
                        events.append(AsyncEvent(kind, a, b, m))
        object.__setattr__(self, "events", tuple(events))
        object.__setattr__(self, "code", {e: i for i, e in enumerate(events)})
        ri = {r: i for i, r in enumerate(self.roles)}
        li = {m: i for i, m in enumerate(self.labels)}
        n_roles = len(self.roles)
        kind = np.array([KIND_SEND if e.is_send else KIND_RECV for e in events], dtype=np.int64)
        act = np.array([ri[e.active] for e in events], dtype=np.int64)
        peer = np.array([ri[e.peer] for e in events], dtype=np.int64)
        chan = np.array([ri[e.channel[0]] * n_roles + ri[e.channel[1]] for e in events], dtype=np.int64)
        lab = np.array([li[e.label] for e in events], dtype=np.int64)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "act", act)
        object.__setattr__(self, "peer", peer)
        object.__setattr__(self, "chan", chan)
        object.__setattr__(self, "lab", lab)

    @classmethod
    def of_words(cls, *words) -> "Alphabet":
        roles: set[str] = set()
        labels: set[str] = set()
        for w in words:
            for e in w:
                roles.update((e.active, e.peer))
                labels.add(e.label)
        return cls(tuple(sorted(roles)), tuple(sorted(labels)))

    @property
    def size(self) -> int:
        return len(self.events)

    @property
    def n_roles(self) -> int:
        return len(self.roles)

    @property
    def n_channels(self) -> int:
        return len(self.roles) ** 2

    def encode(self, w) -> np.ndarray:
        return np.array([self.code[e] for e in w], dtype=np.int64)

    def decode(self, codes) -> tuple[AsyncEvent, ...]:
        return tuple(self.events[int(c)] for c in codes)


# ---------------------------------------------------------------- keys


@njit
def sim_key(w, n, act, n_roles, out):
    """Per-role projections laid out role by role."""
    k = 0
    for r in range(n_roles):
        for i in range(n):
            if act[w[i]] == r:
                out[k] = w[i]
                k += 1


@njit
def approx_key(w, n, kind, act, peer, n_roles, out):
    """Per-role projections with every maximal receive run stably sorted by sender."""
    sim_key(w, n, act, n_roles, out)
    i = 0
    while i < n:
        if kind[out[i]] != KIND_RECV:
            i += 1
            continue
        j = i
        while j < n and kind[out[j]] == KIND_RECV and act[out[j]] == act[out[i]]:
            j += 1
        for a in range(i + 1, j):
            x = out[a]
            b = a - 1
            while b >= i and peer[out[b]] > peer[x]:
                out[b + 1] = out[b]
                b -= 1
            out[b + 1] = x
        i = j


# ---------------------------------------------------------------- swaps


@njit
def can_swap(x, y, approx, kind, act, peer, chan, pending):
    """Whether adjacent events ``x.y`` may be exchanged.

    ``pending`` is the number of messages in ``x``'s channel before ``x``.
    """
    if kind[x] == kind[y]:
        if act[x] != act[y]:
            return True
        return approx and kind[x] == KIND_RECV and peer[x] != peer[y]
    if chan[x] == chan[y]:
        # a send and a receive on one channel commute only past a pending message
        return pending > 0
    return act[x] != act[y]


@njit
def swap_neighbors(w, n, approx, kind, act, peer, chan, bal, out):
    """Write every one-step swap of ``w`` into the rows of ``out``; return the count.

    ``bal`` is scratch space of one counter per channel.
    """
    for c in range(bal.shape[0]):
        bal[c] = 0
    count = 0
    for i in range(n - 1):
        x = w[i]
        y = w[i + 1]
        if can_swap(x, y, approx, kind, act, peer, chan, bal[chan[x]]):
            for k in range(n):
                out[count, k] = w[k]
            out[count, i] = y
            out[count, i + 1] = x
            count += 1
        if kind[x] == KIND_SEND:
            bal[chan[x]] += 1
        else:
            bal[chan[x]] -= 1
    return count


@njit
def feasible_codes(w, n, kind, chan, lab, n_channels):
    """FIFO consistency of a coded word."""
    cap = max(n, 1)
    buf = np.zeros((n_channels, cap), dtype=np.int64)
    head = np.zeros(n_channels, dtype=np.int64)
    tail = np.zeros(n_channels, dtype=np.int64)
    for i in range(n):
        c = chan[w[i]]
        if kind[w[i]] == KIND_SEND:
            buf[c, tail[c]] = lab[w[i]]
            tail[c] += 1
        else:
            if head[c] >= tail[c] or buf[c, head[c]] != lab[w[i]]:
                return False
            head[c] += 1
    return True


# ---------------------------------------------------------------- representatives


@njit
def is_sim_rep(w, n, kind, act, chan, n_roles, proj, plen, ptr, bal):
    """True iff ``w`` is the greedy smallest interleaving of its own projections.

    ``proj``, ``plen``, ``ptr`` and ``bal`` are scratch arrays.
    """
    for r in range(n_roles):
        plen[r] = 0
        ptr[r] = 0
    for c in range(bal.shape[0]):
        bal[c] = 0
    for i in range(n):
        r = act[w[i]]
        proj[r, plen[r]] = w[i]
        plen[r] += 1
    for i in range(n):
        best = -1
        for r in range(n_roles):
            if ptr[r] < plen[r]:
                h = proj[r, ptr[r]]
                if kind[h] == KIND_SEND or bal[chan[h]] > 0:
                    if best < 0 or h < best:
                        best = h
        if best != w[i]:
            return False
        ptr[act[best]] += 1
        if kind[best] == KIND_SEND:
            bal[chan[best]] += 1
        else:
            bal[chan[best]] -= 1
    return True


@njit
def is_approx_rep(w, n, kind, act, peer, chan, n_roles, proj, plen, used, first, bal):
    """As ``is_sim_rep`` but receive runs may be consumed in any per-sender order."""
    for r in range(n_roles):
        plen[r] = 0
        first[r] = 0
        for j in range(used.shape[1]):
            used[r, j] = False
    for c in range(bal.shape[0]):
        bal[c] = 0
    for i in range(n):
        r = act[w[i]]
        proj[r, plen[r]] = w[i]
        plen[r] += 1
    for i in range(n):
        best = -1
        best_r = -1
        best_j = -1
        for r in range(n_roles):
            j = first[r]
            if j >= plen[r]:
                continue
            h = proj[r, j]
            if kind[h] == KIND_SEND:
                if best < 0 or h < best:
                    best, best_r, best_j = h, r, j
                continue
            mask = 0
            while j < plen[r] and kind[proj[r, j]] == KIND_RECV:
                if not used[r, j]:
                    h = proj[r, j]
                    bit = 1 << peer[h]
                    if mask & bit == 0:
                        mask |= bit
                        if bal[chan[h]] > 0 and (best < 0 or h < best):
                            best, best_r, best_j = h, r, j
                j += 1
        if best != w[i]:
            return False
        used[best_r, best_j] = True
        while first[best_r] < plen[best_r] and used[best_r, first[best_r]]:
            first[best_r] += 1
        if kind[best] == KIND_SEND:
            bal[chan[best]] += 1
        else:
            bal[chan[best]] -= 1
    return True


# ---------------------------------------------------------------- exhaustive oracle


@njit
def _mix(v):
    v ^= v >> 16
    v *= 0x7FEB352D
    v ^= v >> 15
    v *= 0x846CA68B
    v ^= v >> 16
    return v


@njit
def _pack(w, n, bits):
    v = 0
    for i in range(n):
        v |= w[i] << (bits * i)
    return v


@njit
def _unpack(v, n, bits, out):
    mask = (1 << bits) - 1
    for i in range(n):
        out[i] = (v >> (bits * i)) & mask


@njit
def _bfs_group(w, n, approx, kind, act, peer, chan, n_roles, bits, table, used_slots, queue, stats, scratch):
    """Swap-closure of ``w`` written into ``stats`` as (size, members with another key, sim-not-approx)."""
    size_mask = table.shape[0] - 1
    ref_sim = scratch[0]
    ref_app = scratch[1]
    cur = scratch[2]
    key = scratch[3]
    bal = scratch[4]
    sim_key(w, n, act, n_roles, ref_sim)
    approx_key(w, n, kind, act, peer, n_roles, ref_app)
    n_used = 0
    start = _pack(w, n, bits)
    slot = _mix(start) & size_mask
    while table[slot] != -1:
        slot = (slot + 1) & size_mask
    table[slot] = start
    used_slots[n_used] = slot
    n_used += 1
    qh = 0
    qt = 0
    queue[qt] = start
    qt += 1
    bad_key = 0
    bad_impl = 0
    while qh < qt:
        v = queue[qh]
        qh += 1
        _unpack(v, n, bits, cur)
        if approx:
            approx_key(cur, n, kind, act, peer, n_roles, key)
            for k in range(n):
                if key[k] != ref_app[k]:
                    bad_key += 1
                    break
        else:
            sim_key(cur, n, act, n_roles, key)
            for k in range(n):
                if key[k] != ref_sim[k]:
                    bad_key += 1
                    break
            approx_key(cur, n, kind, act, peer, n_roles, key)
            for k in range(n):
                if key[k] != ref_app[k]:
                    bad_impl += 1
                    break
        for c in range(bal.shape[0]):
            bal[c] = 0
        for i in range(n - 1):
            x = cur[i]
            y = cur[i + 1]
            ok = can_swap(x, y, approx, kind, act, peer, chan, bal[chan[x]])
            if kind[x] == KIND_SEND:
                bal[chan[x]] += 1
            else:
                bal[chan[x]] -= 1
            if not ok:
                continue
            d = x ^ y
            u = v ^ (d << (bits * i)) ^ (d << (bits * (i + 1)))
            slot = _mix(u) & size_mask
            found = False
            while table[slot] != -1:
                if table[slot] == u:
                    found = True
                    break
                slot = (slot + 1) & size_mask
            if not found:
                table[slot] = u
                used_slots[n_used] = slot
                n_used += 1
                queue[qt] = u
                qt += 1
    for k in range(n_used):
        table[used_slots[k]] = -1
    stats[0] = qt
    stats[1] = bad_key
    stats[2] = bad_impl


@njit
def exhaustive_check(kind, act, peer, chan, lab, n_roles, n_events, n, mode=3):
    """Cross-check both keys against swap closures over all feasible words of length ``n``.

    Returns ``[words, sim_reps, sim_total, sim_bad_key, sim_not_approx,
    approx_reps, approx_total, approx_bad_key]``. The keys agree with the swap
    closures exactly when both totals equal ``words`` and all bad counts are 0.
    """
    out = np.zeros(8, dtype=np.int64)
    bits = 1
    while (1 << bits) < n_events:
        bits += 1
    n_channels = n_roles * n_roles
    group_cap = 1
    for k in range(2, n + 1):
        group_cap *= k
    tsize = 16
    while tsize < 2 * group_cap:
        tsize *= 2
    table = np.full(tsize, -1, dtype=np.int64)
    used_slots = np.zeros(group_cap + 1, dtype=np.int64)
    queue = np.zeros(group_cap + 1, dtype=np.int64)
    stats = np.zeros(3, dtype=np.int64)
    cap = max(n, 1)
    scratch = np.zeros((5, max(cap, n_channels)), dtype=np.int64)
    proj = np.zeros((n_roles, cap), dtype=np.int64)
    plen = np.zeros(n_roles, dtype=np.int64)
    ptr = np.zeros(n_roles, dtype=np.int64)
    rbal = np.zeros(n_channels, dtype=np.int64)
    used = np.zeros((n_roles, cap), dtype=np.bool_)
    buf = np.zeros((n_channels, cap), dtype=np.int64)
    head = np.zeros(n_channels, dtype=np.int64)
    tail = np.zeros(n_channels, dtype=np.int64)
    w = np.zeros(cap, dtype=np.int64)
    nxt = np.zeros(cap + 1, dtype=np.int64)
    d = 0
    while True:
        if d == n:
            out[0] += 1
            # the approximate greedy word is a sim-greedy word of its own projections
            if is_sim_rep(w, n, kind, act, chan, n_roles, proj, plen, ptr, rbal):
                out[1] += 1
                if mode & 1:
                    _bfs_group(w, n, False, kind, act, peer, chan, n_roles, bits, table, used_slots, queue, stats, scratch)
                    out[2] += stats[0]
                    out[3] += stats[1]
                    out[4] += stats[2]
                if is_approx_rep(w, n, kind, act, peer, chan, n_roles, proj, plen, used, ptr, rbal):
                    out[5] += 1
                    if mode & 2:
                        _bfs_group(w, n, True, kind, act, peer, chan, n_roles, bits, table, used_slots, queue, stats, scratch)
                        out[6] += stats[0]
                        out[7] += stats[1]
            if n == 0:
                break
            d -= 1
            e = w[d]
            c = chan[e]
            if kind[e] == KIND_SEND:
                tail[c] -= 1
            else:
                head[c] -= 1
            continue
        placed = False
        while nxt[d] < n_events:
            e = nxt[d]
            nxt[d] += 1
            c = chan[e]
            if kind[e] == KIND_SEND:
                buf[c, tail[c]] = lab[e]
                tail[c] += 1
            elif head[c] < tail[c] and buf[c, head[c]] == lab[e]:
                head[c] += 1
            else:
                continue
            w[d] = e
            placed = True
            break
        if placed:
            d += 1
            nxt[d] = 0
            continue
        if d == 0:
            break
        d -= 1
        e = w[d]
        c = chan[e]
        if kind[e] == KIND_SEND:
            tail[c] -= 1
        else:
            head[c] -= 1
    return out


@njit
def count_feasible(kind, chan, lab, n_roles, n_events, n):
    """Number of feasible words of length ``n``."""
    n_channels = n_roles * n_roles
    cap = max(n, 1)
    buf = np.zeros((n_channels, cap), dtype=np.int64)
    head = np.zeros(n_channels, dtype=np.int64)
    tail = np.zeros(n_channels, dtype=np.int64)
    w = np.zeros(cap, dtype=np.int64)
    nxt = np.zeros(cap + 1, dtype=np.int64)
    total = 0
    d = 0
    while True:
        if d == n:
            total += 1
            if n == 0:
                break
            d -= 1
            e = w[d]
            if kind[e] == KIND_SEND:
                tail[chan[e]] -= 1
            else:
                head[chan[e]] -= 1
            continue
        placed = False
        while nxt[d] < n_events:
            e = nxt[d]
            nxt[d] += 1
            c = chan[e]
            if kind[e] == KIND_SEND:
                buf[c, tail[c]] = lab[e]
                tail[c] += 1
            elif head[c] < tail[c] and buf[c, head[c]] == lab[e]:
                head[c] += 1
            else:
                continue
            w[d] = e
            placed = True
            break
        if placed:
            d += 1
            nxt[d] = 0
            continue
        if d == 0:
            break
        d -= 1
        e = w[d]
        if kind[e] == KIND_SEND:
            tail[chan[e]] -= 1
        else:
            head[chan[e]] -= 1
    return total


@dataclass(frozen=True)
class ExhaustiveResult:
    length: int
    words: int
    sim_reps: int
    sim_total: int
    sim_bad_key: int
    sim_not_approx: int
    approx_reps: int
    approx_total: int
    approx_bad_key: int

    @property
    def agrees(self) -> bool:
        return (
            self.sim_total == self.words
            and self.approx_total == self.words
            and self.sim_bad_key == 0
            and self.approx_bad_key == 0
            and self.sim_not_approx == 0
        )


def run_exhaustive(n_roles: int, n_labels: int, length: int) -> ExhaustiveResult:
    """Exhaustive key-versus-swap-closure check for words of exactly ``length`` events."""
    roles = tuple(chr(ord("p") + i) for i in range(n_roles))
    labels = tuple(f"m{i}" for i in range(n_labels))
    a = Alphabet(roles, labels)
    if length * math.ceil(math.log2(max(a.size, 2))) > 62:
        raise ValueError("word too long to pack into 64 bits")
    raw = exhaustive_check(a.kind, a.act, a.peer, a.chan, a.lab, a.n_roles, a.size, length)
    return ExhaustiveResult(length, *(int(x) for x in raw))
