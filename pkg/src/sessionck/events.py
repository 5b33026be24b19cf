"""Synchronous interactions and asynchronous send/receive events."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

SEND = "!"
RECV = "?"


@dataclass(frozen=True, order=True)
class SyncEvent:
    """An interaction ``sender -> receiver : label``."""

    sender: str
    receiver: str
    label: str
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.sender == self.receiver:
            raise ValueError(f"self-interaction {self.sender}->{self.receiver}")
        object.__setattr__(self, "_hash", hash((self.sender, self.receiver, self.label)))

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return f"{self.sender}->{self.receiver}:{self.label}"

    @classmethod
    def parse(cls, text: str) -> "SyncEvent":
        src, _, rest = text.strip().partition("->")
        dst, _, label = rest.partition(":")
        if not (src and dst and label):
            raise ValueError(f"malformed interaction {text!r}")
        return cls(src.strip(), dst.strip(), label.strip())


@dataclass(frozen=True, order=True)
class AsyncEvent:
    """A send ``active>peer!label`` or a receive ``active<peer?label``."""

    kind: str
    active: str
    peer: str
    label: str
    # derived values cached because events are hashed and inspected in hot loops
    _hash: int = field(init=False, repr=False, compare=False)
    is_send: bool = field(init=False, repr=False, compare=False)
    channel: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in (SEND, RECV):
            raise ValueError(f"bad event kind {self.kind!r}")
        if self.active == self.peer:
            raise ValueError(f"event with active role equal to peer: {self.active}")
        send = self.kind == SEND
        object.__setattr__(self, "is_send", send)
        # the ordered (sender, receiver) channel the event uses
        object.__setattr__(self, "channel", (self.active, self.peer) if send else (self.peer, self.active))
        object.__setattr__(self, "_hash", hash((self.kind, self.active, self.peer, self.label)))

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        if self.is_send:
            return f"{self.active}>{self.peer}!{self.label}"
        return f"{self.active}<{self.peer}?{self.label}"

    @classmethod
    def parse(cls, text: str) -> "AsyncEvent":
        text = text.strip()
        for sep, kind, mark in ((">", SEND, "!"), ("<", RECV, "?")):
            if sep in text and mark in text:
                active, _, rest = text.partition(sep)
                peer, _, label = rest.partition(mark)
                if active and peer and label:
                    return cls(kind, active.strip(), peer.strip(), label.strip())
        raise ValueError(f"malformed event {text!r}")


def snd(p: str, q: str, m: str) -> AsyncEvent:
    return AsyncEvent(SEND, p, q, m)


def rcv(q: str, p: str, m: str) -> AsyncEvent:
    return AsyncEvent(RECV, q, p, m)


Word = tuple  # a tuple of AsyncEvent, or of SyncEvent for interaction words


def format_word(w: Iterable) -> str:
    """Render a word with ``.`` separators; the empty word renders as ``ε``."""
    parts = [str(e) for e in w]
    return ".".join(parts) if parts else "ε"


def parse_word(text: str) -> tuple[AsyncEvent, ...]:
    text = text.strip()
    if text in ("", "ε", "eps"):
        return ()
    return tuple(AsyncEvent.parse(part) for part in text.split("."))


def parse_sync_word(text: str) -> tuple[SyncEvent, ...]:
    text = text.strip()
    if text in ("", "ε", "eps"):
        return ()
    return tuple(SyncEvent.parse(part) for part in text.split("."))


def split(w: Sequence[SyncEvent]) -> tuple[AsyncEvent, ...]:
    """Replace every interaction by its send immediately followed by its receive."""
    out: list[AsyncEvent] = []
    for x in w:
        out.append(snd(x.sender, x.receiver, x.label))
        out.append(rcv(x.receiver, x.sender, x.label))
    return tuple(out)


def roles_of(w: Iterable) -> tuple[str, ...]:
    found: set[str] = set()
    for e in w:
        if isinstance(e, SyncEvent):
            found.update((e.sender, e.receiver))
        else:
            found.update((e.active, e.peer))
    return tuple(sorted(found))


def project_word(w: Iterable[AsyncEvent], role: str) -> tuple[AsyncEvent, ...]:
    """The subsequence of events whose active role is ``role``."""
    return tuple(e for e in w if e.active == role)
