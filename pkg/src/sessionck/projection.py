"""Projection of global types onto roles, parametrised by the merge operator."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Optional

from .syntax import (
    Choice,
    Done,
    External,
    Internal,
    LBranch,
    LocalType,
    Rec,
    Term,
    Var,
    binders,
    children,
    free_vars,
    render,
    rename_free,
    roles,
)


class MergeKind(enum.Enum):
    PLAIN = "plain"
    SEMIFULL = "semifull"
    FULL = "full"

    @property
    def cases(self) -> frozenset[int]:
        return {
            MergeKind.PLAIN: frozenset({1}),
            MergeKind.SEMIFULL: frozenset({1, 2}),
            MergeKind.FULL: frozenset({1, 2, 3}),
        }[self]


class MergeError(Exception):
    """Two local types with no applicable merge case.

    ``case`` is the case that would have applied (2 or 3) but is disabled for
    this merge kind, or ``None`` if no case fits the shapes at all.
    """

    def __init__(self, case: Optional[int], left: LocalType, right: LocalType):
        self.case = case
        self.left = left
        self.right = right
        need = f"case {case} needed" if case else "no merge case applies"
        super().__init__(f"cannot merge {render(left)} and {render(right)}: {need}")


def _single_peer(t: LocalType) -> Optional[str]:
    if isinstance(t, External):
        peers = {b.peer for b in t.branches}
        if len(peers) == 1:
            return next(iter(peers))
    return None


def _fresh(avoid: set[str], base: str) -> str:
    for k in itertools.count(1):
        name = f"{base}_{k}"
        if name not in avoid:
            return name
    raise AssertionError


def _rename_bound(t: LocalType, old: str, new: str) -> LocalType:
    """Rename every binder ``old`` (and its bound occurrences) to ``new``."""
    if isinstance(t, (Done, Var)):
        return t
    if isinstance(t, Rec):
        body = _rename_bound(t.body, old, new)
        if t.var == old:
            return Rec(new, rename_free(body, old, new))
        return Rec(t.var, body)
    return type(t)(tuple(LBranch(b.peer, b.label, _rename_bound(b.cont, old, new)) for b in t.branches))


def canonical(t: LocalType) -> LocalType:
    """Sort every local choice by (peer, label)."""
    if isinstance(t, (Done, Var)):
        return t
    if isinstance(t, Rec):
        return Rec(t.var, canonical(t.body))
    arms = sorted((LBranch(b.peer, b.label, canonical(b.cont)) for b in t.branches), key=lambda b: (b.peer, b.label))
    return type(t)(tuple(arms))


def merge(l1: LocalType, l2: LocalType, kind: MergeKind = MergeKind.FULL) -> LocalType:
    """Partial merge of two local types; raises ``MergeError`` when undefined."""
    if l1 == l2:
        return l1
    peer = _single_peer(l1)
    if peer is not None and peer == _single_peer(l2):
        if 2 not in kind.cases:
            raise MergeError(2, l1, l2)
        right = {b.label: b for b in l2.branches}
        left = {b.label for b in l1.branches}
        only1 = [b for b in l1.branches if b.label not in right]
        both = [LBranch(peer, b.label, merge(b.cont, right[b.label].cont, kind)) for b in l1.branches if b.label in right]
        only2 = [b for b in l2.branches if b.label not in left]
        return External(tuple(only1 + both + only2))
    if isinstance(l1, Rec) and isinstance(l2, Rec):
        if 3 not in kind.cases:
            raise MergeError(3, l1, l2)
        t1, body2 = l1.var, l2.body
        if l2.var != t1:
            if t1 in binders(body2):
                taken = set(binders(l1)) | set(binders(l2)) | free_vars(l1) | free_vars(l2)
                body2 = _rename_bound(body2, t1, _fresh(taken, t1))
            body2 = rename_free(body2, l2.var, t1)
        return Rec(t1, merge(l1.body, body2, kind))
    raise MergeError(None, l1, l2)


def merge_all(types: list[LocalType], kind: MergeKind = MergeKind.FULL) -> LocalType:
    out = types[0]
    for t in types[1:]:
        out = merge(out, t, kind)
    return out


@dataclass(frozen=True)
class Rejection:
    role: str
    path: tuple[int, ...]
    case: Optional[int]
    left: str
    right: str

    def describe(self) -> str:
        where = ".".join(map(str, self.path)) or "root"
        need = f"Case({self.case})-needed" if self.case else "no-merge-case"
        return f"projection onto {self.role} undefined at subterm {where}: {need} merging {self.left} with {self.right}"


@dataclass(frozen=True)
class ProjectionResult:
    role: str
    kind: MergeKind
    local: Optional[LocalType]
    rejection: Optional[Rejection] = None

    @property
    def ok(self) -> bool:
        return self.local is not None


class _Reject(Exception):
    def __init__(self, path: tuple[int, ...], err: MergeError):
        self.path = path
        self.err = err


def _project(g: Term, r: str, kind: MergeKind, sort: bool, path: tuple[int, ...]) -> LocalType:
    if isinstance(g, (Done, Var)):
        return g
    if isinstance(g, Rec):
        body = _project(g.body, r, kind, sort, path + (0,))
        if body == Var(g.var):
            return Done()
        if g.var not in free_vars(body):
            return body
        return Rec(g.var, body)
    if not isinstance(g, Choice):
        raise TypeError("project expects a global type")
    conts = [_project(b.cont, r, kind, sort, path + (i,)) for i, b in enumerate(g.branches)]
    if g.sender == r:
        return Internal(tuple(LBranch(b.receiver, b.label, c) for b, c in zip(g.branches, conts)))
    if all(b.receiver == r for b in g.branches):
        return External(tuple(LBranch(g.sender, b.label, c) for b, c in zip(g.branches, conts)))
    # r is a bystander of at least one arm; arms that reach r contribute a single receive
    parts = [
        External((LBranch(g.sender, b.label, c),)) if b.receiver == r else c for b, c in zip(g.branches, conts)
    ]
    if sort:
        parts = [canonical(p) for p in parts]
    try:
        out = merge_all(parts, kind)
    except MergeError as err:
        raise _Reject(path, err) from None
    return canonical(out) if sort else out


def project(g: Term, r: str, kind: MergeKind = MergeKind.FULL, sort_branches: bool = False) -> ProjectionResult:
    """Project ``g`` onto ``r``; on failure report the choice subterm and the missing case.

    The path lists child positions from the root (a choice's children are its arms).
    """
    try:
        local = _project(g, r, kind, sort_branches, ())
    except _Reject as rej:
        e = rej.err
        return ProjectionResult(r, kind, None, Rejection(r, rej.path, e.case, render(e.left), render(e.right)))
    return ProjectionResult(r, kind, local)


def project_all(g: Term, kind: MergeKind = MergeKind.FULL, sort_branches: bool = False) -> dict[str, ProjectionResult]:
    return {r: project(g, r, kind, sort_branches) for r in roles(g)}


def subterm_at(g: Term, path: tuple[int, ...]) -> Term:
    node = g
    for i in path:
        node = children(node)[i]
    return node


__all__ = [
    "MergeKind",
    "MergeError",
    "merge",
    "merge_all",
    "canonical",
    "project",
    "project_all",
    "ProjectionResult",
    "Rejection",
    "subterm_at",
]
