"""Global and local type syntax: AST, parser, renderer and well-formedness.

Concrete grammar::

    G  ::= "0" | "mu" ID "." G | ID | B | "(" B ("+" B)+ ")"
    B  ::= ID "->" ID ":" ID "." G
    L  ::= "0" | "mu" ID "." L | ID | LB | "(" LB (("(+)" | "(&)") LB)+ ")"
    LB ::= ID ("!" | "?") ID "." L

``#`` starts a comment. The parser also accepts ``μ``, ``→``, ``⊕``, a bare
``&`` or ``+`` between local branches, and a parenthesised single branch.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Union


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Done:
    def __str__(self) -> str:
        return "0"


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Rec:
    var: str
    body: "Term"

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class Branch:
    """One arm ``sender->receiver:label.cont`` of a global choice."""

    receiver: str
    label: str
    cont: "GlobalType"


@dataclass(frozen=True)
class Choice:
    sender: str
    branches: tuple[Branch, ...]

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class LBranch:
    """One arm ``peer!label.cont`` or ``peer?label.cont`` of a local choice."""

    peer: str
    label: str
    cont: "LocalType"


@dataclass(frozen=True)
class Internal:
    branches: tuple[LBranch, ...]

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class External:
    branches: tuple[LBranch, ...]

    def __str__(self) -> str:
        return render(self)


GlobalType = Union[Done, Var, Rec, Choice]
LocalType = Union[Done, Var, Rec, Internal, External]
Term = Union[Done, Var, Rec, Choice, Internal, External]


def choice(sender: str, *arms: tuple[str, str, "GlobalType"]) -> Choice:
    return Choice(sender, tuple(Branch(q, m, g) for q, m, g in arms))


def internal(*arms: tuple[str, str, "LocalType"]) -> Internal:
    return Internal(tuple(LBranch(q, m, l) for q, m, l in arms))


def external(*arms: tuple[str, str, "LocalType"]) -> External:
    return External(tuple(LBranch(q, m, l) for q, m, l in arms))


def children(t: Term) -> tuple[Term, ...]:
    if isinstance(t, Rec):
        return (t.body,)
    if isinstance(t, (Choice, Internal, External)):
        return tuple(b.cont for b in t.branches)
    return ()


def subterms(t: Term) -> list[Term]:
    """Preorder list of subterm occurrences; list positions are the indices."""
    out: list[Term] = []
    stack = [t]
    while stack:
        node = stack.pop()
        out.append(node)
        stack.extend(reversed(children(node)))
    return out


def indexed(t: Term) -> tuple[list[Term], list[tuple[int, ...]]]:
    """Preorder subterms together with the child indices of every subterm."""
    nodes: list[Term] = []
    kids: list[tuple[int, ...]] = []

    def visit(node: Term) -> int:
        k = len(nodes)
        nodes.append(node)
        kids.append(())
        kids[k] = tuple(visit(c) for c in children(node))
        return k

    visit(t)
    return nodes, kids


def roles(t: Term) -> tuple[str, ...]:
    found: set[str] = set()
    for node in subterms(t):
        if isinstance(node, Choice):
            found.add(node.sender)
            found.update(b.receiver for b in node.branches)
        elif isinstance(node, (Internal, External)):
            found.update(b.peer for b in node.branches)
    return tuple(sorted(found))


def free_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, Rec):
        return free_vars(t.body) - {t.var}
    out: frozenset[str] = frozenset()
    for c in children(t):
        out |= free_vars(c)
    return out


def binders(t: Term) -> list[str]:
    return [n.var for n in subterms(t) if isinstance(n, Rec)]


def rename_free(t: Term, old: str, new: str) -> Term:
    """Replace free occurrences of variable ``old`` by ``new``."""
    if isinstance(t, Var):
        return Var(new) if t.name == old else t
    if isinstance(t, Done):
        return t
    if isinstance(t, Rec):
        if t.var == old:
            return t
        return Rec(t.var, rename_free(t.body, old, new))
    if isinstance(t, Choice):
        return Choice(t.sender, tuple(Branch(b.receiver, b.label, rename_free(b.cont, old, new)) for b in t.branches))
    return type(t)(tuple(LBranch(b.peer, b.label, rename_free(b.cont, old, new)) for b in t.branches))


# ---------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<iplus>\(\+\)|⊕)
  | (?P<iamp>\(&\))
  | (?P<arrow>->|→)
  | (?P<mu>μ)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<zero>0)
  | (?P<sym>[().:+&!?])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ws":
            pass
        elif kind == "id" and tok == "mu" or kind == "mu":
            toks.append(_Tok("mu", tok, line, col))
        elif kind == "sym":
            toks.append(_Tok(tok, tok, line, col))
        else:
            toks.append(_Tok(kind, tok, line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.i = 0
        self.scope: list[str] = []
        self.seen: set[str] = set()

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, message: str, tok: _Tok | None = None):
        tok = tok or self.cur
        raise ParseError(message, tok.line, tok.col)

    def expect(self, kind: str) -> _Tok:
        tok = self.cur
        if tok.kind != kind:
            shown = tok.text or "end of input"
            self.fail(f"expected {kind!r}, found {shown!r}")
        self.i += 1
        return tok

    def finish(self) -> None:
        if self.cur.kind != "eof":
            self.fail(f"unexpected {self.cur.text!r} after term")

    def binder(self) -> str:
        self.expect("mu")
        tok = self.expect("id")
        if tok.text in self.seen:
            self.fail(f"duplicate binder {tok.text!r}", tok)
        self.seen.add(tok.text)
        self.expect(".")
        return tok.text

    def var(self) -> Var:
        tok = self.expect("id")
        if tok.text not in self.scope:
            self.fail(f"unbound variable {tok.text!r}", tok)
        return Var(tok.text)

    # global types

    def global_type(self) -> GlobalType:
        tok = self.cur
        if tok.kind == "zero":
            self.i += 1
            return Done()
        if tok.kind == "mu":
            var = self.binder()
            self.scope.append(var)
            body = self.global_type()
            self.scope.pop()
            return Rec(var, body)
        if tok.kind == "id":
            if self.peek().kind == "arrow":
                sender, arm = self.global_branch()
                return Choice(sender, (arm,))
            return self.var()
        if tok.kind == "(":
            self.i += 1
            sender, arm = self.global_branch()
            arms = [arm]
            while self.cur.kind == "+":
                self.i += 1
                other = self.cur
                s, arm = self.global_branch()
                if s != sender:
                    self.fail(f"choice mixes senders {sender!r} and {s!r}", other)
                arms.append(arm)
            self.expect(")")
            return Choice(sender, tuple(arms))
        self.fail(f"unexpected {tok.text or 'end of input'!r}")

    def global_branch(self) -> tuple[str, Branch]:
        src = self.expect("id")
        self.expect("arrow")
        dst = self.expect("id")
        if src.text == dst.text:
            self.fail(f"role {src.text!r} sends to itself", src)
        self.expect(":")
        label = self.expect("id")
        self.expect(".")
        return src.text, Branch(dst.text, label.text, self.global_type())

    # local types

    def local_type(self) -> LocalType:
        tok = self.cur
        if tok.kind == "zero":
            self.i += 1
            return Done()
        if tok.kind == "mu":
            var = self.binder()
            self.scope.append(var)
            body = self.local_type()
            self.scope.pop()
            return Rec(var, body)
        if tok.kind == "id":
            if self.peek().kind in ("!", "?"):
                kind, arm = self.local_branch()
                return (Internal if kind == "!" else External)((arm,))
            return self.var()
        if tok.kind == "(":
            self.i += 1
            kind, arm = self.local_branch()
            arms = [arm]
            want = ("iplus", "+") if kind == "!" else ("iamp", "&")
            while self.cur.kind in ("iplus", "+", "iamp", "&"):
                if self.cur.kind not in want:
                    self.fail("separator does not match the branch polarity")
                self.i += 1
                other = self.cur
                k2, arm = self.local_branch()
                if k2 != kind:
                    self.fail("choice mixes sends and receives", other)
                arms.append(arm)
            self.expect(")")
            return (Internal if kind == "!" else External)(tuple(arms))
        self.fail(f"unexpected {tok.text or 'end of input'!r}")

    def local_branch(self) -> tuple[str, LBranch]:
        peer = self.expect("id")
        mark = self.cur
        if mark.kind not in ("!", "?"):
            self.fail("expected '!' or '?'")
        self.i += 1
        label = self.expect("id")
        self.expect(".")
        return mark.kind, LBranch(peer.text, label.text, self.local_type())


def parse_global(text: str) -> GlobalType:
    p = _Parser(text)
    g = p.global_type()
    p.finish()
    return g


def parse_local(text: str) -> LocalType:
    p = _Parser(text)
    l = p.local_type()
    p.finish()
    return l


# ---------------------------------------------------------------- render


def render(t: Term) -> str:
    """Concrete syntax accepted by ``parse_global``/``parse_local``."""
    if isinstance(t, Done):
        return "0"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Rec):
        return f"mu {t.var}.{render(t.body)}"
    if isinstance(t, Choice):
        arms = [f"{t.sender}->{b.receiver}:{b.label}.{render(b.cont)}" for b in t.branches]
        return arms[0] if len(arms) == 1 else "(" + " + ".join(arms) + ")"
    mark, sep = ("!", " (+) ") if isinstance(t, Internal) else ("?", " (&) ")
    arms = [f"{b.peer}{mark}{b.label}.{render(b.cont)}" for b in t.branches]
    return arms[0] if len(arms) == 1 else "(" + sep.join(arms) + ")"


# ---------------------------------------------------------------- well-formedness


class ChoiceClass(enum.Enum):
    DIRECTED = "directed"
    SENDER_DRIVEN = "sender-driven"


@dataclass(frozen=True)
class WellFormedReport:
    guarded: bool
    unique_choices: bool
    distinct_bound_vars: bool
    all_bound: bool
    no_self_interaction: bool
    choice_class: ChoiceClass

    @property
    def ok(self) -> bool:
        return (
            self.guarded
            and self.unique_choices
            and self.distinct_bound_vars
            and self.all_bound
            and self.no_self_interaction
        )


def _guarded(t: Term, pending: frozenset[str]) -> bool:
    # pending: binders not yet separated from this point by an interaction
    if isinstance(t, Var):
        return t.name not in pending
    if isinstance(t, Done):
        return True
    if isinstance(t, Rec):
        return _guarded(t.body, pending | {t.var})
    return all(_guarded(b.cont, frozenset()) for b in t.branches)


def well_formed(t: Term) -> WellFormedReport:
    """Check the structural conditions on a global or local type."""
    nodes = subterms(t)
    unique = True
    directed = True
    self_free = True
    for node in nodes:
        if isinstance(node, Choice):
            keys = [(b.receiver, b.label) for b in node.branches]
            unique &= len(set(keys)) == len(keys)
            directed &= len({b.receiver for b in node.branches}) == 1
            self_free &= all(b.receiver != node.sender for b in node.branches)
        elif isinstance(node, (Internal, External)):
            keys = [(b.peer, b.label) for b in node.branches]
            unique &= len(set(keys)) == len(keys)
            directed &= len({b.peer for b in node.branches}) == 1
    names = binders(t)
    return WellFormedReport(
        guarded=_guarded(t, frozenset()),
        unique_choices=unique,
        distinct_bound_vars=len(set(names)) == len(names),
        all_bound=not free_vars(t),
        no_self_interaction=self_free,
        choice_class=ChoiceClass.DIRECTED if directed else ChoiceClass.SENDER_DRIVEN,
    )
