"""Command-line front end: ``sessionck <command> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .automata import build_gaut, build_laut, language_equiv, normalize
from .checks import (
    decide,
    erasure_candidate,
    globally_cooperative,
    i_closed,
    is_local,
    zero_reachable,
)
from .budget import BudgetExceeded
from .csm import csm_from_locals, report_json, verify_against
from .events import format_word
from .generators import NOTES, TileInstance, approx_intersection_witness, corpus, gen_mpcp
from .hmsc import encode
from .projection import MergeKind, project
from .syntax import ParseError, parse_global, parse_local, render, roles, well_formed

OK, REJECTED, USAGE, BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror}") from None


def _global(path: str):
    return parse_global(_read(path))


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _write_dot(path: str, dot: str) -> None:
    if path == "-":
        sys.stdout.write(dot)
    else:
        Path(path).write_text(dot, encoding="utf-8")


# ---------------------------------------------------------------- commands


def cmd_check(args) -> int:
    g = _global(args.file)
    which = ["wf", "zero", "iclosed", "gc", "local"] if args.which == "all" else [args.which]
    results = {}
    lines = []
    for name in which:
        if name == "wf":
            rep = well_formed(g)
            ok, detail = rep.ok, f"choice={rep.choice_class.value}"
        elif name == "zero":
            res = zero_reachable(g)
            ok, detail = res.ok, f"stuck vertex {res.witness}" if not res.ok else ""
        elif name == "iclosed":
            res = i_closed(g)
            detail = f"pair checks {res.stats['pair_checks']}"
            if not res.ok:
                detail = f"independent pair ({res.witness[0]}, {res.witness[1]})"
            ok = res.ok
        elif name == "gc":
            res = globally_cooperative(g)
            ok = res.ok
            detail = res.witness.describe(encode(g)) if not ok else f"role splits {res.stats['subsets_checked']}"
        else:
            res = is_local(g)
            ok = res.ok
            detail = f"segment {format_word(res.witness)} has several minimal events" if not ok else ""
        results[name] = {"ok": ok, "detail": detail}
        lines.append(f"{name:8} {'yes' if ok else 'no':3} {detail}".rstrip())
    _emit(args, results, "\n".join(lines))
    return OK if all(r["ok"] for r in results.values()) else REJECTED


def cmd_project(args) -> int:
    g = _global(args.file)
    kind = MergeKind(args.merge)
    targets = [args.role] if args.role else list(roles(g))
    if args.role and args.role not in roles(g):
        raise UsageError(f"role {args.role} does not occur in the global type")
    payload = {}
    lines = []
    status = OK
    for r in targets:
        res = project(g, r, kind, args.sort_branches)
        if res.ok:
            payload[r] = {"local": render(res.local)}
            lines.append(f"{r}: {render(res.local)}")
        else:
            status = REJECTED
            rej = res.rejection
            payload[r] = {"rejected": rej.describe(), "path": list(rej.path), "case": rej.case}
            lines.append(f"{r}: {rej.describe()}")
    _emit(args, payload, "\n".join(lines))
    return status


def cmd_implement(args) -> int:
    g = _global(args.file)
    c = erasure_candidate(g)
    if args.dot:
        dot = "".join(c.machines[r].to_dot(f"A_{r}") for r in c.roles)
        _write_dot(args.dot, dot)
    payload = {r: _machine_json(c.machines[r]) for r in c.roles}
    text = "\n".join(
        f"{r}: {len(m.states)} states, {len(m.transitions)} transitions" for r, m in c.machines.items()
    )
    _emit(args, payload, text)
    return OK


def _machine_json(m) -> dict:
    return {
        "initial": m.initial,
        "finals": sorted(m.finals),
        "transitions": [[a, str(x), b] for a, x, b in m.transitions],
    }


def cmd_verify(args) -> int:
    g = _global(args.file)
    if args.from_projection:
        kind = MergeKind(args.from_projection)
        locals_ = {}
        for r in roles(g):
            res = project(g, r, kind, args.sort_branches)
            if not res.ok:
                print(res.rejection.describe())
                return REJECTED
            locals_[r] = res.local
        c = csm_from_locals(locals_)
    else:
        c = erasure_candidate(g)
    rep = verify_against(c, g, args.bound, args.depth, args.strict_progress)
    if args.json:
        print(report_json(rep))
    else:
        print(f"fidelity (CSM within global): {rep.fidelity_fwd}")
        print(f"fidelity (global within CSM): {rep.fidelity_bwd}")
        print(f"deadlock free: {rep.deadlock_free}")
        if rep.progress is not None:
            print(f"progress: {rep.progress}")
        for x in rep.counterexamples[:5]:
            print(f"  {x.describe()}")
    return OK if rep.ok else REJECTED


def cmd_decide(args) -> int:
    g = _global(args.file)
    v = decide(g, args.bound, args.depth, args.strict_progress)
    if args.json:
        print(v.dumps())
    else:
        print(f"{v.name} (channel bound {args.bound}, trace bound {args.depth})")
        w = v.witness_json()
        if w is not None:
            print(f"  witness: {json.dumps(w, sort_keys=True)}")
    return OK if v.positive else REJECTED


def _load_any(path: str, role: Optional[str]):
    text = _read(path)
    try:
        return build_gaut(parse_global(text))
    except ParseError as first:
        try:
            local = parse_local(text)
        except ParseError:
            raise first from None
        return build_laut(local, role or "self")


def cmd_equiv(args) -> int:
    a = normalize(_load_any(args.file1, args.role))
    b = normalize(_load_any(args.file2, args.role))
    if (a.role is None) != (b.role is None):
        raise UsageError("cannot compare a global type with a local type")
    same, witness = language_equiv(a, b)
    payload = {"equivalent": same, "witness": None if witness is None else format_word(witness)}
    text = "equivalent" if same else f"not equivalent, distinguishing word {format_word(witness)}"
    _emit(args, payload, text)
    return OK if same else REJECTED


def cmd_encode(args) -> int:
    h = encode(_global(args.file))
    if args.dot:
        _write_dot(args.dot, h.to_dot())
    if args.json or not args.dot:
        print(h.to_json())
    return OK


def cmd_gen_mpcp(args) -> int:
    source = args.instance
    text = _read(source) if os.path.exists(source) else source
    try:
        t = TileInstance.from_json(text)
    except (ValueError, KeyError, TypeError) as err:
        raise UsageError(f"invalid tile instance: {err}") from None
    g = gen_mpcp(t)
    payload = {"global": render(g)}
    lines = [render(g)]
    status = OK
    if args.witness is not None:
        w = approx_intersection_witness(t, args.witness)
        payload["witness"] = None if w is None else format_word(w)
        lines.append("no common word for r" if w is None else f"common word for r: {format_word(w)}")
        status = OK if w is None else REJECTED
    _emit(args, payload, "\n".join(lines))
    return status


def cmd_corpus(args) -> int:
    cp = corpus()
    payload = {}
    lines = []
    for name, g in cp.globals.items():
        entry = {"source": render(g)}
        if args.run_all:
            v = decide(g, args.bound, args.depth)
            entry.update(
                zero=zero_reachable(g).ok,
                gc=globally_cooperative(g).ok,
                iclosed=i_closed(g).ok,
                local=is_local(g).ok,
                verdict=v.name,
            )
            lines.append(
                f"{name:10} zero={entry['zero']!s:5} gc={entry['gc']!s:5} iclosed={entry['iclosed']!s:5} "
                f"local={entry['local']!s:5} {v.name}"
            )
        else:
            lines.append(f"{name:10} {entry['source']}")
        if name in NOTES:
            entry["note"] = NOTES[name]
            lines.append(f"{'':10} note: {NOTES[name]}")
        payload[name] = entry
    _emit(args, payload, "\n".join(lines))
    return OK


# ---------------------------------------------------------------- parser


def _bounds(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bound", type=int, default=2, help="channel bound (default 2)")
    p.add_argument("--depth", type=int, default=20, help="trace length bound (default 20)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sessionck", description="Implementability checks for asynchronous multiparty session types."
    )
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run classification checks")
    p.add_argument("file")
    p.add_argument("--which", choices=["all", "wf", "zero", "iclosed", "gc", "local"], default="all")
    p.set_defaults(run=cmd_check)

    p = sub.add_parser("project", help="project onto roles")
    p.add_argument("file")
    p.add_argument("--role")
    p.add_argument("--merge", choices=[k.value for k in MergeKind], default="full")
    p.add_argument("--sort-branches", action="store_true", help="sort choice branches before merging")
    p.set_defaults(run=cmd_project)

    p = sub.add_parser("implement", help="emit the erasure candidate")
    p.add_argument("file")
    p.add_argument("--dot", help="write DOT to this path ('-' for stdout)")
    p.set_defaults(run=cmd_implement)

    p = sub.add_parser("verify", help="bounded verification of a candidate CSM")
    p.add_argument("file")
    _bounds(p)
    p.add_argument("--strict-progress", action="store_true")
    p.add_argument("--from-projection", choices=[k.value for k in MergeKind], help="verify projected local types")
    p.add_argument("--sort-branches", action="store_true")
    p.set_defaults(run=cmd_verify)

    p = sub.add_parser("decide", help="bounded implementability decision")
    p.add_argument("file")
    _bounds(p)
    p.add_argument("--strict-progress", action="store_true")
    p.set_defaults(run=cmd_decide)

    p = sub.add_parser("equiv", help="language equivalence of two types")
    p.add_argument("file1")
    p.add_argument("file2")
    p.add_argument("--role", help="role that local types belong to")
    p.set_defaults(run=cmd_equiv)

    p = sub.add_parser("encode", help="HMSC encoding as JSON or DOT")
    p.add_argument("file")
    p.add_argument("--dot", help="write DOT to this path ('-' for stdout)")
    p.set_defaults(run=cmd_encode)

    p = sub.add_parser("gen-mpcp", help="encode a tile instance")
    p.add_argument("instance", help="JSON file or inline JSON like '{\"u\": [\"ab\"], \"v\": [\"a\"]}'")
    p.add_argument("--witness", type=int, metavar="MAXLEN", help="search a common r-word up to MAXLEN letters")
    p.set_defaults(run=cmd_gen_mpcp)

    p = sub.add_parser("corpus", help="list or check the bundled examples")
    p.add_argument("--run-all", action="store_true")
    _bounds(p)
    p.set_defaults(run=cmd_corpus)

    # allow --json after the subcommand as well
    for action in sub.choices.values():
        action.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else OK
    try:
        return args.run(args)
    except (ParseError, UsageError) as err:
        print(f"error: {err}", file=sys.stderr)
        return USAGE
    except BudgetExceeded as err:
        print(f"budget exhausted: {err}", file=sys.stderr)
        return BUDGET


if __name__ == "__main__":
    sys.exit(main())
