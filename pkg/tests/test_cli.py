import json
from importlib import resources

import pytest

from sessionck.cli import BUDGET, OK, REJECTED, USAGE, main


def corpus_path(name: str) -> str:
    return str(resources.files("sessionck.corpus").joinpath(name))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_all_on_positive_entry(capsys):
    code, out, _ = run(capsys, "check", corpus_path("G_2BP.gt"))
    assert code == OK
    assert out.splitlines()[0].startswith("wf")


def test_check_reports_witnesses(capsys):
    code, out, _ = run(capsys, "--json", "check", corpus_path("NONGC.gt"))
    assert code == REJECTED
    data = json.loads(out)
    assert data["gc"]["ok"] is False and "{p,q}" in data["gc"]["detail"]
    assert data["local"]["detail"].startswith("segment p->q:m1.r->s:m2")


def test_json_flag_after_subcommand(capsys):
    code, out, _ = run(capsys, "check", corpus_path("EX58.gt"), "--which", "iclosed", "--json")
    assert code == REJECTED
    assert set(json.loads(out)) == {"iclosed"}


def test_project_rejection(capsys):
    code, out, _ = run(capsys, "project", corpus_path("EX38.gt"), "--role", "r", "--merge", "plain")
    assert code == REJECTED
    assert "Case(2)-needed" in out


def test_project_success(capsys):
    code, out, _ = run(capsys, "--json", "project", corpus_path("EX39.gt"), "--role", "r", "--merge", "semifull")
    assert code == OK
    assert json.loads(out)["r"]["local"] == "mu t.(q?l.0 (&) q?m.0 (&) q?r.t)"


def test_project_unknown_role(capsys):
    code, _, err = run(capsys, "project", corpus_path("EX38.gt"), "--role", "zz")
    assert code == USAGE and "zz" in err


def test_implement_with_dot(capsys, tmp_path):
    target = tmp_path / "out.dot"
    code, out, _ = run(capsys, "implement", corpus_path("G_2BP.gt"), "--dot", str(target))
    assert code == OK
    assert target.read_text().count("digraph") == 3
    assert "s:" in out


def test_verify_and_decide(capsys):
    code, out, _ = run(capsys, "verify", corpus_path("EX38.gt"), "--depth", "10", "--from-projection", "semifull")
    assert code == OK and "deadlock free: True" in out
    code, out, _ = run(capsys, "--json", "decide", corpus_path("EX66.gt"), "--bound", "1", "--depth", "10")
    assert code == REJECTED
    data = json.loads(out)
    assert data["verdict"] == "RefutedNotImplementable"
    assert data["witness"]["trace"] == "p>q!r.p>r!m.r<p?m"


def test_verify_from_unprojectable(capsys):
    code, out, _ = run(capsys, "verify", corpus_path("EX311.gt"), "--from-projection", "full")
    assert code == REJECTED and "no-merge-case" in out


def test_decide_positive(capsys):
    code, out, _ = run(capsys, "decide", corpus_path("G_2BP.gt"), "--depth", "12")
    assert code == OK and out.startswith("VerifiedUpToBound")


def test_equiv(capsys, tmp_path):
    a = tmp_path / "a.lt"
    b = tmp_path / "b.lt"
    a.write_text("mu t.(q?l.0 (&) q?r.t)")
    b.write_text("(q?l.0 (&) q?r.mu t.(q?l.0 (&) q?r.t))")
    code, out, _ = run(capsys, "equiv", str(a), str(b), "--role", "r")
    assert code == OK and out.strip() == "equivalent"
    b.write_text("q?l.0")
    code, out, _ = run(capsys, "equiv", str(a), str(b), "--role", "r")
    assert code == REJECTED and "r<q?r.r<q?l" in out


def test_equiv_global_against_local(capsys, tmp_path):
    a = tmp_path / "a.lt"
    a.write_text("q?l.0")
    code, _, err = run(capsys, "equiv", corpus_path("EX38.gt"), str(a))
    assert code == USAGE and "cannot compare" in err


def test_encode(capsys):
    code, out, _ = run(capsys, "encode", corpus_path("EX58.gt"))
    assert code == OK and "vertices" in json.loads(out)
    code, out, _ = run(capsys, "encode", corpus_path("EX58.gt"), "--dot", "-")
    assert out.startswith("digraph")


def test_gen_mpcp_inline_and_file(capsys, tmp_path):
    code, out, _ = run(capsys, "gen-mpcp", '{"u": ["ab"], "v": ["ba"]}', "--witness", "12")
    assert code == OK and "no common word" in out
    f = tmp_path / "t.json"
    f.write_text('{"u": ["ab", "b"], "v": ["a", "bb"]}')
    code, out, _ = run(capsys, "--json", "gen-mpcp", str(f), "--witness", "12")
    assert code == REJECTED
    assert json.loads(out)["witness"].startswith("r<p?i1.r<p?i2")


def test_gen_mpcp_invalid(capsys):
    code, _, err = run(capsys, "gen-mpcp", '{"u": ["ad"], "v": ["a"]}')
    assert code == USAGE and "invalid tile instance" in err


def test_corpus_listing(capsys):
    code, out, _ = run(capsys, "--json", "corpus")
    assert code == OK
    data = json.loads(out)
    assert "note" in data["G_TCLog"] and "EX56_2" in data


def test_usage_errors(capsys):
    assert run(capsys, "check", "/nonexistent.gt")[0] == USAGE
    assert run(capsys, "frobnicate")[0] == USAGE
    assert run(capsys)[0] == USAGE


def test_parse_error_exit_code(capsys, tmp_path):
    f = tmp_path / "bad.gt"
    f.write_text("p->q:")
    code, _, err = run(capsys, "check", str(f))
    assert code == USAGE and err.startswith("error: 1:")


def test_budget_exit_code(capsys, monkeypatch):
    monkeypatch.setenv("SESSIONCK_BUDGET", "5")
    code, _, err = run(capsys, "decide", corpus_path("G_2BP.gt"))
    assert code == BUDGET and "budget" in err


@pytest.mark.slow
def test_corpus_run_all(capsys):
    code, out, _ = run(capsys, "corpus", "--run-all", "--depth", "10")
    assert code == OK
    lines = {line.split()[0]: line for line in out.splitlines() if not line.startswith(" ")}
    assert "NotGloballyCooperative" in lines["NONGC"]
    assert "NotZeroReachable" in lines["EX420"]
