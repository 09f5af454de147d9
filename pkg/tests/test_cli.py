import csv
import json

import pytest

from heapguard.cli import main

from conftest import data_path


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_text(capsys):
    code, out, _ = run(capsys, "analyze", data_path("fig1.sir"), "--domain", "all")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "m [deep] conditional: pc=low & lev(b)=low & reach(b)=low & (lev(i)=low | !freach(b,a))"
    assert lines[1] == "m [shal] conditional: pc=low & lev(b)=low & lev(i)=low & reach(b)=low"
    assert lines[-1].startswith("summary: 3 records; secure-always 0, insecure-always 0, conditional 3")


def test_analyze_sorted_by_method(capsys):
    code, out, _ = run(capsys, "analyze", data_path("fig1.sir"), data_path("f.sir"))
    assert [l.split()[0] for l in out.splitlines()[:2]] == ["f", "m"]


def test_analyze_deterministic(capsys, tmp_path):
    a = run(capsys, "analyze", data_path("fig1.sir"), "--domain", "all", "--format", "dnf")[1]
    b = run(capsys, "analyze", data_path("fig1.sir"), "--domain", "all", "--format", "dnf")[1]
    strip = lambda s: [l for l in s.splitlines() if not l.startswith("summary")]
    assert strip(a) == strip(b)


def test_json_report_and_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", data_path("fig1.sir"), "--domain", "all", "--format", "json",
                       "--csv", str(tmp_path / "a.csv"))
    assert code == 0
    recs = [json.loads(l) for l in out.splitlines()]
    assert [r["domain"] for r in recs] == ["deep", "shal", "dumb"]
    assert recs[0]["refcount"] == 3
    rows = list(csv.reader(open(tmp_path / "a.csv")))
    assert rows[0] == ["method", "domain", "refcount", "statebits", "millis", "class"]
    assert rows[1][:4] == ["m", "deep", "3", "18"]
    (tmp_path / "r.jsonl").write_text(out)
    code, out, _ = run(capsys, "report", str(tmp_path / "r.jsonl"), "--format", "json")
    assert code == 0 and json.loads(out)["classification"]["conditional"] == 3


def test_jobs_gives_same_output(capsys):
    a = run(capsys, "analyze", data_path("fig1.sir"), data_path("f.sir"), "--domain", "all")[1]
    b = run(capsys, "analyze", data_path("fig1.sir"), data_path("f.sir"), "--domain", "all", "--jobs", "2")[1]
    strip = lambda s: [l for l in s.splitlines() if not l.startswith("summary")]
    assert strip(a) == strip(b)


def test_validate(capsys):
    code, out, _ = run(capsys, "validate", data_path("fig1.sir"), "--domain", "all")
    assert code == 0
    assert "valid" in out and "deep=18 shal=14 dumb=12" in out


def test_input_errors(capsys, tmp_path):
    p = tmp_path / "dup.sir"
    p.write_text("method g() { local int x; L: x = 1; L: x = 2; }")
    code, _, err = run(capsys, "analyze", str(p))
    assert code == 2 and "duplicate label" in err
    p.write_text("""method z(int a) { local int x;
      if (a > 0) goto B; A: x = 1; if (x > 0) goto B; goto E;
      B: x = 2; if (x > 1) goto A; E: output low(x); }""")
    code, _, err = run(capsys, "analyze", str(p))
    assert code == 2 and "irreducible" in err
    code, _, err = run(capsys, "validate", str(p))
    assert code == 2
    code, _, _ = run(capsys, "analyze", str(tmp_path / "missing.sir"))
    assert code == 2
    code, _, _ = run(capsys, "analyze", data_path("fig1.sir"), "--timeout", "0")
    assert code == 2


def test_missing_stub(capsys, tmp_path):
    p = tmp_path / "c.sir"
    p.write_text("class A { int f; } method g(A a) { a.foo(); }")
    code, _, err = run(capsys, "analyze", str(p))
    assert code == 3 and "no summary" in err
    code, out, _ = run(capsys, "analyze", str(p), "--assume-worst")
    assert code == 0
    s = tmp_path / "s.json"
    s.write_text(json.dumps({"A.foo()": {"guard": "lev(this) = low"}}))
    code, out, _ = run(capsys, "analyze", str(p), "--stubs", str(s))
    assert code == 0 and "lev(a)=low" in out
    s.write_text("{bad")
    code, _, _ = run(capsys, "analyze", str(p), "--stubs", str(s))
    assert code == 2


def test_interrupted_reported(capsys):
    code, out, _ = run(capsys, "analyze", data_path("fig1.sir"), "--node-cap", "1")
    assert code == 0
    assert "insecure-always: false (interrupted)" in out
    assert "interrupted 1" in out


def test_xcheck_exit_codes(capsys, tmp_path):
    code, out, _ = run(capsys, "xcheck", "--suite", "inductive", "--domain", "deep", "--refs", "1")
    assert code == 0 and "pass" in out
    code, out, _ = run(capsys, "xcheck", "--suite", "inductive", "--domain", "deep", "--refs", "2")
    assert code == 1 and "FAIL" in out
    code, out, _ = run(capsys, "xcheck", "--suite", "ni", "--program", data_path("f.sir"),
                       "--trials", "50", "--override-tt")
    assert code == 1
    code, out, _ = run(capsys, "xcheck", "--suite", "ni", "--program", data_path("f.sir"),
                       "--trials", "50", "--json", str(tmp_path / "x.json"))
    assert code == 0
    assert json.load(open(tmp_path / "x.json"))[0]["check"] == "noninterference"
    code, out, _ = run(capsys, "xcheck", "--suite", "abstraction", "--trials", "100", "--hardened")
    assert code == 0
