import json

import pytest

from heapguard.bdd import AssignmentSet, VarSpace
from heapguard.corpus import corpus
from heapguard.encoder import (
    HR, MODE, NB, NJB, OMEGA, PC, Encoder, MissingSummary, Scfg, StubError, encode_method,
    load_summaries, parse_formula, validate_scfg,
)
from heapguard.heap import lev_name
from heapguard.sir import TIf, load_program

from conftest import data_path


def test_fig1_locations_and_invariant(fig1):
    s, inv = encode_method(fig1.method("m"), "deep")
    assert s.locations == [(i, NJB) for i in range(5)]
    sp = s.space
    assert inv[(3, NJB)] == ~(sp.var(PC) | sp.var("lev(b)") | sp.var("reach(b)"))
    assert set(inv) == {(3, NJB)}
    assert validate_scfg(s).ok


def test_f_locations(f_prog):
    s, inv = encode_method(f_prog.method("f"), "deep")
    # the junction (the low output) gets both modes
    assert (3, NB) in s.locations and (3, NJB) in s.locations
    assert len(s.locations) == 6
    assert inv[(3, NB)] == ~(s.space.var(PC) | s.space.var("lev(l)"))
    assert validate_scfg(s).ok


def test_x0(fig1):
    s, _ = encode_method(fig1.method("m"), "deep")
    sp = s.space
    b = sp.cube_binding(s.x0)
    assert b[MODE] is False
    assert b[lev_name("r")] is False and b["lev(r)"] is False
    assert b["alias(b,r)"] is False
    assert all(b[n] is False for n in s.inst.heap_vars(1))
    assert "pc" not in b and "lev(a)" not in b


@pytest.mark.parametrize("domain", ["deep", "shal", "dumb"])
def test_corpus_validates_and_obeys_structure(domain):
    for src, tp in corpus(11, count=15):
        m = tp.methods[0]
        s, _ = encode_method(m, domain)
        rep = validate_scfg(s)
        assert rep.ok, rep.violations
        _structure(s, m)


def _assigns(T, sp, name):
    return any(k == name or k in sp.bits_of([name]) for k in T.targets()) if sp.has(name) else False


def _structure(s, m):
    sp = s.space
    ua = sp.var(MODE)
    hr_bits = set(sp.bits_of([HR]))
    junctions = set(s.cdrs.junc_inv)
    for (i, psi) in s.locations:
        if psi == NB:
            assert i in junctions
    for l, ts in s.trans.items():
        i, psi = l
        for g, T, t in ts:
            touches = T.targets() & ({PC} | hr_bits)
            if touches and not (g & ua).is_false():
                # only End-ua resets pc/hr while in upgrade mode
                assert T.get(MODE) is not None and T.get(MODE).is_false()
            if _assigns(T, sp, HR) and (i < len(m.body) and isinstance(m.body[i], TIf)):
                assert (g & ua).is_false() and (g & sp.var(PC)).is_false()
        plain = i == s.cfg.exit or not isinstance(m.body[i], TIf)
        if plain and i not in junctions:
            assert len(ts) == 1 and ts[0][0].is_true()


def test_high_output_has_no_invariant():
    tp = load_program("method h(int x) { output high(x); }")
    s, inv = encode_method(tp.method("h"), "deep")
    assert all(p.is_true() for p in inv.values())


def test_pstore_level_receiver_join():
    tp = load_program("class A { int x; } method p(A a, int v) { a.x = v; }")
    m = tp.method("p")
    e = Encoder(m, "deep")
    T = e.assign_effect(m.body[0])
    sp = e.space
    # r.fp = e raises reach(a) by [lev(v)] only
    want = sp.var("reach(a)") | (sp.var(MODE).ite(sp.ff, sp.var("lev(v)")) | sp.var(PC))
    assert T.get("reach(a)") == want
    e2 = Encoder(m, "deep", receiver_level=True)
    T2 = e2.assign_effect(m.body[0])
    sp2 = e2.space
    assert not T2.get("reach(a)").implies(sp2.var("lev(a)") | sp2.var("reach(a)") | sp2.var(PC)
                                         | sp2.var("lev(v)")).is_false()
    assert sp2.var("lev(a)").implies(T2.get("reach(a)") | sp2.var(MODE)).is_true()


def test_ref_equality_level():
    tp = load_program("class A { int x; } method q(A a, A b) { local bool t; t = a == b; }")
    m = tp.method("q")
    e = Encoder(m, "deep")
    T = e.assign_effect(m.body[0])
    sp = e.space
    assert sp.cofactor(T.get("lev(t)"), ~sp.var(MODE) & ~sp.var(PC)) == sp.var("lev(a)") | sp.var("lev(b)")


def _toy(trans):
    sp = VarSpace()
    sp.add_bool(OMEGA)
    x = sp.add_bool("x")
    return sp, x


def test_validate_reports_nondeterminism():
    sp, x = _toy(None)
    s = Scfg(sp, ["a"], {"a": [(sp.tt, AssignmentSet(sp), "a"), (sp.tt, AssignmentSet(sp), "a")]},
             "a", sp.tt, [OMEGA], {})
    rep = validate_scfg(s)
    assert not rep.ok and "overlap" in rep.violations[0]


def test_validate_reports_nonreactive():
    sp, x = _toy(None)
    s = Scfg(sp, ["a"], {"a": [(sp.var(OMEGA), AssignmentSet(sp), "a")]}, "a", sp.tt, [OMEGA], {})
    rep = validate_scfg(s)
    assert not rep.ok and "reactive" in rep.violations[0]


# -- summaries ----------------------------------------------------------------------

CALLER = """class A { int x; A n; }
method c(A a, A b, int v) { a.set(b, v); output low(v); }"""

STUBS = {
    "A.set(A o, int w)": {
        "guard": "join(pc, lev(w)) <= lev(this)",
        "effect": ["reach(this) := join(reach(this), lev(w))",
                   "freach(this, o) := true"],
    }
}


def test_stub_formula_parser():
    f = parse_formula("ite(alias(a, b), lev(x), low) = high & !pc")
    assert f[0] == "and"
    with pytest.raises(StubError):
        parse_formula("lev(x) $ low")


def test_call_contract():
    m = load_program(CALLER).method("c")
    s, inv = encode_method(m, "deep", load_summaries(STUBS))
    sp = s.space
    pc_call = sp.var(PC) | sp.var("lev(a)")
    assert inv[(0, NJB)] == (pc_call | sp.var("lev(v)")).implies(sp.var("lev(a)"))
    T = s.trans[(0, NJB)][0][1]
    assert T.get("reach(a)") == sp.var("reach(a)") | sp.var("lev(v)")
    assert T.get("freach(a,b)").is_true()
    assert validate_scfg(s).ok


def test_stub_errors(tmp_path):
    with pytest.raises(StubError):
        load_summaries({"A.set(A o)": {"guard": "lev(zz) = low"}})
    with pytest.raises(StubError):
        load_summaries({"nonsense": {}})
    with pytest.raises(StubError):
        load_summaries({"A.set()": {"effect": ["lev(this) = low"]}})
    p = tmp_path / "s.json"
    p.write_text("{ not json")
    with pytest.raises(StubError):
        load_summaries(str(p))
    p.write_text(json.dumps(STUBS))
    assert len(load_summaries(str(p))) == 1


def test_missing_summary_and_assume_worst():
    m = load_program(CALLER).method("c")
    with pytest.raises(MissingSummary):
        encode_method(m, "deep")
    s, inv = encode_method(m, "deep", assume_worst=True)
    T = s.trans[(0, NJB)][0][1]
    assert T.get("reach(a)").is_true() and T.get("reach(b)").is_true()
    for rel in ("alias(a,b)", "freach(a,b)", "freach(b,a)", "freach(a,a)"):
        assert T.get(rel).is_true()
    assert set(inv) == {(1, NJB)}


def test_virtual_dispatch_conjoins():
    src = """class A { int x; } class B extends A { }
    method c(A a, int v) { a.go(v); }"""
    m = load_program(src).method("c")
    stubs = load_summaries({"A.go(int w)": {"guard": "lev(w) = low"},
                            "B.go(int w)": {"guard": "pc = low"}})
    s, inv = encode_method(m, "deep", stubs)
    sp = s.space
    assert inv[(0, NJB)] == ~sp.var("lev(v)") & ~(sp.var(PC) | sp.var("lev(a)"))


def test_inherited_summary_used():
    src = """class A { int x; } class B extends A { }
    method c(B b, int v) { b.go(v); }"""
    m = load_program(src).method("c")
    s, inv = encode_method(m, "deep", load_summaries({"A.go(int w)": {"guard": "lev(w) = low"}}))
    assert inv[(0, NJB)] == ~s.space.var("lev(v)")
