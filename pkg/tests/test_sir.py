import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from heapguard.corpus import corpus, random_program
from heapguard.sir import (
    IrreducibleFlow, P_BOTTOM, SirSyntaxError, SirTypeError, TCopy, TIf, TLoadRef, TOutput,
    build_cfg, compute_cdrs, control_dependence, load_program, make_cfg, parse_program,
    postdominator_tree, program_text,
)

from conftest import load


# -- parsing and printing ------------------------------------------------------

def test_fig1_parses(fig1):
    m = fig1.method("m")
    assert m.refs == ["a", "b", "r"]
    assert m.prims == ["i"]
    assert isinstance(m.body[-1], TOutput) and m.body[-1].level == "low"


@pytest.mark.parametrize("seed", range(25))
def test_round_trip_on_generated_programs(seed):
    src, _ = random_program(random.Random(seed))
    p = parse_program(src)
    again = parse_program(program_text(p))
    assert again == p
    assert program_text(again) == program_text(p)


def test_round_trip_handwritten():
    src = """
    // comments are ignored
    class A { int x; bool y; A nxt; }
    class B extends A { A other; }
    method k(A a, B b, int n) {
      local bool t;
      local A c;
      t = !(a == b) && n >= -3;
      c = a.nxt;
      L1: if (t) goto L2;
      b.other = c;
      a.x = (n * 2) / 3 - 1;
      goto L1;
      L2: output low(n);
      a.foo(b, n);
    }
    """
    p = parse_program(src)
    assert parse_program(program_text(p)) == p


@pytest.mark.parametrize("src, err", [
    ("method g() { x = 1; }", SirTypeError),
    ("method g() { local int x; x = true; }", SirTypeError),
    ("method g() { local int x; L: x = 1; L: x = 2; }", SirSyntaxError),
    ("method g() { local int x; goto M; }", SirSyntaxError),
    ("method g() { local int x x = 1; }", SirSyntaxError),
    ("class A { int f; } class A { int g; } method g(A a) { a.f = 1; }", SirTypeError),
    ("class A extends B { int f; } class B extends A { } method g(A a) { a.f = 1; }", SirTypeError),
    ("class A { int f; } method g(A a, int a) { a.f = 1; }", SirTypeError),
    ("class A { int f; } class B { int f; } method g(A a, B b) { a = b; }", SirTypeError),
])
def test_rejections(src, err):
    with pytest.raises(err):
        load_program(src)


def test_error_positions():
    with pytest.raises(SirTypeError) as e:
        load_program("method g() {\n  local int x;\n  x = y;\n}")
    assert e.value.line == 3


def test_subtyping_in_copies():
    tp = load_program("class A { int f; } class B extends A { } method g(A a, B b) { a = b; }")
    assert isinstance(tp.method("g").body[0], TCopy)


def test_typed_forms():
    tp = load_program("class A { A n; } method g(A a) { local A r; r = a.n; }")
    assert isinstance(tp.method("g").body[0], TLoadRef)


# -- postdominators and control dependence ----------------------------------------------

def _succ(g):
    out = {u: list(g.succ[u]) for u in g.nodes}
    for u, v in g.virtual:
        out[u].append(v)
    return out


def _reaches_exit_without(succ, start, banned, exit_):
    seen, todo = {start}, [start]
    while todo:
        x = todo.pop()
        if x == exit_:
            return True
        for y in succ[x]:
            if y != banned and y not in seen:
                seen.add(y)
                todo.append(y)
    return False


def naive_pdom(g):
    """n postdominates u iff every path from u to exit meets n."""
    succ = _succ(g)
    return {u: frozenset(n for n in g.nodes
                         if n == u or not _reaches_exit_without(succ, u, n, g.exit))
            for u in g.nodes}


def naive_cd(g):
    """n is control dependent on branch b iff n postdominates a successor of b
    but does not strictly postdominate b."""
    pd = naive_pdom(g)
    succ = _succ(g)
    out = {}
    for b in g.branches:
        out[b] = {n for n in g.nodes for s in succ[b]
                  if n in pd[s] and not (n in pd[b] and n != b)}
    return out


def check_cfg(raw, n, branches):
    g = make_cfg(raw, 0, n, branches)
    t = postdominator_tree(g)
    pd = naive_pdom(g)
    assert t.pdom == pd
    for u in g.nodes:
        if u == g.exit:
            continue
        strict = pd[u] - {u}
        if t.ipdom[u] is not None:
            # the immediate postdominator is postdominated by every other strict one
            assert strict <= pd[t.ipdom[u]]
    cd = control_dependence(g, t)
    assert {b: set(v) for b, v in cd.items()} == naive_cd(g)
    try:
        tab = compute_cdrs(g, t)
    except IrreducibleFlow:
        return g, None
    assert P_BOTTOM not in tab.regions
    for b, rid in tab.cdr_of.items():
        reg = tab.regions[rid]
        assert reg.nodes == frozenset(cd[b])
        assert reg.inducing == b
        # every path from b to exit passes through the junction
        assert not _reaches_exit_without(_succ(g), b, reg.junction, g.exit) or reg.junction == g.exit
    return g, tab


def all_raw(n):
    """Every successor map over nodes 0..n-1 with exit n (1 or 2 successors per node)."""
    targets = list(range(n + 1))
    choices = [(t,) for t in targets] + [p for p in itertools.product(targets, repeat=2)]
    for combo in itertools.product(choices, repeat=n):
        raw = {i: list(c) for i, c in enumerate(combo)}
        raw[n] = []
        yield raw, {i for i, c in enumerate(combo) if len(c) == 2}


@pytest.mark.parametrize("n", [1, 2, 3])
def test_cd_oracle_exhaustive_small(n):
    count = 0
    for raw, br in all_raw(n):
        check_cfg(raw, n, br)
        count += 1
    assert count == (n + 1 + (n + 1) ** 2) ** n


@settings(max_examples=400, deadline=None)
@given(st.integers(4, 7).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.lists(st.integers(0, n), min_size=1, max_size=2), min_size=n, max_size=n))))
def test_cd_oracle_random_up_to_eight_nodes(case):
    n, succs = case
    raw = {i: list(s) for i, s in enumerate(succs)}
    raw[n] = []
    check_cfg(raw, n, {i for i, s in enumerate(succs) if len(s) == 2})


def test_f_has_one_region(f_prog):
    m = f_prog.method("f")
    g = build_cfg(m)
    tab = compute_cdrs(g, postdominator_tree(g))
    assert tab.count == 1
    reg = tab.regions[1]
    assert isinstance(m.body[reg.inducing], TIf)
    assert isinstance(m.body[reg.junction], TOutput)


def test_m_has_no_region(fig1):
    g = build_cfg(fig1.method("m"))
    assert compute_cdrs(g, postdominator_tree(g)).count == 0


def test_two_sequential_ifs():
    tp = load_program("""method s(int a, int b) { local int x;
      if (a > 0) goto A; x = 1; A: x = 2;
      if (b > 0) goto B; x = 3; B: output low(x); }""")
    g = build_cfg(tp.method("s"))
    tab = compute_cdrs(g, postdominator_tree(g))
    r1, r2 = tab.regions[1], tab.regions[2]
    assert not (r1.nodes & r2.nodes)
    assert r1.junction != r2.junction


def test_irreducible_mesh_rejected():
    tp = load_program("""method z(int a) { local int x;
      if (a > 0) goto B;
      A: x = 1;
      if (x > 0) goto B;
      goto E;
      B: x = 2;
      if (x > 1) goto A;
      E: output low(x); }""")
    g = build_cfg(tp.method("z"))
    with pytest.raises(IrreducibleFlow):
        compute_cdrs(g, postdominator_tree(g))


def test_infinite_loop_gets_virtual_edge():
    tp = load_program("method w(int a) { local int x; L: x = x + 1; goto L; }")
    g = build_cfg(tp.method("w"))
    assert g.virtual and g.warnings
    postdominator_tree(g)


def test_corpus_is_reducible_and_typed():
    for src, tp in corpus(3, count=10):
        m = tp.methods[0]
        assert len(m.body) <= 20
        assert len(m.refs) <= 4
