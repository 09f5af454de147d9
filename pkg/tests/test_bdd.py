from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from heapguard.bdd import AssignmentSet, BddError, CONTINGENT, TAUTOLOGY, UNSATISFIABLE, VarSpace

NAMES = ["x%d" % i for i in range(6)]


def formulas(depth=4):
    leaf = st.one_of(st.sampled_from(NAMES).map(lambda n: ("var", n)),
                     st.booleans().map(lambda b: ("const", b)))
    return st.recursive(leaf, lambda sub: st.one_of(
        sub.map(lambda a: ("not", a)),
        st.tuples(st.sampled_from(["and", "or", "xor", "imp"]), sub, sub),
        st.tuples(st.just("ite"), sub, sub, sub),
    ), max_leaves=12)


def build(sp, f):
    tag = f[0]
    if tag == "var":
        return sp.var(f[1])
    if tag == "const":
        return sp.const(f[1])
    if tag == "not":
        return ~build(sp, f[1])
    if tag == "ite":
        return build(sp, f[1]).ite(build(sp, f[2]), build(sp, f[3]))
    a, b = build(sp, f[1]), build(sp, f[2])
    return {"and": a & b, "or": a | b, "xor": a ^ b, "imp": a.implies(b)}[tag]


def ev(f, env):
    tag = f[0]
    if tag == "var":
        return env[f[1]]
    if tag == "const":
        return f[1]
    if tag == "not":
        return not ev(f[1], env)
    if tag == "ite":
        return ev(f[2], env) if ev(f[1], env) else ev(f[3], env)
    a, b = ev(f[1], env), ev(f[2], env)
    return {"and": a and b, "or": a or b, "xor": a != b, "imp": (not a) or b}[tag]


def table(f):
    return tuple(ev(f, dict(zip(NAMES, vals))) for vals in product([False, True], repeat=len(NAMES)))


def space():
    sp = VarSpace()
    for n in NAMES:
        sp.add_bool(n)
    return sp


@settings(max_examples=300, deadline=None)
@given(formulas(), formulas())
def test_canonical_iff_semantically_equal(f, g):
    sp = space()
    a, b = build(sp, f), build(sp, g)
    assert sp.truth_table(a, NAMES) == table(f)
    assert (a == b) == (table(f) == table(g))


@settings(max_examples=150, deadline=None)
@given(formulas(), st.sampled_from(NAMES))
def test_exists_is_strongest_free_consequence(f, v):
    sp = space()
    a = build(sp, f)
    e = sp.exists(a, [v])
    assert v not in e.support()
    for vals in product([False, True], repeat=len(NAMES)):
        env = dict(zip(NAMES, vals))
        want = ev(f, {**env, v: False}) or ev(f, {**env, v: True})
        assert sp.evaluate(e, env) == want


@settings(max_examples=150, deadline=None)
@given(formulas(), formulas(), formulas(), st.sampled_from(NAMES))
def test_substitute_distributes(f, g, rhs, v):
    sp = space()
    a, b = build(sp, f), build(sp, g)
    T = AssignmentSet(sp, {v: build(sp, rhs)})
    sub = lambda p: sp.substitute(p, T)
    assert sub(a & b) == sub(a) & sub(b)
    assert sub(a | b) == sub(a) | sub(b)
    assert sub(~a) == ~sub(a)
    assert sp.substitute(a, AssignmentSet(sp)) == a


@settings(max_examples=150, deadline=None)
@given(formulas(), st.dictionaries(st.sampled_from(NAMES), st.booleans(), min_size=1, max_size=3))
def test_cofactor_agrees_under_the_constraint(f, binding):
    sp = space()
    a = build(sp, f)
    g = sp.cube(binding)
    c = sp.cofactor(a, g)
    assert not (set(binding) & c.support())
    for vals in product([False, True], repeat=len(NAMES)):
        env = dict(zip(NAMES, vals))
        if all(env[k] == b for k, b in binding.items()):
            assert sp.evaluate(c, env) == sp.evaluate(a, env)


def test_classify():
    sp = space()
    x = sp.var("x0")
    assert sp.classify(sp.tt) == TAUTOLOGY
    assert sp.classify(sp.ff) == UNSATISFIABLE
    assert sp.classify(x & ~sp.var("x1")) == CONTINGENT
    assert sp.classify(x | ~x) == TAUTOLOGY


def test_enum_encoding():
    sp = VarSpace()
    sp.add_enum("hr", 3)
    assert sp.enum_bits("hr") == ["hr#0", "hr#1"]
    eq = [sp.enum_eq("hr", i) for i in range(3)]
    for i in range(3):
        for j in range(3):
            assert (eq[i] & eq[j]).is_false() == (i != j)
    assert sp.enum_in("hr", [0, 2]) == eq[0] | eq[2]
    assert sp.substitute(eq[1], sp.enum_assign("hr", 1)).is_true()
    sp.add_enum("one", 1)
    assert sp.enum_bits("one") == []


def test_merge_joins_doubly_assigned():
    sp = space()
    x, y = sp.var("x0"), sp.var("x1")
    m = AssignmentSet(sp, {"x2": x}) | AssignmentSet(sp, {"x2": y, "x3": x})
    assert m.get("x2") == x | y
    assert m.get("x3") == x


def test_errors():
    sp = space()
    with pytest.raises(BddError):
        sp.add_bool("x0")
    with pytest.raises(TypeError):
        bool(sp.var("x0"))
    with pytest.raises(BddError):
        sp.cofactor(sp.tt, sp.var("x0") | sp.var("x1"))
    other = space()
    with pytest.raises(BddError):
        sp.var("x0") & other.var("x0")


def test_dump_is_stable():
    sp = space()
    f = (sp.var("x1") & sp.var("x0")) | ~sp.var("x2")
    assert sp.dump(f) == sp.dump(build(sp, ("or", ("not", ("var", "x2")), ("and", ("var", "x0"), ("var", "x1")))))
    assert sp.dump(sp.tt) == "tt" and sp.dump(sp.ff) == "ff"
