"""Concrete storeless heaps, indistinguishability, and the executable soundness checks.

A concrete heap partitions the named references into alias classes (one per
object), keeps one outgoing edge per (class, reference field) and the
primitive field values of every class.  Classes no reference names any more
are dropped together with their fields and edges.
"""
import itertools
import json
import random
import time
from dataclasses import dataclass, field

from .bdd import VarSpace
from .heap import ALIAS, FREACH, instantiate, lev_name, rel_name
from .sir import (
    Binary, Lit, PRIM_TYPES, RefEq, TAssign, TCall, TCopy, TGoto, TIf, TLoadPrim,
    TLoadRef, TNew, TNull, TOutput, TStorePrim, TStoreRef, Unary, Var, load_program,
)


class _Und:
    def __repr__(self):
        return "und"


UND = _Und()
NULL = None          # object type of the null class
INDUCED, INCIDENT = "induced", "incident"


class Trap(Exception):
    """Undefined behaviour in a concrete run (null access, read of und)."""


def default_value(t):
    return False if t == "bool" else 0


def wrap32(x):
    x &= 0xFFFFFFFF
    return x - (1 << 32) if x & 0x80000000 else x


class ConcreteHeap:
    def __init__(self, hierarchy, refs):
        self.h = hierarchy
        self.refs = list(refs)          # names, in a fixed order
        self.cls = {}                   # ref -> class id
        self.otype = {}                 # class id -> class name, or None for null
        self.edges = {}                 # (class id, field) -> class id
        self.prims = {}                 # (class id, field) -> value or UND
        self.next_id = 0

    # -- construction ---------------------------------------------------------
    def copy(self):
        c = ConcreteHeap.__new__(ConcreteHeap)
        c.h, c.refs = self.h, self.refs
        c.cls, c.otype = dict(self.cls), dict(self.otype)
        c.edges, c.prims = dict(self.edges), dict(self.prims)
        c.next_id = self.next_id
        return c

    def fresh(self, otype, fill):
        cid = self.next_id
        self.next_id += 1
        self.otype[cid] = otype
        if otype is not None:
            for f, t in self.h.prim_fields(otype).items():
                self.prims[(cid, f)] = default_value(t) if fill == "default" else (
                    UND if fill == "und" else fill(f, t))
        return cid

    def gc(self):
        live = set(self.cls.values())
        for k in [k for k in self.otype if k not in live]:
            del self.otype[k]
        self.edges = {k: v for k, v in self.edges.items() if k[0] in live and v in live}
        self.prims = {k: v for k, v in self.prims.items() if k[0] in live}
        return self

    # -- queries ----------------------------------------------------------------
    def is_null(self, r):
        return self.otype[self.cls[r]] is None

    def alias(self, r, s):
        return self.cls[r] == self.cls[s]

    def succ(self, cid):
        return [v for (c, _), v in sorted(self.edges.items()) if c == cid]

    def reachable(self, cid):
        """Classes reachable from cid through one or more edges."""
        seen, todo = set(), list(self.succ(cid))
        while todo:
            x = todo.pop()
            if x in seen:
                continue
            seen.add(x)
            todo.extend(self.succ(x))
        return seen

    def freach(self, r, s):
        return self.cls[s] in self.reachable(self.cls[r])

    def field_edge(self, r, f, s):
        return self.edges.get((self.cls[r], f)) == self.cls[s]

    def prim_values(self, r):
        cid = self.cls[r]
        return {f: v for (c, f), v in self.prims.items() if c == cid}

    def relation(self, kind, r, s):
        return self.alias(r, s) if kind == ALIAS else self.freach(r, s)

    def check(self):
        """Well-formedness: each ref in exactly one live class, edges functional over live classes."""
        assert set(self.cls) == set(self.refs)
        live = set(self.cls.values())
        assert set(self.otype) == live
        for (c, f), v in self.edges.items():
            assert c in live and v in live
            assert self.otype[c] is not None and f in self.h.ref_fields(self.otype[c])
        return True

    def canonical(self):
        """Hashable shape, independent of class numbering."""
        ren = {}
        for r in self.refs:
            ren.setdefault(self.cls[r], len(ren))
        return (tuple(ren[self.cls[r]] for r in self.refs),
                tuple(sorted((ren[c], self.otype[c] or "") for c in ren)),
                tuple(sorted((ren[c], f, ren[v]) for (c, f), v in self.edges.items())),
                tuple(sorted((ren[c], f, repr(v)) for (c, f), v in self.prims.items())))

    def __eq__(self, other):
        return isinstance(other, ConcreteHeap) and self.canonical() == other.canonical()

    def describe(self):
        groups = {}
        for r in self.refs:
            groups.setdefault(self.cls[r], []).append(r)
        parts = []
        for cid, names in sorted(groups.items(), key=lambda kv: self.refs.index(kv[1][0])):
            t = self.otype[cid]
            if t is None:
                parts.append("{%s}=null" % ",".join(names))
                continue
            ps = ",".join("%s=%r" % (f, v) for (c, f), v in sorted(self.prims.items()) if c == cid)
            es = ",".join("%s->%s" % (f, "/".join(groups.get(v, ["?"]))) for (c, f), v in
                          sorted(self.edges.items()) if c == cid)
            parts.append("{%s}:%s[%s%s%s]" % (",".join(names), t, ps, "; " if es else "", es))
        return " ".join(parts)


def concrete_apply(h, op):
    """Apply a heap operation; returns a new heap.

    op: ('null', r) | ('copy', r, s) | ('load', r, s, f) | ('new', r, C)
        | ('pstore', r, f, value) | ('rstore', r, f, s)
    """
    out = h.copy()
    kind, r = op[0], op[1]
    if kind == "null":
        out.cls[r] = out.fresh(NULL, "und")
    elif kind == "new":
        out.cls[r] = out.fresh(op[2], "default")
    elif kind == "copy":
        out.cls[r] = out.cls[op[2]]
    elif kind == "load":
        s, f = op[2], op[3]
        cs = out.cls[s]
        t = out.otype[cs]
        if t is None:
            raise Trap("null dereference of %s" % s)
        ft = out.h.ref_fields(t).get(f)
        if ft is None:
            raise Trap("field %s undefined for %s" % (f, t))
        tgt = out.edges.get((cs, f))
        if tgt is None:
            # an object no named reference tracks: fresh, contents unknown
            tgt = out.fresh(ft, "und")
            out.edges[(cs, f)] = tgt
        out.cls[r] = tgt
    elif kind == "pstore":
        f, v = op[2], op[3]
        cr = out.cls[r]
        t = out.otype[cr]
        if t is None:
            raise Trap("null dereference of %s" % r)
        if f not in out.h.prim_fields(t):
            raise Trap("field %s undefined for %s" % (f, t))
        out.prims[(cr, f)] = v
    elif kind == "rstore":
        f, s = op[2], op[3]
        cr = out.cls[r]
        t = out.otype[cr]
        if t is None:
            raise Trap("null dereference of %s" % r)
        if f not in out.h.ref_fields(t):
            raise Trap("field %s undefined for %s" % (f, t))
        out.edges[(cr, f)] = out.cls[s]
    else:
        raise ValueError("unknown concrete operation %r" % (op,))
    return out.gc()


def read_prim(h, r, f):
    cr = h.cls[r]
    if h.otype[cr] is None:
        raise Trap("null dereference of %s" % r)
    v = h.prims.get((cr, f), UND)
    if v is UND:
        raise Trap("read of undefined field %s.%s" % (r, f))
    return v


# ---------------------------------------------------------------------------
# reference graphs and indistinguishability

@dataclass
class RefGraph:
    nodes: frozenset
    edges: frozenset      # (r, label, s); label "~" or a field name


def low_reference_graph(h, low, mode=INDUCED):
    """Graph over the low references.  ``low`` is the set (or predicate map) of low refs.

    induced: edges with both endpoints low; incident: edges with at least one.
    """
    if isinstance(low, dict):
        low = {r for r, v in low.items() if not v}
    low = frozenset(low)
    edges = set()
    for r in h.refs:
        for s in h.refs:
            keep = (r in low and s in low) if mode == INDUCED else (r in low or s in low)
            if not keep:
                continue
            if h.alias(r, s):
                edges.add((r, "~", s))
            cr = h.cls[r]
            for (c, f), v in h.edges.items():
                if c == cr and v == h.cls[s]:
                    edges.add((r, f, s))
    return RefGraph(low, frozenset(edges))


def _isomorphic(g1, g2):
    if len(g1.edges) != len(g2.edges) or g1.nodes != g2.nodes:
        return False
    nodes = sorted(g1.nodes)
    for perm in itertools.permutations(nodes):
        m = dict(zip(nodes, perm))
        # incident graphs carry high endpoints too; those stay fixed
        if {(m.get(a, a), l, m.get(b, b)) for a, l, b in g1.edges} == g2.edges:
            return True
    return False


def indistinguishable(h1, h2, low, mode=INDUCED, iso=False):
    if isinstance(low, dict):
        low = {r for r, v in low.items() if not v}
    g1 = low_reference_graph(h1, low, mode)
    g2 = low_reference_graph(h2, low, mode)
    if iso:
        if not _isomorphic(g1, g2):
            return False
    elif g1.edges != g2.edges:
        return False
    for r in low:
        if h1.prim_values(r) != h2.prim_values(r):
            return False
    return True


# ---------------------------------------------------------------------------
# sampling

def random_prim(rng, t):
    return rng.random() < 0.5 if t == "bool" else rng.randint(-2, 3)


def random_heap(rng, hier, typed_refs, null_p=0.0, edge_p=0.6):
    h = ConcreteHeap(hier, [r for r, _ in typed_refs])
    for r, t in typed_refs:
        joinable = [c for c, ot in sorted(h.otype.items()) if ot is not None and hier.is_subtype(ot, t)]
        if joinable and rng.random() < 0.45:
            h.cls[r] = rng.choice(joinable)
        elif rng.random() < null_p:
            h.cls[r] = h.fresh(NULL, "und")
        else:
            ot = rng.choice(sorted(hier.subtypes(t)))
            h.cls[r] = h.fresh(ot, lambda f, ft: random_prim(rng, ft))
    live = sorted(h.otype)
    for c in live:
        ot = h.otype[c]
        if ot is None:
            continue
        for f, ft in sorted(hier.ref_fields(ot).items()):
            cand = [d for d in live if h.otype[d] is not None and hier.is_subtype(h.otype[d], ft)]
            if cand and rng.random() < edge_p:
                h.edges[(c, f)] = rng.choice(cand)
    return h.gc()


def perturb_high(rng, h, low, typed_refs, rounds=3):
    """Change only parts of h that no low reference can observe directly."""
    hier = h.h
    out = h.copy()
    types = dict(typed_refs)
    for _ in range(rounds):
        low_cls = {out.cls[r] for r in low}
        k = rng.random()
        high = [r for r in out.refs if r not in low]
        if k < 0.35:
            cands = [c for c in sorted(out.otype) if c not in low_cls and out.otype[c] is not None]
            if cands:
                c = rng.choice(cands)
                for f, ft in sorted(hier.prim_fields(out.otype[c]).items()):
                    out.prims[(c, f)] = random_prim(rng, ft)
        elif k < 0.65:
            srcs = [c for c in sorted(out.otype) if out.otype[c] is not None]
            if srcs:
                c = rng.choice(srcs)
                fs = sorted(hier.ref_fields(out.otype[c]).items())
                if fs:
                    f, ft = rng.choice(fs)
                    tg = [d for d in sorted(out.otype) if out.otype[d] is not None
                          and hier.is_subtype(out.otype[d], ft)]
                    if c in low_cls:
                        tg = [d for d in tg if d not in low_cls]
                    choice = rng.choice(tg + [None]) if tg else None
                    if choice is None:
                        if not (c in low_cls and out.edges.get((c, f)) in low_cls):
                            out.edges.pop((c, f), None)
                    elif not (c in low_cls and out.edges.get((c, f)) in low_cls):
                        out.edges[(c, f)] = choice
        elif high:
            r = rng.choice(high)
            t = types[r]
            opts = [c for c in sorted(out.otype) if c not in low_cls and out.otype[c] is not None
                    and hier.is_subtype(out.otype[c], t)]
            if opts and rng.random() < 0.5:
                out.cls[r] = rng.choice(opts)
            else:
                ot = rng.choice(sorted(hier.subtypes(t)))
                out.cls[r] = out.fresh(ot, lambda f, ft: random_prim(rng, ft))
            out.gc()
    return out.gc()


def abstract_relations(inst, heaps, rng=None, extra_p=0.0):
    """Valuation of V_R over-approximating every heap in ``heaps``."""
    val = {}
    for key in inst.rel_vars:
        kind, r, s = key
        v = any(hp.relation(kind, r, s) for hp in heaps)
        if not v and rng is not None and rng.random() < extra_p:
            v = True
        val[key] = v
    return val


def rel_value(inst, rels, kind, r, s):
    key = inst.key(kind, r, s)
    c = inst.classify_key(key)
    if c == "var":
        return rels[key]
    return c == "tt"


def close_levels(inst, rels, levels):
    """Raise levels until aliases agree and field-reaching references dominate."""
    levels = dict(levels)
    changed = True
    while changed:
        changed = False
        for r in inst.refs:
            for s in inst.refs:
                if r == s:
                    continue
                up = False
                if rel_value(inst, rels, ALIAS, r, s) and levels[s] and not levels[r]:
                    up = True
                if rel_value(inst, rels, FREACH, r, s) and levels[s] and not levels[r]:
                    up = True
                if up:
                    levels[r] = True
                    changed = True
    return levels


def abstract_valuation(inst, rels, levels):
    """Full valuation of the instance's variable space (h' copy and others False)."""
    val = {n: False for n in inst.space.order if inst.space.kinds[n] == "bool"}
    for r in inst.refs:
        val[lev_name(r)] = levels[r]
    for key, v in rels.items():
        val[rel_name(key)] = v
    return val


def apply_abstract(inst, T, val):
    sp = inst.space
    out = dict(val)
    for k, rhs in T.items.items():
        out[k] = sp.evaluate(rhs, val)
    return out


def _split(inst, val):
    levels = {r: val[lev_name(r)] for r in inst.refs}
    rels = {k: val[rel_name(k)] for k in inst.rel_vars}
    return levels, rels


def covers(inst, rels, h):
    """Relations of h that the abstract valuation wrongly excludes."""
    bad = []
    for key in inst.all_keys():
        kind, r, s = key
        if h.relation(kind, r, s) and not rel_value(inst, rels, kind, r, s):
            bad.append(key)
    return bad


# ---------------------------------------------------------------------------
# reports

@dataclass
class Report:
    check: str
    domain: str
    trials: int
    seed: int
    violations: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.violations

    def to_json(self):
        return json.dumps({"check": self.check, "domain": self.domain, "trials": self.trials,
                           "seed": self.seed, "violations": self.violations, "stats": self.stats},
                          sort_keys=True, indent=2, default=str)


# ---------------------------------------------------------------------------
# secure abstraction (single step, differential)

def _op_text(op):
    kind = op[0]
    if kind == "null":
        return "%s = null;" % op[1]
    if kind == "copy":
        return "%s = %s;" % (op[1], op[2])
    if kind == "load":
        return "%s = %s.%s;" % (op[1], op[2], op[3])
    if kind == "new":
        return "%s = new %s;" % (op[1], op[2])
    if kind == "pstore":
        return "%s.%s = <%r|%r>;" % (op[1], op[2], op[3], op[4])
    if kind == "rstore":
        return "%s.%s = %s;" % (op[1], op[2], op[3])
    return str(op)


def heap_ops(hier, typed_refs):
    """All typed heap operations over the references, with the abstract operation they map to.

    Yields (concrete op template, abstract op, needs level, level floor refs).
    """
    types = dict(typed_refs)
    R = [r for r, _ in typed_refs]
    for r in R:
        yield ("null", r), ("null", r)
    for r in R:
        for s in R:
            if hier.is_subtype(types[s], types[r]):
                yield ("copy", r, s), ("copy", r, s)
    for r in R:
        for s in R:
            for f, ft in sorted(hier.ref_fields(types[s]).items()):
                if hier.is_subtype(ft, types[r]):
                    yield ("load", r, s, f), ("load", r, s)
    for r in R:
        for c in sorted(hier.subtypes(types[r])):
            yield ("new", r, c), ("new", r)
    for r in R:
        for f, ft in sorted(hier.prim_fields(types[r]).items()):
            yield ("pstore", r, f), ("pstore", r)
    for r in R:
        for f, ft in sorted(hier.ref_fields(types[r]).items()):
            for s in R:
                if hier.is_subtype(types[s], ft):
                    yield ("rstore", r, f, s), ("rstore", r, s)


_TABLE_CACHE = {}


def _table(src):
    tp = _TABLE_CACHE.get(src)
    if tp is None:
        tp = load_program(src + "\nmethod _probe() { local int z; z = 0; }")
        _TABLE_CACHE[src] = tp
    return tp.hierarchy


class _InstCache:
    def __init__(self, domain, mutant, hardened):
        self.domain, self.mutant, self.hardened = domain, mutant, hardened
        self.cache = {}

    def get(self, src, typed_refs):
        key = (src, tuple(typed_refs))
        got = self.cache.get(key)
        if got is None:
            hier = _table(src)
            inst = instantiate(self.domain, typed_refs, hier, mutant=self.mutant, hardened=self.hardened)
            inst.bind(VarSpace())
            got = (hier, inst, {})
            if len(self.cache) > 2000:
                self.cache.clear()
            self.cache[key] = got
        return got


def _transformer(inst, tcache, aop, l):
    k = (aop, l)
    T = tcache.get(k)
    if T is None:
        sp = inst.space
        lv = None if l is None else sp.const(l)
        T = inst.heap_transformer(aop, lv)
        tcache[k] = T
    return T


def _reproducer(src, typed_refs, h1, h2, levels, rels, inst, cop, l, kind, detail):
    decl = ", ".join("%s %s" % (t, r) for r, t in typed_refs)
    facts = [rel_name(k) for k, v in sorted(rels.items()) if v]
    lines = [src, "// pre-state h1: " + h1.describe(), "// pre-state h2: " + h2.describe(),
             "// high reach levels: %s" % ",".join(r for r in inst.refs if levels[r]),
             "// abstract relations holding: %s" % (", ".join(facts) or "none"),
             "// mutation level: %s" % ("-" if l is None else ("high" if l else "low")),
             "// %s violation: %s" % (kind, detail),
             "method repro(%s) {" % decl, "  " + _op_text(cop), "}"]
    return "\n".join(lines)


def _single_check(inst, tcache, h1, h2, levels, rels, cop, aop, l, mode, iso, cover):
    """Returns None or (kind, detail)."""
    try:
        p1 = concrete_apply(h1, cop[:4] if cop[0] != "pstore" else (cop[0], cop[1], cop[2], cop[3]))
        p2 = concrete_apply(h2, cop[:4] if cop[0] != "pstore" else (cop[0], cop[1], cop[2], cop[4]))
    except Trap:
        return None
    T = _transformer(inst, tcache, aop, l)
    post = apply_abstract(inst, T, abstract_valuation(inst, rels, levels))
    plev, prel = _split(inst, post)
    low = {r for r in inst.refs if not plev[r]}
    if not indistinguishable(p1, p2, low, mode, iso):
        return ("indistinguishability", "post heaps differ on low references %s" % sorted(low))
    if cover:
        for which, p in (("h1", p1), ("h2", p2)):
            miss = covers(inst, prel, p)
            if miss:
                return ("abstraction", "post %s has %s but the abstract post-state excludes it"
                        % (which, ", ".join(rel_name(k) for k in miss)))
    return None


def _sample_pre(rng, hier, typed_refs, inst, mode, null_p=0.05):
    R = [r for r, _ in typed_refs]
    for _ in range(50):
        h1 = random_heap(rng, hier, typed_refs, null_p=null_p)
        p_high = rng.choice([0.0, 0.25, 0.5])
        lev0 = {r: rng.random() < p_high for r in R}
        low0 = {r for r in R if not lev0[r]}
        h2 = perturb_high(rng, h1, low0, typed_refs) if rng.random() < 0.9 else h1.copy()
        rels = abstract_relations(inst, [h1, h2], rng, extra_p=0.15)
        levels = close_levels(inst, rels, lev0)
        low = {r for r in R if not levels[r]}
        if indistinguishable(h1, h2, low, mode):
            return h1, h2, levels, rels
    return None


def check_secure_abstraction(domain="deep", trials=10000, seed=0, mutant=None, hardened=False,
                             mode=INDUCED, iso=False, cover=True, max_refs=4, stop_after=None,
                             time_limit=None):
    """Differential single-step check of indistinguishability preservation.

    Besides the post-state indistinguishability, ``cover`` also demands that the
    abstract post-state still over-approximates both concrete post-heaps, which is
    what lets the property be chained along a run.
    """
    rng = random.Random(seed)
    rep = Report("abstraction", domain, trials, seed)
    icache = _InstCache(domain, mutant, hardened)
    n_cases = 0
    kinds = {}
    t0 = time.monotonic()
    from .corpus import random_classes, random_refs
    done = 0
    for trial in range(trials):
        if time_limit is not None and time.monotonic() - t0 > time_limit:
            break
        done += 1
        src = random_classes(rng)
        hier = _table(src)
        cnames = sorted(hier.classes)
        typed_refs = random_refs(rng, cnames, max_refs=max_refs)
        hier, inst, tcache = icache.get(src, typed_refs)
        pre = _sample_pre(rng, hier, typed_refs, inst, mode)
        if pre is None:
            continue
        h1, h2, levels, rels = pre
        for cop, aop in heap_ops(hier, typed_refs):
            kind = cop[0]
            if kind in ("new", "pstore", "rstore"):
                lvls = [False, True]
            else:
                lvls = [None]
            for l in lvls:
                if kind == "rstore" and not l and levels[cop[3]]:
                    continue            # clause (m): reach(s) must flow to l
                c = cop
                if kind == "pstore":
                    ft = hier.prim_fields(hier_type(h1, cop[1], typed_refs))[cop[2]]
                    v1 = random_prim(rng, ft)
                    # a low level means the stored expression is low, so both runs store the same value
                    v2 = v1 if not l else random_prim(rng, ft)
                    c = ("pstore", cop[1], cop[2], v1, v2)
                n_cases += 1
                bad = _single_check(inst, tcache, h1, h2, levels, rels, c, aop, l, mode, iso, cover)
                if bad:
                    kinds[bad[0]] = kinds.get(bad[0], 0) + 1
                    if len(rep.violations) < 20:
                        rep.violations.append({
                            "trial": trial, "kind": bad[0], "op": _op_text(c),
                            "reproducer": _minimize(inst, icache, src, typed_refs, h1, h2, levels,
                                                    rels, c, aop, l, mode, iso, cover, bad),
                        })
        if stop_after and len(rep.violations) >= stop_after:
            break
    rep.trials = done
    rep.stats = {"cases": n_cases, "by_kind": kinds, "violation_count": sum(kinds.values()),
                 "mutant": mutant, "hardened": hardened, "mode": mode, "cover": cover,
                 "seconds": round(time.monotonic() - t0, 2)}
    if sum(kinds.values()) and not rep.violations:
        rep.violations.append({"kind": "unrecorded"})
    return rep


def hier_type(h, r, typed_refs):
    return dict(typed_refs)[r]


def _project_heap(h, keep):
    out = ConcreteHeap(h.h, [r for r in h.refs if r in keep])
    out.cls = {r: h.cls[r] for r in out.refs}
    out.otype, out.edges, out.prims = dict(h.otype), dict(h.edges), dict(h.prims)
    out.next_id = h.next_id
    return out.gc()


def _minimize(inst, icache, src, typed_refs, h1, h2, levels, rels, cop, aop, l, mode, iso, cover, bad):
    """Greedily drop references not used by the operation while the violation persists."""
    used = {x for x in cop[1:] if isinstance(x, str) and x in dict(typed_refs)}
    cur = list(typed_refs)
    state = (h1, h2, levels, rels)
    for r, _ in list(typed_refs):
        if r in used or len(cur) <= 1:
            continue
        trial_refs = [x for x in cur if x[0] != r]
        keep = {x for x, _ in trial_refs}
        _, inst2, tc2 = icache.get(src, trial_refs)
        a1, a2 = _project_heap(state[0], keep), _project_heap(state[1], keep)
        lv = {x: state[2][x] for x in keep}
        rl = {}
        for key in inst2.rel_vars:
            k0 = inst.key(*key)
            rl[key] = state[3].get(k0, rel_value(inst, state[3], *key))
        low = {x for x in keep if not lv[x]}
        if not indistinguishable(a1, a2, low, mode):
            continue
        got = _single_check(inst2, tc2, a1, a2, lv, rl, cop, aop, l, mode, iso, cover)
        if got and got[0] == bad[0]:
            cur, inst, state, bad = trial_refs, inst2, (a1, a2, lv, rl), got
    h1, h2, levels, rels = state
    return _reproducer(src, cur, h1, h2, levels, rels, inst, cop, l, bad[0], bad[1])


# ---------------------------------------------------------------------------
# inductive invariants (exhaustive, bit-parallel)

PERMISSIVE_TABLE = "class Node { int val; Node next; }"


def _bitsets(n):
    """masks[j] has bit k set iff bit j of valuation k is 1."""
    N = 1 << n
    masks = []
    for j in range(n):
        m = 0
        block = 1 << j
        pattern = ((1 << block) - 1) << block      # block zeros then block ones
        period = block << 1
        reps = N // period
        acc = 0
        for k in range(reps):
            acc |= pattern << (k * period)
        masks.append(acc)
    return masks, (1 << N) - 1


def _pred_bits(inst, f, varmask, full, memo):
    b = inst.space.bdd
    def rec(u):
        if u == 0:
            return 0
        if u == 1:
            return full
        got = memo.get(u)
        if got is not None:
            return got
        lv, lo, hi = b.nodes[u]
        m = varmask[b.names[lv]]
        r = (m & rec(hi)) | (~m & full & rec(lo))
        memo[u] = r
        return r
    return rec(f.node)


def phi_bits(inst, get, full):
    """Bitsets of the alias-level and reach-level predicates, computed from their definitions."""
    alias_ok, reach_ok = full, full
    for r in inst.refs:
        for s in inst.refs:
            if r == s:
                continue
            lr, ls = get(lev_name(r)), get(lev_name(s))
            a = _rel_bits(inst, get, ALIAS, r, s, full)
            alias_ok &= (~a | ~(lr ^ ls)) & full
            fr = _rel_bits(inst, get, FREACH, r, s, full)
            reach_ok &= (~fr | lr | ~ls) & full
    return alias_ok, reach_ok


def _rel_bits(inst, get, kind, r, s, full):
    key = inst.key(kind, r, s)
    c = inst.classify_key(key)
    if c == "var":
        return get(rel_name(key))
    return full if c == "tt" else 0


def check_inductive(domain="deep", max_refs=3, mutant=None, hardened=False, table=PERMISSIVE_TABLE,
                    baseline=None):
    """Exhaustive check that the alias/reach level invariants survive every transformer.

    With ``baseline`` (a Report from the unmutated domain), violations already present in
    the baseline are not counted as new, so a mutant is 'caught' only by fresh counterexamples.
    """
    t0 = time.monotonic()
    hier = _table(table)
    cname = sorted(hier.classes)[0]
    typed = [("r%d" % i, cname) for i in range(max_refs)]
    inst = instantiate(domain, typed, hier, mutant=mutant, hardened=hardened)
    inst.bind(VarSpace())
    names = inst.level_vars() + inst.relation_vars()
    n = len(names)
    masks, full = _bitsets(n)
    varmask = dict(zip(names, masks))
    for nm in inst.space.order:
        if nm not in varmask and inst.space.kinds[nm] == "bool":
            varmask[nm] = 0
    pre_alias, pre_reach = phi_bits(inst, lambda x: varmask[x], full)
    pre_ok = pre_alias & pre_reach
    rep = Report("inductive", domain, 0, 0)
    per_op = {}
    ops = []
    R = inst.refs
    for r in R:
        ops.append((("null", r), None))
        ops.append((("new", r), False))
        ops.append((("new", r), True))
        ops.append((("pstore", r), False))
        ops.append((("pstore", r), True))
        for s in R:
            ops.append((("copy", r, s), None))
            ops.append((("load", r, s), None))
            ops.append((("rstore", r, s), False))
            ops.append((("rstore", r, s), True))
    total = 0
    for op, l in ops:
        lv = None if l is None else inst.space.const(l)
        if op[0] == "rstore":
            # the encoder's store level always carries reach(s)
            lv = lv | inst.lev(op[2])
        T = inst.heap_transformer(op, lv)
        memo = {}
        post = {k: _pred_bits(inst, v, varmask, full, memo) for k, v in T.items.items()}
        get = lambda x: post.get(x, varmask[x])
        a_ok, r_ok = phi_bits(inst, get, full)
        bad_alias = pre_ok & ~a_ok & full
        bad_reach = pre_ok & ~r_ok & full
        tag = "%s%s" % (op, "" if l is None else (" high" if l else " low"))
        if baseline is not None:
            base = baseline.stats.get("masks", {}).get(tag, (0, 0))
            bad_alias &= ~base[0]
            bad_reach &= ~base[1]
        per_op[tag] = (bad_alias, bad_reach)
        for kind, bits in (("alias-levels", bad_alias), ("reach-levels", bad_reach)):
            cnt = bin(bits).count("1")
            if cnt:
                total += cnt
                if len(rep.violations) < 20:
                    k = (bits & -bits).bit_length() - 1
                    val = {nm: bool((k >> j) & 1) for j, nm in enumerate(names)}
                    held = [nm for nm in names if val[nm]]
                    rep.violations.append({"kind": kind, "op": tag, "count": cnt,
                                           "pre_state": ", ".join(held) or "all false/low"})
    rep.trials = len(ops)
    rep.stats = {"valuations": 1 << n, "typed_valuations": bin(pre_ok).count("1"),
                 "transformers": len(ops), "violation_count": total, "vars": n,
                 "mutant": mutant, "hardened": hardened,
                 "seconds": round(time.monotonic() - t0, 2), "masks": per_op}
    return rep


# ---------------------------------------------------------------------------
# concrete interpreter

@dataclass
class ProgState:
    loc: int
    vals: dict                # primitive variable -> value
    heap: ConcreteHeap
    levels: dict = field(default_factory=dict)   # typing environment (not used by execution)


@dataclass
class Trace:
    observations: list
    status: str               # halted | budget-exhausted | trap
    steps: int = 0
    detail: str = ""

    def low(self):
        return [p for l, p in self.observations if l == "low"]


def eval_expr(e, vals, heap):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        return vals[e.name]
    if isinstance(e, RefEq):
        return heap.alias(e.left, e.right)
    if isinstance(e, Unary):
        v = eval_expr(e.arg, vals, heap)
        if e.op == "!":
            return not v
        return wrap32(-v)
    if isinstance(e, Binary):
        op = e.op
        if op == "&&":
            return bool(eval_expr(e.left, vals, heap)) and bool(eval_expr(e.right, vals, heap))
        if op == "||":
            return bool(eval_expr(e.left, vals, heap)) or bool(eval_expr(e.right, vals, heap))
        a = eval_expr(e.left, vals, heap)
        b = eval_expr(e.right, vals, heap)
        if op == "+":
            return wrap32(a + b)
        if op == "-":
            return wrap32(a - b)
        if op == "*":
            return wrap32(a * b)
        if op == "/":
            if b == 0:
                return 0
            q = abs(a) // abs(b)
            return wrap32(q if (a >= 0) == (b >= 0) else -q)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
    raise ValueError("cannot evaluate %r" % (e,))


def observe_ref(heap, r):
    """Canonical breadth-first serialization of what r reaches, up to depth |R|."""
    c0 = heap.cls[r]
    if heap.otype[c0] is None:
        return "null"
    ids = {c0: 0}
    order = [c0]
    depth = {c0: 0}
    i = 0
    limit = len(heap.refs)
    while i < len(order):
        c = order[i]
        i += 1
        if depth[c] >= limit:
            continue
        for (cc, f), v in sorted(heap.edges.items()):
            if cc == c and v not in ids:
                ids[v] = len(ids)
                depth[v] = depth[c] + 1
                order.append(v)
    parts = []
    for c in order:
        if heap.otype[c] is None:
            parts.append("#%d:null" % ids[c])
            continue
        ps = ",".join("%s=%r" % (f, v) for (cc, f), v in sorted(heap.prims.items()) if cc == c)
        es = ",".join("%s->#%d" % (f, ids[v]) for (cc, f), v in sorted(heap.edges.items())
                      if cc == c and v in ids and depth[c] < limit)
        parts.append("#%d{%s|%s}" % (ids[c], ps, es))
    return " ".join(parts)


def run_concrete(m, init, budget=10000):
    if isinstance(init, ProgState):
        loc, vals, heap = init.loc, dict(init.vals), init.heap
    else:
        vals, heap = dict(init[0]), init[1]
        loc = 0
    obs = []
    steps = 0
    n = len(m.body)
    try:
        while loc < n:
            if steps >= budget:
                return Trace(obs, "budget-exhausted", steps)
            steps += 1
            s = m.body[loc]
            nxt = loc + 1
            if isinstance(s, TAssign):
                vals[s.v] = eval_expr(s.e, vals, heap)
            elif isinstance(s, TLoadPrim):
                vals[s.v] = read_prim(heap, s.r, s.f)
            elif isinstance(s, TStorePrim):
                heap = concrete_apply(heap, ("pstore", s.r, s.f, eval_expr(s.e, vals, heap)))
            elif isinstance(s, TCopy):
                heap = concrete_apply(heap, ("copy", s.r, s.s))
            elif isinstance(s, TLoadRef):
                heap = concrete_apply(heap, ("load", s.r, s.s, s.f))
            elif isinstance(s, TStoreRef):
                heap = concrete_apply(heap, ("rstore", s.r, s.f, s.s))
            elif isinstance(s, TNew):
                heap = concrete_apply(heap, ("new", s.r, s.cls))
            elif isinstance(s, TNull):
                heap = concrete_apply(heap, ("null", s.r))
            elif isinstance(s, TGoto):
                nxt = m.target(s.label)
            elif isinstance(s, TIf):
                if eval_expr(s.e, vals, heap):
                    nxt = m.target(s.label)
            elif isinstance(s, TOutput):
                payload = observe_ref(heap, s.x) if s.is_ref else vals[s.x]
                obs.append((s.level, payload))
            elif isinstance(s, TCall):
                raise Trap("calls are not interpreted")
            loc = nxt
    except Trap as e:
        return Trace(obs, "trap", steps, str(e))
    return Trace(obs, "halted", steps)


def prefix_related(t1, t2):
    a, b = t1.low(), t2.low()
    if t1.status == "halted" and t2.status == "halted":
        return a == b
    k = min(len(a), len(b))
    if a[:k] != b[:k]:
        return False
    # a finished run cannot be extended by the other one
    if t1.status == "halted" and len(b) > len(a):
        return False
    if t2.status == "halted" and len(a) > len(b):
        return False
    return True


# ---------------------------------------------------------------------------
# noninterference

def initial_heap(m, heap_params):
    """Extend a heap over the parameters with null locals."""
    h = heap_params.copy()
    h.refs = list(m.refs)
    for r in m.refs:
        if r not in h.cls:
            h.cls[r] = h.fresh(NULL, "und")
    return h.gc()


def _context_valuation(g, pc, prim_lev, ref_lev, reach_lev, rels, inst):
    sp = g.space
    val = {}
    for n in sp.order:
        if sp.kinds[n] != "bool":
            continue
        val[n] = False
    val["pc"] = pc
    for v, b in prim_lev.items():
        val["lev(%s)" % v] = b
    for r, b in ref_lev.items():
        val["lev(%s)" % r] = b
    for r, b in reach_lev.items():
        val[lev_name(r)] = b
    if inst is not None:
        for key, b in rels.items():
            val[rel_name(key)] = b
    return val


def check_noninterference(m, g, trials=100, budget=10000, seed=0, mode=INDUCED, max_attempts=None,
                          override=None):
    """Pairs of guard-satisfying, indistinguishable initial states must give prefix-related low outputs."""
    rng = random.Random(seed)
    rep = Report("noninterference", g.domain, trials, seed)
    inst = g.scfg.inst if g.scfg is not None else None
    pred = g.pred if override is None else g.space.const(override)
    hier = m.hierarchy
    params_r = [(n, t) for n, t in m.params if t not in PRIM_TYPES]
    params_p = [(n, t) for n, t in m.params if t in PRIM_TYPES]
    accepted = attempts = 0
    traps = exhausted = 0
    max_attempts = max_attempts or trials * 40
    t0 = time.monotonic()
    if pred.is_false():
        rep.stats = {"accepted": 0, "attempts": 0, "note": "guard unsatisfiable; no context admitted"}
        return rep
    while accepted < trials and attempts < max_attempts:
        attempts += 1
        p_high = rng.choice([0.0, 0.0, 0.25, 0.5])
        pc = rng.random() < 0.05
        prim_lev = {v: rng.random() < p_high for v, _ in params_p}
        ref_lev = {r: rng.random() < p_high for r, _ in params_r}
        reach0 = {r: rng.random() < p_high for r, _ in params_r}
        h1p = random_heap(rng, hier, params_r, null_p=0.05)
        low0 = {r for r, _ in params_r if not reach0[r]}
        h2p = perturb_high(rng, h1p, low0, params_r) if rng.random() < 0.9 else h1p.copy()
        h1, h2 = initial_heap(m, h1p), initial_heap(m, h2p)
        rels = {}
        reach = dict(reach0)
        if inst is not None:
            rels = abstract_relations(inst, [h1, h2], rng, extra_p=0.1)
            # relations touching locals are false initially; keep only argument pairs free
            pnames = {r for r, _ in params_r}
            for key in list(rels):
                if key[1] not in pnames or key[2] not in pnames:
                    rels[key] = False
            full_lev = {r: reach.get(r, False) for r in inst.refs}
            full_lev = close_levels(inst, rels, full_lev)
            reach = {r: full_lev[r] for r, _ in params_r}
        low = {r for r, _ in params_r if not reach[r]}
        if not indistinguishable(h1, h2, low | {r for r, _ in m.locals if r in h1.cls}, mode):
            continue
        val = _context_valuation(g, pc, prim_lev, ref_lev, reach, rels, inst)
        if not g.space.evaluate(pred, val):
            continue
        v1, v2 = {}, {}
        for v, t in params_p:
            x = random_prim(rng, t)
            v1[v] = x
            v2[v] = random_prim(rng, t) if prim_lev[v] else x
        for v, t in m.locals:
            if t in PRIM_TYPES:
                v1[v] = v2[v] = default_value(t)
        accepted += 1
        t1 = run_concrete(m, (v1, h1), budget)
        t2 = run_concrete(m, (v2, h2), budget)
        traps += (t1.status == "trap") + (t2.status == "trap")
        exhausted += (t1.status == "budget-exhausted") + (t2.status == "budget-exhausted")
        if not prefix_related(t1, t2):
            if len(rep.violations) < 10:
                rep.violations.append({
                    "method": m.name,
                    "context": {"pc": pc, "lev": {**prim_lev, **ref_lev}, "reach": reach,
                                "relations": [rel_name(k) for k, b in sorted(rels.items()) if b]},
                    "values": [v1, v2],
                    "heaps": [h1.describe(), h2.describe()],
                    "outputs": [t1.low(), t2.low()],
                    "status": [t1.status, t2.status],
                })
            else:
                rep.violations.append({"method": m.name})
    rep.trials = accepted
    rep.stats = {"accepted": accepted, "attempts": attempts, "traps": traps,
                 "budget_exhausted": exhausted, "seconds": round(time.monotonic() - t0, 2)}
    return rep
