"""Symbolic abstract heap domains over a method's reference set.

Relations are aliasing ("alias", unordered) and transitive field aliasing
("freach", ordered: freach(r,s) means a field reachable from r aliases s).
Levels are Booleans, True meaning high.
"""
from dataclasses import dataclass, field

from .bdd import AssignmentSet, VarSpace
from .sir import Hierarchy, PRIM_TYPES

ALIAS = "alias"
FREACH = "freach"
RELATIONS = (ALIAS, FREACH)

YES, NO, MAYBE = "yes", "no", "maybe"

MUTANTS = {
    # UpdHpLev ignores the field-alias clause
    "lev-skip-reach",
    # UpdHpLev ignores the alias clause
    "lev-skip-alias",
    # (r=s) and (r=s.f) forget to copy the level of s into r
    "copy-skip-level",
    # the d freach r updates of UpdHpRel(r=s) and UpdHpRel(r=s.f) are dropped
    "drop-fieldalias",
}


class HeapError(Exception):
    pass


@dataclass(frozen=True)
class HeapFamily:
    name: str
    sensitive: frozenset
    insensitive: frozenset

    def __post_init__(self):
        if self.sensitive & self.insensitive:
            raise HeapError("a relation cannot be both flow-sensitive and insensitive")
        for r in self.sensitive | self.insensitive:
            if r not in RELATIONS:
                raise HeapError("unknown relation symbol %r" % r)


FAMILIES = {
    "deep": HeapFamily("deep", frozenset([ALIAS, FREACH]), frozenset()),
    "shal": HeapFamily("shal", frozenset([ALIAS]), frozenset([FREACH])),
    "dumb": HeapFamily("dumb", frozenset(), frozenset([ALIAS, FREACH])),
}
DOMAINS = ("deep", "shal", "dumb")


def family(name):
    if isinstance(name, HeapFamily):
        return name
    try:
        return FAMILIES[name]
    except KeyError:
        raise HeapError("unknown heap domain %r (expected deep, shal or dumb)" % name)


def can_relate(h, t_r, t_s, rel, same_var=False):
    """Three-valued pre-analysis answer for r rel s given declared types."""
    for t in (t_r, t_s):
        if t not in h:
            raise HeapError("unknown type %r" % t)
    if rel == ALIAS:
        if same_var:
            return YES
        return MAYBE if h.assignable(t_r, t_s) else NO
    if rel == FREACH:
        return MAYBE if h.may_reach(t_r, t_s) else NO
    raise HeapError("unknown relation %r" % rel)


def lev_name(r, copy=0):
    return ("reach(%s)" if copy == 0 else "reach'(%s)") % r


def rel_name(key, copy=0):
    kind, r, s = key
    return "%s%s(%s,%s)" % (kind, "" if copy == 0 else "'", r, s)


class HeapDomainInstance:
    """A heap family materialized over an ordered, typed reference set."""

    def __init__(self, fam, refs, hierarchy, mutant=None, hardened=False):
        self.family = family(fam)
        self.refs = [r for r, _ in refs]
        self.types = dict(refs)
        if not self.refs:
            raise HeapError("empty reference set")
        if len(set(self.refs)) != len(self.refs):
            raise HeapError("duplicate reference names")
        self.index = {r: i for i, r in enumerate(self.refs)}
        self.hierarchy = hierarchy
        if mutant is not None and mutant not in MUTANTS:
            raise HeapError("unknown mutant %r" % mutant)
        self.mutant = mutant
        self.hardened = hardened
        self.rel_vars, self.const_ff, self.const_tt = [], set(), set()
        self.answers = {}
        for key in self.all_keys():
            kind, r, s = key
            ans = can_relate(hierarchy, self.types[r], self.types[s], kind, r == s)
            self.answers[key] = ans
            if kind in self.family.sensitive:
                if ans == MAYBE:
                    self.rel_vars.append(key)
                elif ans == YES:
                    self.const_tt.add(key)
                else:
                    self.const_ff.add(key)
            elif kind in self.family.insensitive:
                if ans == NO:
                    self.const_ff.add(key)
                else:
                    self.const_tt.add(key)
        self.rel_set = set(self.rel_vars)
        self.space = None

    @property
    def name(self):
        return self.family.name

    def all_keys(self):
        out = []
        for i, r in enumerate(self.refs):
            for s in self.refs[i:]:
                out.append((ALIAS, r, s))
        for r in self.refs:
            for s in self.refs:
                out.append((FREACH, r, s))
        return out

    def key(self, kind, r, s):
        if r not in self.index or s not in self.index:
            raise HeapError("reference %r or %r not in R" % (r, s))
        if kind == ALIAS and self.index[r] > self.index[s]:
            r, s = s, r
        return (kind, r, s)

    def classify_key(self, key):
        if key in self.rel_set:
            return "var"
        if key in self.const_tt:
            return "tt"
        return "ff"

    # -- binding to a variable space --------------------------------------
    def bind(self, space=None, before_ref=None):
        """Register level and relation variables (copies h and h') in ``space``.

        Ordering: per reference, its levels (h then h') followed by every
        relation variable pairing it with an earlier reference, each relation
        immediately followed by its h' copy.
        """
        if space is None:
            space = VarSpace()
        self.space = space
        by_late = {r: [] for r in self.refs}
        for key in self.rel_vars:
            _, a, b = key
            late = a if self.index[a] > self.index[b] else b
            by_late[late].append(key)
        for r in self.refs:
            if before_ref:
                before_ref(r)
            for c in (0, 1):
                if not space.has(lev_name(r, c)):
                    space.add_bool(lev_name(r, c))
            for key in by_late[r]:
                for c in (0, 1):
                    if not space.has(rel_name(key, c)):
                        space.add_bool(rel_name(key, c))
        return self

    def _sp(self):
        if self.space is None:
            self.bind()
        return self.space

    def lev(self, r, copy=0):
        if r not in self.index:
            raise HeapError("reference %r not in R" % r)
        return self._sp().var(lev_name(r, copy))

    def rel(self, kind, r, s, copy=0):
        key = self.key(kind, r, s)
        sp = self._sp()
        c = self.classify_key(key)
        if c == "var":
            return sp.var(rel_name(key, copy))
        return sp.tt if c == "tt" else sp.ff

    def alias(self, r, s, copy=0):
        return self.rel(ALIAS, r, s, copy)

    def freach(self, r, s, copy=0):
        return self.rel(FREACH, r, s, copy)

    def level_vars(self, copy=0):
        return [lev_name(r, copy) for r in self.refs]

    def relation_vars(self, copy=0):
        return [rel_name(k, copy) for k in self.rel_vars]

    def heap_vars(self, copy=0):
        return self.level_vars(copy) + self.relation_vars(copy)

    def _assign(self, pairs):
        """Build an assignment set from (key, rhs) pairs, dropping constant targets."""
        sp = self._sp()
        items = {}
        for key, rhs in pairs:
            if key in self.rel_set:
                name = rel_name(key)
                items[name] = items[name] | rhs if name in items else rhs
        return AssignmentSet(sp, items)

    # -- specialized update functions --------------------------------------
    def upd_hp_rel(self, op):
        """op: ('kill', r) | ('copy', r, s) | ('load', r, s) | ('store', r, s)."""
        kind = op[0]
        r = op[1]
        if r not in self.index:
            raise HeapError("reference %r not in R" % r)
        R = self.refs
        al, fr = self.alias, self.freach
        K = self.key
        pairs = []
        drop = self.mutant == "drop-fieldalias"
        if kind == "kill":
            for d in R:
                if d != r:
                    pairs.append((K(ALIAS, d, r), self._sp().ff))
                    pairs.append((K(FREACH, d, r), self._sp().ff))
                pairs.append((K(FREACH, r, d), self._sp().ff))
        elif kind == "copy":
            s = op[2]
            if s == r:
                return AssignmentSet(self._sp())
            for d in R:
                if d == r:
                    continue
                pairs.append((K(ALIAS, d, r), al(d, s)))
                pairs.append((K(FREACH, r, d), fr(s, d)))
                if not drop:
                    pairs.append((K(FREACH, d, r), fr(d, s)))
            pairs.append((K(FREACH, r, r), fr(s, s)))
        elif kind == "load":
            s = op[2]
            for d in R:
                if d == r:
                    continue
                pairs.append((K(ALIAS, d, r), fr(s, d)))
                pairs.append((K(FREACH, r, d), fr(s, d)))
                if not drop:
                    rhs = al(d, s) | fr(d, s)
                    if self.hardened:
                        # d may also reach the loaded object through another name x
                        for x in R:
                            rhs = rhs | (fr(d, x) & fr(s, x))
                    pairs.append((K(FREACH, d, r), rhs))
            # the loaded object reaches itself only through a named alias x of it
            self_reach = self._sp().ff
            for x in R:
                self_reach = self_reach | (fr(s, x) & fr(x, x))
            pairs.append((K(FREACH, r, r), self_reach))
        elif kind == "store":
            s = op[2]
            for key in self.rel_vars:
                if key[0] != FREACH:
                    continue
                _, a, b = key
                rhs = fr(a, b) | ((al(a, r) | fr(a, r)) & (al(b, s) | fr(s, b)))
                pairs.append((key, rhs))
        else:
            raise HeapError("unknown relation update %r" % (op,))
        return self._assign(pairs)

    def upd_hp_lev(self, r, l, copy=0):
        sp = self._sp()
        if r not in self.index:
            raise HeapError("reference %r not in R" % r)
        items = {}
        for s in self.refs:
            cond = sp.ff
            if self.mutant != "lev-skip-alias" or s == r:
                cond = cond | self.alias(s, r)
            if self.mutant != "lev-skip-reach":
                cond = cond | self.freach(s, r)
            items[lev_name(s)] = self.lev(s) | (cond & l)
        return AssignmentSet(sp, items)

    def heap_transformer(self, op, l=None):
        """Fig. 2 generic transformers.

        op: ('null', r) | ('copy', r, s) | ('load', r, s) | ('new', r)
            | ('pstore', r) | ('rstore', r, s); mutations need a level l.
        """
        sp = self._sp()
        kind, r = op[0], op[1]
        if kind in ("new", "pstore", "rstore") and l is None:
            raise HeapError("mutation %r needs a level" % kind)
        if kind == "null":
            return self.upd_hp_rel(("kill", r)) | AssignmentSet(sp, {lev_name(r): sp.ff})
        if kind == "copy":
            s = op[2]
            lv = {} if self.mutant == "copy-skip-level" else {lev_name(r): self.lev(s)}
            return self.upd_hp_rel(("copy", r, s)) | AssignmentSet(sp, lv)
        if kind == "load":
            s = op[2]
            lv = {} if self.mutant == "copy-skip-level" else {lev_name(r): self.lev(s)}
            return self.upd_hp_rel(("load", r, s)) | AssignmentSet(sp, lv)
        if kind == "new":
            return self.upd_hp_rel(("kill", r)) | AssignmentSet(sp, {lev_name(r): l})
        if kind == "pstore":
            return self.upd_hp_lev(r, l)
        if kind == "rstore":
            return self.upd_hp_rel(("store", r, op[2])) | self.upd_hp_lev(r, l)
        raise HeapError("unknown heap operation %r" % (op,))

    def null_refs_pred(self, refs, copy=0):
        sp = self._sp()
        refs = set(refs)
        out = sp.tt
        for key in self.rel_vars:
            if key[1] in refs or key[2] in refs:
                out = out & ~sp.var(rel_name(key, copy))
        for r in self.refs:
            if r in refs:
                out = out & ~self.lev(r, copy)
        return out

    def bulk_upgrade(self):
        """h <- h': copy relations from h', join levels restricted through h' relations."""
        sp = self._sp()
        items = {}
        for key in self.rel_vars:
            items[rel_name(key)] = sp.var(rel_name(key, 1))
        for s in self.refs:
            acc = self.lev(s)
            for r in self.refs:
                acc = acc | ((self.alias(s, r, 1) | self.freach(s, r, 1)) & self.lev(r, 1))
            items[lev_name(s)] = acc
        return AssignmentSet(sp, items)

    def copy_assign(self, src, dst):
        """[heap vars of copy dst := heap vars of copy src]."""
        sp = self._sp()
        return AssignmentSet(sp, {a: sp.var(b) for a, b in zip(self.heap_vars(dst), self.heap_vars(src))})

    def swap(self):
        return self.copy_assign(0, 1) | self.copy_assign(1, 0)

    # -- reporting -----------------------------------------------------------
    def describe(self):
        def fmt(k):
            sym = "~" if k[0] == ALIAS else "->*"
            return "%s%s%s" % (k[1], sym, k[2])
        return {
            "domain": self.name,
            "refs": list(self.refs),
            "V_R": [fmt(k) for k in self.rel_vars],
            "V_ff": sorted(fmt(k) for k in self.const_ff),
            "V_tt": sorted(fmt(k) for k in self.const_tt),
        }


def instantiate(fam, refs, hierarchy, **kw):
    return HeapDomainInstance(fam, refs, hierarchy, **kw)


def hierarchy_of(classes):
    return classes if isinstance(classes, Hierarchy) else Hierarchy(classes)


def ref_types(method):
    return [(n, t) for n, t in method.params + method.locals if t not in PRIM_TYPES]
