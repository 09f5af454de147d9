"""Translation of a typed method into a symbolic control-flow graph (SCFG).

Locations are pairs (statement index, mode) with mode "njb" (not yet
joined) or "nb" (junction bypassed); only junction statements get an "nb"
location.  The exit node is index len(body).
"""
import json
import re
from dataclasses import dataclass, field

from .bdd import AssignmentSet, VarSpace
from .heap import ALIAS, FREACH, HeapDomainInstance, instantiate, ref_types
from .sir import (
    PRIM_TYPES, P_BOTTOM, TAssign, TCall, TCopy, TGoto, TIf, TLoadPrim, TLoadRef,
    TNew, TNull, TOutput, TStorePrim, TStoreRef, build_cfg, compute_cdrs,
    expr_vars, postdominator_tree,
)

NJB, NB = "njb", "nb"
OMEGA, PC, MODE, HR = "omega", "pc", "ua", "hr"


class EncodeError(Exception):
    pass


class MissingSummary(EncodeError):
    pass


class StubError(EncodeError):
    pass


def lev(x):
    return "lev(%s)" % x


# ---------------------------------------------------------------------------
# method summaries (stubs)

_TOK = re.compile(r"\s*(<=|:=|[A-Za-z_][A-Za-z_0-9.]*|[()&|!=,])")


def _tokens(text):
    out, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOK.match(text, pos)
        if not m:
            raise StubError("bad character in formula %r at %d" % (text, pos))
        out.append(m.group(1))
        pos = m.end()
    return out


class _FormulaParser:
    """low | high | true | false | pc | lev(x) | reach(r) | alias(r,s) | freach(r,s)
    | !f | f & f | f | f | f = f | f <= f | ite(c,a,b) | join(a,b) | (f)"""

    def __init__(self, text):
        self.toks = _tokens(text)
        self.i = 0
        self.text = text

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, want=None):
        t = self.peek()
        if t is None or (want is not None and t != want):
            raise StubError("expected %r in formula %r" % (want or "token", self.text))
        self.i += 1
        return t

    def parse(self):
        f = self.disj()
        if self.peek() is not None:
            raise StubError("trailing input %r in formula %r" % (self.peek(), self.text))
        return f

    def disj(self):
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = ("or", f, self.conj())
        return f

    def conj(self):
        f = self.cmp()
        while self.peek() == "&":
            self.take()
            f = ("and", f, self.cmp())
        return f

    def cmp(self):
        f = self.unary()
        if self.peek() in ("=", "<="):
            op = self.take()
            f = ("eq" if op == "=" else "le", f, self.unary())
        return f

    def unary(self):
        if self.peek() == "!":
            self.take()
            return ("not", self.unary())
        return self.atom()

    def args(self, n):
        self.take("(")
        out = []
        for k in range(n):
            if k:
                self.take(",")
            out.append(self.take())
        self.take(")")
        return out

    def fargs(self, n):
        self.take("(")
        out = []
        for k in range(n):
            if k:
                self.take(",")
            out.append(self.disj())
        self.take(")")
        return out

    def atom(self):
        t = self.take()
        if t in ("low", "false"):
            return ("const", False)
        if t in ("high", "true"):
            return ("const", True)
        if t == "pc":
            return ("pc",)
        if t in ("lev", "reach"):
            return (t, self.args(1)[0])
        if t in ("alias", "freach"):
            a, b = self.args(2)
            return (t, a, b)
        if t == "ite":
            c, a, b = self.fargs(3)
            return ("ite", c, a, b)
        if t == "join":
            a, b = self.fargs(2)
            return ("or", a, b)
        if t == "(":
            f = self.disj()
            self.take(")")
            return f
        raise StubError("unknown symbol %r in formula %r" % (t, self.text))


def parse_formula(text):
    return _FormulaParser(text).parse()


def formula_names(f):
    tag = f[0]
    if tag in ("lev", "reach"):
        return {f[1]}
    if tag in ("alias", "freach"):
        return {f[1], f[2]}
    out = set()
    for x in f[1:]:
        if isinstance(x, tuple):
            out |= formula_names(x)
    return out


@dataclass
class Summary:
    cls: str
    method: str
    formals: list        # [(name, type)] excluding the receiver `this`
    guard: tuple
    effect: list         # [(lhs formula, rhs formula)]
    key: str = ""


@dataclass
class SummaryTable:
    entries: dict = field(default_factory=dict)   # (cls, method) -> [Summary]

    def add(self, s):
        self.entries.setdefault((s.cls, s.method), []).append(s)

    def lookup(self, cls, method, arity):
        return [s for s in self.entries.get((cls, method), []) if len(s.formals) == arity]

    def __len__(self):
        return sum(len(v) for v in self.entries.values())


_KEY = re.compile(r"^\s*([A-Za-z_]\w*)\.([A-Za-z_]\w*)\s*\((.*)\)\s*$")


def parse_summary(key, body):
    m = _KEY.match(key)
    if not m:
        raise StubError("malformed stub key %r (expected Class.method(type name, ...))" % key)
    cls, meth, sig = m.groups()
    formals = []
    for part in [p.strip() for p in sig.split(",") if p.strip()]:
        bits = part.split()
        if len(bits) != 2:
            raise StubError("malformed formal %r in %r" % (part, key))
        formals.append((bits[1], bits[0]))
    names = {n for n, _ in formals} | {"this"}
    if len(names) != len(formals) + 1:
        raise StubError("duplicate formal names in %r" % key)
    if not isinstance(body, dict):
        raise StubError("stub %r must be an object" % key)
    guard = parse_formula(body.get("guard", "true"))
    eff = body.get("effect", [])
    if isinstance(eff, dict):
        eff = ["%s := %s" % kv for kv in eff.items()]
    effect = []
    for line in eff:
        if ":=" not in line:
            raise StubError("effect %r lacks ':='" % line)
        lhs, rhs = line.split(":=", 1)
        lf = parse_formula(lhs)
        if lf[0] not in ("lev", "reach", "alias", "freach"):
            raise StubError("effect target %r is not a level or relation" % lhs.strip())
        effect.append((lf, parse_formula(rhs)))
    used = formula_names(guard)
    for lf, rf in effect:
        used |= formula_names(lf) | formula_names(rf)
    bad = used - names
    if bad:
        raise StubError("stub %r mentions non-formal variable(s) %s" % (key, ", ".join(sorted(bad))))
    return Summary(cls, meth, formals, guard, effect, key)


def load_summaries(path_or_dict):
    if path_or_dict is None:
        return SummaryTable()
    if isinstance(path_or_dict, dict):
        data = path_or_dict
    else:
        try:
            with open(path_or_dict) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as e:
            raise StubError("cannot read stub file %s: %s" % (path_or_dict, e))
    table = SummaryTable()
    for key, body in data.items():
        table.add(parse_summary(key, body))
    return table


# ---------------------------------------------------------------------------
# the SCFG

@dataclass
class Scfg:
    space: VarSpace
    locations: list
    trans: dict          # loc -> [(guard, AssignmentSet, target)]
    init: tuple
    x0: object
    inputs: list
    invariant: dict      # loc -> Pred (absent = tt)
    method: object = None
    inst: HeapDomainInstance = None
    cdrs: object = None
    cfg: object = None
    warnings: list = field(default_factory=list)

    def state_vars(self):
        return [n for n in self.space.order if n not in self.inputs]

    def state_bits(self):
        return len(self.space.bits_of(self.state_vars()))

    def inv(self, loc):
        return self.invariant.get(loc, self.space.tt)

    def preds(self):
        out = {l: set() for l in self.locations}
        for l, ts in self.trans.items():
            for _, _, t in ts:
                out[t].add(l)
        return out


@dataclass
class ValidationReport:
    ok: bool
    violations: list
    locations: int
    statebits: int


def validate_scfg(s):
    bad = []
    sp = s.space
    locs = set(s.locations)
    for l in s.locations:
        ts = s.trans.get(l, [])
        if not ts:
            bad.append("%s: no outgoing transition" % (l,))
            continue
        union = sp.ff
        for i, (g, _, t) in enumerate(ts):
            if t not in locs:
                bad.append("%s: transition %d targets unknown location %s" % (l, i, t))
            for j in range(i):
                if not (g & ts[j][0]).is_false():
                    bad.append("%s: guards %d and %d overlap (nondeterminism)" % (l, j, i))
            union = union | g
        if not union.is_true():
            bad.append("%s: guards do not cover every state (not reactive)" % (l,))
    return ValidationReport(not bad, bad, len(s.locations), s.state_bits())


class Encoder:
    def __init__(self, m, domain="deep", summaries=None, assume_worst=False,
                 receiver_level=False, hardened=False, mutant=None, cfg=None):
        self.m = m
        self.summaries = summaries or SummaryTable()
        self.assume_worst = assume_worst
        # join the receiver's own level into heap mutation levels
        self.receiver_level = receiver_level or hardened
        self.cfg = cfg or build_cfg(m)
        self.pdt = postdominator_tree(self.cfg)
        self.cdrs = compute_cdrs(self.cfg, self.pdt)
        sp = self.space = VarSpace()
        # declaration order, used when rendering formulas
        sp.decl = {n: i for i, (n, _) in enumerate(m.params + m.locals)}
        self.omega = sp.add_bool(OMEGA)
        self.pc = sp.add_bool(PC)
        self.ua = sp.add_bool(MODE)
        sp.add_enum(HR, self.cdrs.count + 1)
        for v in m.prims:
            sp.add_bool(lev(v))
        refs = ref_types(m)
        if isinstance(domain, HeapDomainInstance):
            self.inst = domain
        elif refs:
            self.inst = instantiate(domain, refs, m.hierarchy, mutant=mutant, hardened=hardened)
        else:
            self.inst = None
        if self.inst is not None:
            self.inst.bind(sp, before_ref=lambda r: sp.add_bool(lev(r)))

    # -- helpers -------------------------------------------------------------
    def lv(self, x):
        return self.space.var(lev(x))

    def expr_level(self, e):
        out = self.space.ff
        for x in sorted(expr_vars(e)):
            out = out | self.lv(x)
        return out

    def mode_assign(self, x, l):
        """x :=_ua l  is  x := (if ua then x else l) join pc."""
        return AssignmentSet(self.space, {lev(x): self.ua.ite(self.lv(x), l) | self.pc})

    def mode_level(self, l):
        """[l]_ua = (if ua then low else l) join pc."""
        return self.ua.ite(self.space.ff, l) | self.pc

    def heap(self, op, l=None):
        return self.inst.heap_transformer(op, l)

    def reach(self, r):
        return self.inst.lev(r)

    # -- per statement ----------------------------------------------------------
    def assign_effect(self, s):
        sp = self.space
        if isinstance(s, TAssign):
            return self.mode_assign(s.v, self.expr_level(s.e))
        if isinstance(s, TLoadPrim):
            return self.mode_assign(s.v, self.lv(s.r) | self.reach(s.r))
        if isinstance(s, TLoadRef):
            return self.mode_assign(s.r, self.lv(s.s) | self.reach(s.s)) | self.heap(("load", s.r, s.s))
        if isinstance(s, TCopy):
            return self.mode_assign(s.r, self.lv(s.s)) | self.heap(("copy", s.r, s.s))
        if isinstance(s, TNew):
            return self.mode_assign(s.r, sp.ff) | self.heap(("new", s.r), self.pc)
        if isinstance(s, TNull):
            return self.mode_assign(s.r, sp.ff) | self.heap(("null", s.r))
        if isinstance(s, TStorePrim):
            l = self.expr_level(s.e)
            if self.receiver_level:
                l = l | self.lv(s.r)
            return self.heap(("pstore", s.r), self.mode_level(l))
        if isinstance(s, TStoreRef):
            l = self.lv(s.s) | self.reach(s.s)
            if self.receiver_level:
                l = l | self.lv(s.r)
            return self.heap(("rstore", s.r, s.s), self.mode_level(l))
        raise EncodeError("not an assignment: %r" % (s,))

    def sink_invariant(self, s):
        if s.level == "high":
            return self.space.tt
        bad = self.lv(s.x) | self.pc
        if s.is_ref:
            bad = bad | self.reach(s.x)
        return ~bad

    def call_contract(self, s):
        """Returns (guard, effect) for r.m(w) with pc replaced by pc join r."""
        sp = self.space
        h = self.m.hierarchy
        recv_t = self.m.types[s.r]
        pc_call = self.pc | self.lv(s.r)
        actuals = [s.r] + list(s.args)
        if self.assume_worst and not self._find_summaries(recv_t, s):
            eff = AssignmentSet(sp)
            refs = [x for x in actuals if self.m.is_ref(x)]
            for x in refs:
                for y in refs:
                    eff = eff | self.inst.upd_hp_rel(("store", x, y))
            for x in refs:
                eff = eff | self.inst.upd_hp_lev(x, sp.tt)
            # every relation among the actuals may now hold
            pairs = [(k, x, y) for k in (ALIAS, FREACH) for x in refs for y in refs]
            eff = eff | self.inst._assign([(self.inst.key(*p), sp.tt) for p in pairs])
            return sp.tt, eff
        sums = self._find_summaries(recv_t, s)
        if not sums:
            raise MissingSummary("no summary for %s.%s/%d (receiver %s)" % (recv_t, s.m, len(s.args), s.r))
        guard, eff = sp.tt, AssignmentSet(sp)
        for su in sums:
            env = {"this": s.r}
            for (fname, ftype), a in zip(su.formals, s.args):
                at = self.m.types[a]
                if (ftype in PRIM_TYPES) != (at in PRIM_TYPES):
                    raise EncodeError("argument %s does not match formal %s of %s" % (a, fname, su.key))
                env[fname] = a
            guard = guard & self._formula(su.guard, env, pc_call)
            for lf, rf in su.effect:
                rhs = self._formula(rf, env, pc_call)
                tgt = self._target(lf, env)
                if tgt is not None:
                    eff = eff | AssignmentSet(sp, {tgt: rhs})
        return guard, eff

    def _find_summaries(self, recv_t, s):
        h = self.m.hierarchy
        arity = len(s.args)
        out = []
        for c in sorted(h.subtypes(recv_t)):
            out.extend(self.summaries.lookup(c, s.m, arity))
        if not self.summaries.lookup(recv_t, s.m, arity):
            # inherited implementation: nearest ancestor with a summary
            for a in h.ancestors(recv_t):
                found = self.summaries.lookup(a, s.m, arity)
                if found:
                    out.extend(found)
                    break
        seen, uniq = set(), []
        for su in out:
            if id(su) not in seen:
                seen.add(id(su))
                uniq.append(su)
        return uniq

    def _formula(self, f, env, pc_val):
        sp = self.space
        tag = f[0]
        if tag == "const":
            return sp.const(f[1])
        if tag == "pc":
            return pc_val
        if tag == "lev":
            return self.lv(env[f[1]])
        if tag == "reach":
            x = env[f[1]]
            if not self.m.is_ref(x):
                raise StubError("reach() of primitive %s" % f[1])
            return self.reach(x)
        if tag in ("alias", "freach"):
            a, b = env[f[1]], env[f[2]]
            if not (self.m.is_ref(a) and self.m.is_ref(b)):
                raise StubError("relation over a primitive argument")
            return self.inst.rel(tag, a, b)
        sub = [self._formula(x, env, pc_val) for x in f[1:]]
        if tag == "not":
            return ~sub[0]
        if tag == "and":
            return sub[0] & sub[1]
        if tag == "or":
            return sub[0] | sub[1]
        if tag == "eq":
            return sub[0].equiv(sub[1])
        if tag == "le":
            return sub[0].implies(sub[1])
        if tag == "ite":
            return sub[0].ite(sub[1], sub[2])
        raise StubError("bad formula node %r" % (tag,))

    def _target(self, lf, env):
        tag = lf[0]
        if tag == "lev":
            return lev(env[lf[1]])
        if tag == "reach":
            x = env[lf[1]]
            if not self.m.is_ref(x):
                raise StubError("reach() of primitive %s" % lf[1])
            return "reach(%s)" % x
        key = self.inst.key(tag, env[lf[1]], env[lf[2]])
        if key in self.inst.rel_set:
            return "%s(%s,%s)" % key
        return None      # constant target: dropped

    # -- whole method -------------------------------------------------------------
    def encode(self):
        m, g, sp = self.m, self.cfg, self.space
        cd = self.cdrs
        trans, inv = {}, {}
        locs = []
        exit_ = g.exit
        empty = AssignmentSet(sp)

        def stmt_loc(i):
            return (i, NB) if i in cd.junc_inv else (i, NJB)

        for i in g.nodes:
            if i in cd.junc_inv:
                locs.append((i, NJB))
                locs.append((i, NB))
                J = sorted(cd.junc_inv[i])
                in_j = sp.enum_in(HR, J)
                ts = [(~in_j, empty, (i, NB))]
                for rho in J:
                    start = AssignmentSet(sp, {MODE: sp.tt}) | self.inst_swap()
                    ts.append((~self.ua & sp.enum_eq(HR, rho), start, (cd.regions[rho].inducing, NJB)))
                end = (sp.enum_assign(HR, P_BOTTOM) | AssignmentSet(sp, {MODE: sp.ff, PC: sp.ff})
                       | self.inst_bulk())
                ts.append((self.ua & in_j, end, (i, NB)))
                trans[(i, NJB)] = ts
            else:
                locs.append((i, NJB))
            here = stmt_loc(i)
            if i == exit_:
                trans[here] = [(sp.tt, empty, here)]
                continue
            s = m.body[i]
            nxt = [(x, NJB) for x in g.succ[i]]
            if isinstance(s, TIf):
                rho = cd.cdr_of[i]
                e = self.expr_level(s.e)
                high = ~self.ua & e & ~self.pc
                low = (~self.ua & e.implies(self.pc)) | self.ua
                brch = (sp.enum_assign(HR, rho) | AssignmentSet(sp, {PC: sp.tt})
                        | self.inst_save())
                taken, fall = nxt
                trans[here] = [
                    (self.omega & high, brch, taken),
                    (self.omega & low, empty, taken),
                    (~self.omega & high, brch, fall),
                    (~self.omega & low, empty, fall),
                ]
            elif isinstance(s, TGoto):
                trans[here] = [(sp.tt, empty, nxt[0])]
            elif isinstance(s, TOutput):
                trans[here] = [(sp.tt, empty, nxt[0])]
                inv[here] = self.sink_invariant(s)
            elif isinstance(s, TCall):
                grd, eff = self.call_contract(s)
                trans[here] = [(sp.tt, eff, nxt[0])]
                if not grd.is_true():
                    inv[here] = grd
            else:
                trans[here] = [(sp.tt, self.assign_effect(s), nxt[0])]
        scfg = Scfg(sp, locs, trans, (g.entry, NJB), self.initial(), [OMEGA], inv,
                    method=m, inst=self.inst, cdrs=cd, cfg=g, warnings=list(g.warnings))
        return scfg, inv

    def inst_swap(self):
        return self.inst.swap() if self.inst else AssignmentSet(self.space)

    def inst_save(self):
        return self.inst.copy_assign(0, 1) if self.inst else AssignmentSet(self.space)

    def inst_bulk(self):
        return self.inst.bulk_upgrade() if self.inst else AssignmentSet(self.space)

    def initial(self):
        sp = self.space
        x0 = ~self.ua & sp.enum_eq(HR, P_BOTTOM)
        local_names = [n for n, _ in self.m.locals]
        for n, t in self.m.locals:
            x0 = x0 & ~self.lv(n)
        if self.inst is not None:
            local_refs = [n for n, t in self.m.locals if t not in PRIM_TYPES]
            x0 = x0 & self.inst.null_refs_pred(local_refs)
            for name in self.inst.heap_vars(1):
                x0 = x0 & ~sp.var(name)
        return x0


def encode_method(m, domain="deep", summaries=None, **kw):
    """Returns (Scfg, invariant map)."""
    return Encoder(m, domain, summaries, **kw).encode()
