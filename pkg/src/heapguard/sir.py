"""Frontend for the security IR: parser, printer, type checker, control-flow
graph, postdominators and control-dependence regions.

Surface syntax::

    class B extends A { int fi; A fa; }
    method m(A a, B b, int i) {
        local B r;
        L3: r = new B;
        a.fi = i;
        r.fa = a;
        output low(b);
    }
"""
import re
from dataclasses import dataclass, field

PRIM_TYPES = ("int", "bool")
KEYWORDS = {"class", "extends", "method", "local", "new", "null", "goto", "if",
            "output", "low", "high", "true", "false"}


class SirError(Exception):
    def __init__(self, msg, line=None, col=None):
        self.msg = msg
        self.line = line
        self.col = col
        where = "" if line is None else "%d:%d: " % (line, col or 0)
        super().__init__(where + msg)


class SirSyntaxError(SirError):
    pass


class SirTypeError(SirError):
    pass


class IrreducibleFlow(SirError):
    pass


# ---------------------------------------------------------------------------
# expressions

@dataclass(frozen=True)
class Lit:
    value: object  # int or bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class RefEq:
    left: str
    right: str


@dataclass(frozen=True)
class FieldRef:
    base: str
    field: str


@dataclass(frozen=True)
class NewExpr:
    cls: str


@dataclass(frozen=True)
class NullExpr:
    pass


def expr_vars(e):
    """Variables read by an expression (references included for r == s)."""
    if isinstance(e, Var):
        return [e.name]
    if isinstance(e, Unary):
        return expr_vars(e.arg)
    if isinstance(e, Binary):
        return expr_vars(e.left) + expr_vars(e.right)
    if isinstance(e, RefEq):
        return [e.left, e.right]
    return []


# ---------------------------------------------------------------------------
# raw statements (as parsed)

@dataclass
class Stmt:
    labels: tuple = field(default=(), kw_only=True)
    pos: tuple = field(default=(0, 0), compare=False, kw_only=True)


@dataclass
class AssignStmt(Stmt):
    target: str
    value: object


@dataclass
class StoreStmt(Stmt):
    base: str
    field: str
    value: object


@dataclass
class CallStmt(Stmt):
    recv: str
    name: str
    args: tuple


@dataclass
class GotoStmt(Stmt):
    label: str


@dataclass
class IfStmt(Stmt):
    cond: object
    label: str


@dataclass
class OutputStmt(Stmt):
    level: str  # "low" | "high"
    var: str


@dataclass
class ClassDecl:
    name: str
    prim_fields: list
    ref_fields: list
    parent: object = None
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass
class Method:
    name: str
    params: list
    locals: list
    body: list
    pos: tuple = field(default=(0, 0), compare=False)

    def label_index(self):
        out = {}
        for i, s in enumerate(self.body):
            for lab in s.labels:
                out[lab] = i
        return out


@dataclass
class Program:
    classes: list
    methods: list

    def cls(self, name):
        for c in self.classes:
            if c.name == name:
                return c
        return None

    def method(self, name):
        for m in self.methods:
            if m.name == name:
                return m
        return None


# ---------------------------------------------------------------------------
# lexer

TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z_0-9$]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*/<>!=;:,.(){}])
""", re.VERBOSE)


def tokenize(src):
    toks = []
    line, col, i = 1, 1, 0
    while i < len(src):
        m = TOKEN_RE.match(src, i)
        if not m:
            raise SirSyntaxError("unexpected character %r" % src[i], line, col)
        kind = m.lastgroup
        text = m.group(kind)
        if kind == "nl":
            line += 1
            col = 1
        else:
            if kind not in ("ws", "comment"):
                toks.append((kind, text, line, col))
            col += len(text)
        i = m.end()
    toks.append(("eof", "", line, col))
    return toks


class Parser:
    def __init__(self, src):
        self.toks = tokenize(src)
        self.i = 0

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise SirSyntaxError(msg, tok[2], tok[3])

    def expect(self, text):
        t = self.next()
        if t[1] != text:
            self.i -= 1
            self.error("expected %r but found %r" % (text, t[1] or "end of input"))
        return t

    def ident(self, what="identifier"):
        t = self.next()
        if t[0] != "id" or t[1] in KEYWORDS:
            self.i -= 1
            self.error("expected %s but found %r" % (what, t[1] or "end of input"))
        return t[1]

    def at(self, text):
        return self.peek()[1] == text and self.peek()[0] != "eof"

    # -- top level
    def program(self):
        classes, methods = [], []
        while self.peek()[0] != "eof":
            if self.at("class"):
                classes.append(self.class_decl())
            elif self.at("method"):
                methods.append(self.method_decl())
            else:
                self.error("expected 'class' or 'method'")
        return Program(classes, methods)

    def class_decl(self):
        t = self.expect("class")
        name = self.ident("class name")
        parent = None
        if self.at("extends"):
            self.next()
            parent = self.ident("class name")
        self.expect("{")
        prims, refs = [], []
        while not self.at("}"):
            ty = self.ident_or_prim()
            names = [self.ident("field name")]
            while self.at(","):
                self.next()
                names.append(self.ident("field name"))
            self.expect(";")
            for n in names:
                (prims if ty in PRIM_TYPES else refs).append((n, ty))
        self.expect("}")
        return ClassDecl(name, prims, refs, parent, pos=(t[2], t[3]))

    def ident_or_prim(self):
        t = self.next()
        if t[0] != "id" or (t[1] in KEYWORDS):
            self.i -= 1
            self.error("expected a type but found %r" % (t[1] or "end of input"))
        return t[1]

    def method_decl(self):
        t = self.expect("method")
        name = self.ident("method name")
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                ty = self.ident_or_prim()
                params.append((self.ident("parameter name"), ty))
                if self.at(","):
                    self.next()
                    continue
                break
        self.expect(")")
        self.expect("{")
        locs = []
        while self.at("local"):
            self.next()
            ty = self.ident_or_prim()
            locs.append((self.ident("local name"), ty))
            while self.at(","):
                self.next()
                locs.append((self.ident("local name"), ty))
            self.expect(";")
        body = []
        while not self.at("}"):
            if self.peek()[0] == "eof":
                self.error("unterminated method body")
            body.append(self.statement())
        end = self.expect("}")
        if not body:
            raise SirSyntaxError("method %r has an empty body" % name, end[2], end[3])
        m = Method(name, params, locs, body, pos=(t[2], t[3]))
        seen = {}
        for s in body:
            for lab in s.labels:
                if lab in seen:
                    raise SirSyntaxError("duplicate label %r" % lab, *s.pos)
                seen[lab] = s
        for s in body:
            if isinstance(s, (GotoStmt, IfStmt)) and s.label not in seen:
                raise SirSyntaxError("unresolved label %r" % s.label, *s.pos)
        return m

    def statement(self):
        labels = []
        start = self.peek()
        while self.peek()[0] == "id" and self.peek(1)[1] == ":" and self.peek()[1] not in KEYWORDS:
            labels.append(self.next()[1])
            self.next()
        t = self.peek()
        pos = (t[2], t[3])
        if self.at("goto"):
            self.next()
            s = GotoStmt(self.ident("label"))
        elif self.at("if"):
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.expect("goto")
            s = IfStmt(cond, self.ident("label"))
        elif self.at("output"):
            self.next()
            lv = self.next()
            if lv[1] not in ("low", "high"):
                self.i -= 1
                self.error("expected 'low' or 'high'")
            self.expect("(")
            v = self.ident("variable")
            self.expect(")")
            s = OutputStmt(lv[1], v)
        else:
            base = self.ident("statement")
            if self.at("."):
                self.next()
                member = self.ident("field or method name")
                if self.at("("):
                    self.next()
                    args = []
                    if not self.at(")"):
                        args.append(self.ident("argument"))
                        while self.at(","):
                            self.next()
                            args.append(self.ident("argument"))
                    self.expect(")")
                    s = CallStmt(base, member, tuple(args))
                else:
                    self.expect("=")
                    s = StoreStmt(base, member, self.rhs())
            else:
                self.expect("=")
                s = AssignStmt(base, self.rhs())
        self.expect(";")
        s.labels = tuple(labels)
        s.pos = pos if not labels else (start[2], start[3])
        return s

    def rhs(self):
        if self.at("new"):
            self.next()
            return NewExpr(self.ident("class name"))
        if self.at("null"):
            self.next()
            return NullExpr()
        if self.peek()[0] == "id" and self.peek(1)[1] == "." and self.peek()[1] not in KEYWORDS:
            base = self.next()[1]
            self.next()
            e = FieldRef(base, self.ident("field name"))
            return e
        return self.expr()

    # precedence climbing
    BINOPS = [("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*", "/")]

    def expr(self, prec=0):
        if prec == len(self.BINOPS):
            return self.unary()
        left = self.expr(prec + 1)
        while self.peek()[0] == "op" and self.peek()[1] in self.BINOPS[prec]:
            op = self.next()[1]
            right = self.expr(prec + 1)
            left = Binary(op, left, right)
        return left

    def unary(self):
        if self.at("-") or self.at("!"):
            op = self.next()[1]
            return Unary(op, self.unary())
        return self.atom()

    def atom(self):
        t = self.next()
        if t[0] == "num":
            return Lit(int(t[1]))
        if t[1] == "true":
            return Lit(True)
        if t[1] == "false":
            return Lit(False)
        if t[1] == "(":
            e = self.expr()
            self.expect(")")
            return e
        if t[0] == "id" and t[1] not in KEYWORDS:
            return Var(t[1])
        self.i -= 1
        self.error("unexpected %r in expression" % (t[1] or "end of input"))


def parse_program(source):
    return Parser(source).program()


# ---------------------------------------------------------------------------
# printer

def expr_text(e, prec=0):
    if isinstance(e, Lit):
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, RefEq):
        return "(%s == %s)" % (e.left, e.right)
    if isinstance(e, Unary):
        return e.op + expr_text(e.arg, 99)
    if isinstance(e, Binary):
        return "(%s %s %s)" % (expr_text(e.left), e.op, expr_text(e.right))
    if isinstance(e, FieldRef):
        return "%s.%s" % (e.base, e.field)
    if isinstance(e, NewExpr):
        return "new " + e.cls
    if isinstance(e, NullExpr):
        return "null"
    raise TypeError(e)


def stmt_text(s):
    if isinstance(s, AssignStmt):
        body = "%s = %s;" % (s.target, expr_text(s.value))
    elif isinstance(s, StoreStmt):
        body = "%s.%s = %s;" % (s.base, s.field, expr_text(s.value))
    elif isinstance(s, CallStmt):
        body = "%s.%s(%s);" % (s.recv, s.name, ", ".join(s.args))
    elif isinstance(s, GotoStmt):
        body = "goto %s;" % s.label
    elif isinstance(s, IfStmt):
        body = "if (%s) goto %s;" % (expr_text(s.cond), s.label)
    elif isinstance(s, OutputStmt):
        body = "output %s(%s);" % (s.level, s.var)
    else:
        body = typed_text(s)
    return "".join(lab + ": " for lab in s.labels) + body


def program_text(p):
    out = []
    for c in p.classes:
        ext = " extends " + c.parent if c.parent else ""
        fields = ["%s %s;" % (t, n) for n, t in c.prim_fields] + ["%s %s;" % (t, n) for n, t in c.ref_fields]
        out.append("class %s%s { %s }" % (c.name, ext, " ".join(fields)))
    for m in p.methods:
        out.append(method_text(m))
    return "\n".join(out) + "\n"


def method_text(m):
    params = ", ".join("%s %s" % (t, n) for n, t in m.params)
    lines = ["method %s(%s) {" % (m.name, params)]
    for n, t in m.locals:
        lines.append("  local %s %s;" % (t, n))
    for s in m.body:
        lines.append("  " + stmt_text(s))
    lines.append("}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# typed statements: the thirteen forms

@dataclass(frozen=True)
class TAssign:      # v = e
    v: str
    e: object


@dataclass(frozen=True)
class TLoadPrim:    # v = r.fp
    v: str
    r: str
    f: str


@dataclass(frozen=True)
class TStorePrim:   # r.fp = e
    r: str
    f: str
    e: object


@dataclass(frozen=True)
class TCopy:        # r = s
    r: str
    s: str


@dataclass(frozen=True)
class TLoadRef:     # r = s.fr
    r: str
    s: str
    f: str


@dataclass(frozen=True)
class TStoreRef:    # r.fr = s
    r: str
    f: str
    s: str


@dataclass(frozen=True)
class TNew:         # r = new C
    r: str
    cls: str


@dataclass(frozen=True)
class TNull:        # r = null
    r: str


@dataclass(frozen=True)
class TCall:        # r.m(w)
    r: str
    m: str
    args: tuple


@dataclass(frozen=True)
class TGoto:
    label: str


@dataclass(frozen=True)
class TIf:
    e: object
    label: str


@dataclass(frozen=True)
class TOutput:
    level: str
    x: str
    is_ref: bool


def typed_text(s):
    if isinstance(s, TAssign):
        return "%s = %s;" % (s.v, expr_text(s.e))
    if isinstance(s, TLoadPrim):
        return "%s = %s.%s;" % (s.v, s.r, s.f)
    if isinstance(s, TStorePrim):
        return "%s.%s = %s;" % (s.r, s.f, expr_text(s.e))
    if isinstance(s, TCopy):
        return "%s = %s;" % (s.r, s.s)
    if isinstance(s, TLoadRef):
        return "%s = %s.%s;" % (s.r, s.s, s.f)
    if isinstance(s, TStoreRef):
        return "%s.%s = %s;" % (s.r, s.f, s.s)
    if isinstance(s, TNew):
        return "%s = new %s;" % (s.r, s.cls)
    if isinstance(s, TNull):
        return "%s = null;" % s.r
    if isinstance(s, TCall):
        return "%s.%s(%s);" % (s.r, s.m, ", ".join(s.args))
    if isinstance(s, TGoto):
        return "goto %s;" % s.label
    if isinstance(s, TIf):
        return "if (%s) goto %s;" % (expr_text(s.e), s.label)
    if isinstance(s, TOutput):
        return "output %s(%s);" % (s.level, s.x)
    raise TypeError(s)


class Hierarchy:
    """Class table queries: subtyping, fields, reference reachability."""

    def __init__(self, classes):
        self.classes = {c.name: c for c in classes}
        self._reach = None

    def __contains__(self, name):
        return name in self.classes

    def ancestors(self, name):
        out = []
        seen = set()
        while name is not None and name not in seen:
            seen.add(name)
            out.append(name)
            c = self.classes.get(name)
            name = c.parent if c else None
        return out

    def is_subtype(self, sub, sup):
        return sup in self.ancestors(sub)

    def subtypes(self, name):
        return {c for c in self.classes if self.is_subtype(c, name)}

    def assignable(self, a, b):
        return self.is_subtype(a, b) or self.is_subtype(b, a)

    def prim_fields(self, name):
        out = {}
        for c in reversed(self.ancestors(name)):
            for f, t in self.classes[c].prim_fields:
                out[f] = t
        return out

    def ref_fields(self, name):
        out = {}
        for c in reversed(self.ancestors(name)):
            for f, t in self.classes[c].ref_fields:
                out[f] = t
        return out

    def field_type(self, cls, f):
        p = self.prim_fields(cls)
        if f in p:
            return p[f]
        return self.ref_fields(cls).get(f)

    def points_to(self, name):
        """Classes an object of static type `name` may point to in one field step."""
        out = set()
        for c in self.subtypes(name):
            for t in self.ref_fields(c).values():
                out |= self.subtypes(t)
        return out

    def reach_closure(self):
        """Transitive closure of the one-step field relation between classes."""
        if self._reach is None:
            step = {c: self.points_to(c) for c in self.classes}
            reach = {}
            for c in self.classes:
                seen = set()
                todo = list(step[c])
                while todo:
                    d = todo.pop()
                    if d in seen:
                        continue
                    seen.add(d)
                    todo.extend(step[d])
                reach[c] = seen
            self._reach = reach
        return self._reach

    def may_reach(self, a, b):
        """Can an object of static type a reach, through >= 1 field, one of static type b?"""
        r = self.reach_closure()[a]
        return bool(r & self.subtypes(b))


@dataclass
class TypedMethod:
    name: str
    params: list          # [(name, type)]
    locals: list
    body: list            # typed statements
    labels: dict          # label -> index
    types: dict           # var -> type
    hierarchy: Hierarchy
    source: Method = None

    def is_ref(self, x):
        return self.types[x] not in PRIM_TYPES

    @property
    def refs(self):
        return [n for n, t in self.params + self.locals if t not in PRIM_TYPES]

    @property
    def prims(self):
        return [n for n, t in self.params + self.locals if t in PRIM_TYPES]

    @property
    def param_names(self):
        return [n for n, _ in self.params]

    def target(self, label):
        return self.labels[label]


@dataclass
class TypedProgram:
    program: Program
    hierarchy: Hierarchy
    methods: list

    def method(self, name):
        for m in self.methods:
            if m.name == name:
                return m
        return None


def _check_classes(p):
    names = {}
    for c in p.classes:
        if c.name in names:
            raise SirTypeError("duplicate class %r" % c.name, *c.pos)
        if c.name in PRIM_TYPES:
            raise SirTypeError("class may not be named %r" % c.name, *c.pos)
        names[c.name] = c
    for c in p.classes:
        seen = set()
        for f, t in c.prim_fields + c.ref_fields:
            if f in seen:
                raise SirTypeError("duplicate field %r in class %r" % (f, c.name), *c.pos)
            seen.add(f)
            if t not in PRIM_TYPES and t not in names:
                raise SirTypeError("unknown type %r of field %s.%s" % (t, c.name, f), *c.pos)
        if c.parent is not None and c.parent not in names:
            raise SirTypeError("unknown parent class %r" % c.parent, *c.pos)
    for c in p.classes:
        seen = set()
        n = c.name
        while n is not None:
            if n in seen:
                raise SirTypeError("cyclic inheritance through %r" % c.name, *c.pos)
            seen.add(n)
            n = names[n].parent
    h = Hierarchy(p.classes)
    for c in p.classes:
        inherited = {}
        for a in h.ancestors(c.parent) if c.parent else []:
            for f, t in names[a].prim_fields + names[a].ref_fields:
                inherited[f] = t
        for f, t in c.prim_fields + c.ref_fields:
            if f in inherited:
                raise SirTypeError("field %r of %r shadows an inherited field" % (f, c.name), *c.pos)
    return h


def typecheck(p):
    h = _check_classes(p)
    seen = set()
    out = []
    for m in p.methods:
        if m.name in seen:
            raise SirTypeError("duplicate method %r" % m.name, *m.pos)
        seen.add(m.name)
        out.append(typecheck_method(m, h))
    return TypedProgram(p, h, out)


def typecheck_method(m, h):
    types = {}
    for n, t in m.params + m.locals:
        if n in types:
            raise SirTypeError("variable %r declared twice in %r" % (n, m.name), *m.pos)
        if t not in PRIM_TYPES and t not in h:
            raise SirTypeError("unknown type %r of %r" % (t, n), *m.pos)
        types[n] = t
    labels = m.label_index()
    body = []
    for s in m.body:
        body.append(_type_stmt(s, types, h, labels))
    return TypedMethod(m.name, list(m.params), list(m.locals), body, labels, types, h, m)


def _type_stmt(s, types, h, labels):
    pos = s.pos

    def err(msg):
        raise SirTypeError(msg, *pos)

    def lookup(x):
        if x not in types:
            err("unbound identifier %r" % x)
        return types[x]

    def is_ref(x):
        return lookup(x) not in PRIM_TYPES

    def field_of(r, f):
        t = lookup(r)
        if t in PRIM_TYPES:
            err("%r is not a reference" % r)
        ft = h.field_type(t, f)
        if ft is None:
            err("field %r not found in class %r" % (f, t))
        return ft

    def expr_type(e):
        if isinstance(e, Lit):
            return "bool" if isinstance(e.value, bool) else "int"
        if isinstance(e, Var):
            t = lookup(e.name)
            if t not in PRIM_TYPES:
                err("reference %r used in a primitive expression" % e.name)
            return t
        if isinstance(e, Unary):
            t = expr_type(e.arg)
            want = "int" if e.op == "-" else "bool"
            if t != want:
                err("operator %r expects %s" % (e.op, want))
            return t
        if isinstance(e, RefEq):
            return "bool"
        if isinstance(e, Binary):
            if e.op in ("==", "!=") and isinstance(e.left, Var) and isinstance(e.right, Var) \
                    and lookup(e.left.name) not in PRIM_TYPES:
                if lookup(e.right.name) in PRIM_TYPES:
                    err("comparison between a reference and a primitive")
                return "bool"
            lt, rt = expr_type(e.left), expr_type(e.right)
            if e.op in ("+", "-", "*", "/"):
                if lt != "int" or rt != "int":
                    err("arithmetic on non-integers")
                return "int"
            if e.op in ("<", "<=", ">", ">="):
                if lt != "int" or rt != "int":
                    err("ordering on non-integers")
                return "bool"
            if e.op in ("==", "!="):
                if lt != rt:
                    err("comparison between %s and %s" % (lt, rt))
                return "bool"
            if e.op in ("&&", "||"):
                if lt != "bool" or rt != "bool":
                    err("logical operator on non-booleans")
                return "bool"
        if isinstance(e, (FieldRef, NewExpr, NullExpr)):
            err("heap expression not allowed here")
        err("bad expression")

    def resolve(e):
        # turn reference comparisons into RefEq nodes
        if isinstance(e, Binary):
            if e.op in ("==", "!=") and isinstance(e.left, Var) and isinstance(e.right, Var) \
                    and lookup(e.left.name) not in PRIM_TYPES:
                eq = RefEq(e.left.name, e.right.name)
                return eq if e.op == "==" else Unary("!", eq)
            return Binary(e.op, resolve(e.left), resolve(e.right))
        if isinstance(e, Unary):
            return Unary(e.op, resolve(e.arg))
        return e

    if isinstance(s, AssignStmt):
        tt = lookup(s.target)
        v = s.value
        if tt in PRIM_TYPES:
            if isinstance(v, FieldRef):
                ft = field_of(v.base, v.field)
                if ft != tt:
                    err("cannot assign field of type %s to %s variable %r" % (ft, tt, s.target))
                return TLoadPrim(s.target, v.base, v.field)
            if isinstance(v, (NewExpr, NullExpr)):
                err("kind mismatch: reference value assigned to primitive %r" % s.target)
            if isinstance(v, Var) and is_ref(v.name):
                err("kind mismatch: reference %r assigned to primitive %r" % (v.name, s.target))
            et = expr_type(v)
            if et != tt:
                err("cannot assign %s to %s variable %r" % (et, tt, s.target))
            return TAssign(s.target, resolve(v))
        # reference target
        if isinstance(v, NewExpr):
            if v.cls not in h:
                err("unknown class %r" % v.cls)
            if not h.is_subtype(v.cls, tt):
                err("%s is not a subtype of %s" % (v.cls, tt))
            return TNew(s.target, v.cls)
        if isinstance(v, NullExpr):
            return TNull(s.target)
        if isinstance(v, FieldRef):
            ft = field_of(v.base, v.field)
            if ft in PRIM_TYPES:
                err("kind mismatch: primitive field %r assigned to reference %r" % (v.field, s.target))
            if not h.is_subtype(ft, tt):
                err("field type %s is not a subtype of %s" % (ft, tt))
            return TLoadRef(s.target, v.base, v.field)
        if isinstance(v, Var):
            st = lookup(v.name)
            if st in PRIM_TYPES:
                err("kind mismatch: primitive %r assigned to reference %r" % (v.name, s.target))
            if not h.is_subtype(st, tt):
                err("%s is not a subtype of %s" % (st, tt))
            return TCopy(s.target, v.name)
        err("kind mismatch: primitive expression assigned to reference %r" % s.target)
    if isinstance(s, StoreStmt):
        ft = field_of(s.base, s.field)
        v = s.value
        if ft in PRIM_TYPES:
            if isinstance(v, (FieldRef, NewExpr, NullExpr)):
                err("only expressions may be stored into primitive field %r" % s.field)
            if isinstance(v, Var) and is_ref(v.name):
                err("kind mismatch: reference stored into primitive field %r" % s.field)
            if expr_type(v) != ft:
                err("type mismatch storing into %s.%s" % (s.base, s.field))
            return TStorePrim(s.base, s.field, resolve(v))
        if not isinstance(v, Var) or not is_ref(v.name):
            err("reference field %r takes a reference variable" % s.field)
        if not h.is_subtype(lookup(v.name), ft):
            err("%s is not a subtype of %s" % (lookup(v.name), ft))
        return TStoreRef(s.base, s.field, v.name)
    if isinstance(s, CallStmt):
        if not is_ref(s.recv):
            err("call receiver %r is not a reference" % s.recv)
        for a in s.args:
            lookup(a)
        return TCall(s.recv, s.name, tuple(s.args))
    if isinstance(s, GotoStmt):
        if s.label not in labels:
            err("unresolved label %r" % s.label)
        return TGoto(s.label)
    if isinstance(s, IfStmt):
        if s.label not in labels:
            err("unresolved label %r" % s.label)
        if expr_type(s.cond) != "bool":
            err("branch condition must be boolean")
        return TIf(resolve(s.cond), s.label)
    if isinstance(s, OutputStmt):
        return TOutput(s.level, s.var, is_ref(s.var))
    err("unknown statement")


def load_program(source):
    return typecheck(parse_program(source))


# ---------------------------------------------------------------------------
# control flow

@dataclass
class Cfg:
    nodes: list          # statement indices (reachable) followed by exit
    succ: dict           # node -> list of successors (branch: [taken, fallthrough])
    entry: int
    exit: int
    branches: set = field(default_factory=set)
    virtual: list = field(default_factory=list)   # (node, exit) edges added for postdominance
    warnings: list = field(default_factory=list)
    unreachable: list = field(default_factory=list)

    def preds(self):
        out = {n: [] for n in self.nodes}
        for n in self.nodes:
            for s in self.succ[n]:
                if n not in out[s]:
                    out[s].append(n)
        return out


def build_cfg(m):
    n = len(m.body)
    exit_ = n
    raw = {}
    branches = set()
    for i, s in enumerate(m.body):
        nxt = i + 1 if i + 1 < n else exit_
        if isinstance(s, TGoto):
            raw[i] = [m.target(s.label)]
        elif isinstance(s, TIf):
            raw[i] = [m.target(s.label), nxt]
            branches.add(i)
        else:
            raw[i] = [nxt]
    raw[exit_] = []
    return make_cfg(raw, 0, exit_, branches)


def make_cfg(raw, entry, exit_, branches):
    """Build a Cfg from a successor map, dropping unreachable nodes."""
    seen = {entry}
    todo = [entry]
    while todo:
        u = todo.pop()
        for v in raw[u]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    seen.add(exit_)
    nodes = sorted(x for x in seen if x != exit_) + [exit_]
    succ = {u: list(raw[u]) for u in nodes}
    g = Cfg(nodes, succ, entry, exit_, {b for b in branches if b in seen})
    g.unreachable = sorted(set(raw) - seen)
    _add_virtual_edges(g)
    return g


def _reaches_exit(g, extra):
    preds = {u: [] for u in g.nodes}
    for u in g.nodes:
        for v in g.succ[u] + extra.get(u, []):
            preds[v].append(u)
    ok = {g.exit}
    todo = [g.exit]
    while todo:
        v = todo.pop()
        for u in preds[v]:
            if u not in ok:
                ok.add(u)
                todo.append(u)
    return ok


def _add_virtual_edges(g):
    extra = {}
    while True:
        ok = _reaches_exit(g, extra)
        stuck = [u for u in g.nodes if u not in ok]
        if not stuck:
            break
        # pick a node of a bottom strongly connected component among stuck nodes
        stuck_set = set(stuck)
        comp = _bottom_component(g, stuck_set)
        u = min(comp)
        extra.setdefault(u, []).append(g.exit)
        g.virtual.append((u, g.exit))
        g.warnings.append("node %d lies on a cycle that never reaches the method exit; "
                          "a virtual exit edge was added" % u)


def _bottom_component(g, stuck):
    # a stuck node u sits in a bottom SCC when everything it reaches reaches it back
    for u in sorted(stuck):
        fw = _forward(g, u)
        if all(u in _forward(g, v) for v in fw):
            return fw | {u}
    return {min(stuck)}


def _forward(g, u):
    seen = {u}
    todo = [u]
    out = set()
    while todo:
        x = todo.pop()
        for y in g.succ[x]:
            out.add(y)
            if y not in seen:
                seen.add(y)
                todo.append(y)
    return out


def _all_succ(g):
    s = {u: list(g.succ[u]) for u in g.nodes}
    for u, v in g.virtual:
        s[u].append(v)
    return s


@dataclass
class PostDomTree:
    ipdom: dict     # node -> immediate postdominator (exit -> None)
    pdom: dict      # node -> frozenset of postdominators (reflexive)

    def postdominates(self, a, b):
        return a in self.pdom[b]


def postdominator_tree(g):
    succ = _all_succ(g)
    full = frozenset(g.nodes)
    pdom = {u: full for u in g.nodes}
    pdom[g.exit] = frozenset([g.exit])
    changed = True
    order = list(reversed(g.nodes))
    while changed:
        changed = False
        for u in order:
            if u == g.exit:
                continue
            acc = None
            for v in succ[u]:
                acc = pdom[v] if acc is None else acc & pdom[v]
            new = (acc or frozenset()) | {u}
            if new != pdom[u]:
                pdom[u] = new
                changed = True
    ipdom = {g.exit: None}
    for u in g.nodes:
        if u == g.exit:
            continue
        strict = pdom[u] - {u}
        # the closest strict postdominator is postdominated by all the others
        best = None
        for d in strict:
            if strict - {d} <= pdom[d]:
                best = d
                break
        ipdom[u] = best
    return PostDomTree(ipdom, pdom)


def dominators(g):
    preds = g.preds()
    full = frozenset(g.nodes)
    dom = {u: full for u in g.nodes}
    dom[g.entry] = frozenset([g.entry])
    changed = True
    while changed:
        changed = False
        for u in g.nodes:
            if u == g.entry:
                continue
            acc = None
            for p in preds[u]:
                acc = dom[p] if acc is None else acc & dom[p]
            new = (acc or frozenset()) | {u}
            if new != dom[u]:
                dom[u] = new
                changed = True
    return dom


P_BOTTOM = 0


@dataclass
class Region:
    nodes: frozenset
    inducing: int
    junction: int


@dataclass
class CdrTable:
    regions: dict       # region id (>= 1) -> Region
    junc_inv: dict      # node -> set of region ids
    cdr_of: dict        # branch node -> region id

    @property
    def count(self):
        return len(self.regions)


def control_dependence(g, t):
    """branch -> set of nodes control dependent on it (classic edge walk)."""
    succ = _all_succ(g)
    out = {b: set() for b in g.branches}
    for a in g.branches:
        for b in succ[a]:
            if t.postdominates(b, a) and b != a:
                continue
            stop = t.ipdom[a]
            x = b
            while x is not None and x != stop:
                out[a].add(x)
                x = t.ipdom[x]
    return out


def compute_cdrs(g, t):
    dom = dominators(g)
    cd = control_dependence(g, t)
    regions, junc_inv, cdr_of = {}, {}, {}
    for rid, b in enumerate(sorted(g.branches), start=1):
        nodes = frozenset(cd[b])
        j = t.ipdom[b]
        for n in nodes:
            if b not in dom[n]:
                raise IrreducibleFlow("branch at statement %d does not dominate node %d of its "
                                      "control-dependence region (irreducible control flow)" % (b, n))
            if not t.postdominates(j, n):
                raise IrreducibleFlow("region of branch %d has no unique junction" % b)
        regions[rid] = Region(nodes, b, j)
        junc_inv.setdefault(j, set()).add(rid)
        cdr_of[b] = rid
    return CdrTable(regions, junc_inv, cdr_of)
