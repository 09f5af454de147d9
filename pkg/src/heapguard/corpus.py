"""Random class tables and random call-free methods for differential testing."""
import random

from .sir import (
    IrreducibleFlow, PRIM_TYPES, build_cfg, compute_cdrs, load_program,
    postdominator_tree,
)

CLASS_NAMES = ["C0", "C1", "C2"]


def random_classes(rng, max_classes=3, max_ref_fields=2, max_prim_fields=2):
    """Returns .sir text declaring a small random class table."""
    n = rng.randint(1, max_classes)
    names = CLASS_NAMES[:n]
    decls = []
    for i, c in enumerate(names):
        parent = rng.choice(names[:i]) if i and rng.random() < 0.3 else None
        fields = []
        for k in range(rng.randint(1 if i == 0 else 0, max_prim_fields)):
            fields.append("%s p%s%d;" % (rng.choice(["int", "int", "bool"]), c.lower(), k))
        for k in range(rng.randint(0, max_ref_fields)):
            fields.append("%s f%s%d;" % (rng.choice(names), c.lower(), k))
        ext = " extends %s" % parent if parent else ""
        decls.append("class %s%s { %s }" % (c, ext, " ".join(fields)))
    return "\n".join(decls)


def random_refs(rng, classes, max_refs=4, min_refs=1):
    n = rng.randint(min_refs, max_refs)
    return [("r%d" % i, rng.choice(classes)) for i in range(n)]


class _Gen:
    def __init__(self, rng, tp_classes, hier, refs, prims, n_stmts):
        self.rng = rng
        self.h = hier
        self.refs = refs          # [(name, type)]
        self.prims = prims        # [(name, type)]
        self.n = n_stmts

    def ref_of(self, pred):
        cand = [r for r in self.refs if pred(r)]
        return self.rng.choice(cand) if cand else None

    def prim_expr(self, want):
        rng = self.rng
        same = [v for v, t in self.prims if t == want]
        if want == "int":
            atoms = [str(rng.randint(0, 3))] + same
            a = rng.choice(atoms)
            if rng.random() < 0.4:
                return "%s %s %s" % (a, rng.choice(["+", "-", "*"]), rng.choice(atoms))
            return a
        # bool
        ints = [v for v, t in self.prims if t == "int"]
        opts = ["true", "false"] + same
        if ints:
            opts.append("%s > %d" % (rng.choice(ints), rng.randint(0, 2)))
        if len(self.refs) >= 2:
            a, b = rng.sample(self.refs, 2)
            opts.append("%s == %s" % (a[0], b[0]))
        return rng.choice(opts)

    def stmt(self):
        rng, h = self.rng, self.h
        k = rng.random()
        if k < 0.15 and self.prims:
            v, t = rng.choice(self.prims)
            return "%s = %s;" % (v, self.prim_expr(t))
        if k < 0.27 and self.prims:
            v, t = rng.choice(self.prims)
            r = self.ref_of(lambda r: any(ft == t for ft in h.prim_fields(r[1]).values()))
            if r:
                f = rng.choice([f for f, ft in h.prim_fields(r[1]).items() if ft == t])
                return "%s = %s.%s;" % (v, r[0], f)
        if k < 0.42:
            r = self.ref_of(lambda r: h.prim_fields(r[1]))
            if r:
                f, ft = rng.choice(sorted(h.prim_fields(r[1]).items()))
                return "%s.%s = %s;" % (r[0], f, self.prim_expr(ft))
        if k < 0.52:
            r, s = rng.choice(self.refs), rng.choice(self.refs)
            if h.is_subtype(s[1], r[1]):
                return "%s = %s;" % (r[0], s[0])
        if k < 0.64:
            r, s = rng.choice(self.refs), rng.choice(self.refs)
            fs = [f for f, ft in sorted(h.ref_fields(s[1]).items()) if h.is_subtype(ft, r[1])]
            if fs:
                return "%s = %s.%s;" % (r[0], s[0], rng.choice(fs))
        if k < 0.78:
            r, s = rng.choice(self.refs), rng.choice(self.refs)
            fs = [f for f, ft in sorted(h.ref_fields(r[1]).items()) if h.is_subtype(s[1], ft)]
            if fs:
                return "%s.%s = %s;" % (r[0], rng.choice(fs), s[0])
        if k < 0.86:
            r = rng.choice(self.refs)
            return "%s = new %s;" % (r[0], rng.choice(sorted(h.subtypes(r[1]))))
        if k < 0.9:
            r = rng.choice(self.refs)
            return "%s = null;" % r[0]
        x = rng.choice(self.refs + self.prims)
        return "output %s(%s);" % ("low" if rng.random() < 0.85 else "high", x[0])


def random_method_source(rng, classes_src, name="m", max_stmts=20, max_refs=4):
    tp = load_program(classes_src + "\nmethod _probe() { local int z; z = 0; }")
    hier = tp.hierarchy
    cnames = sorted(c.name for c in tp.program.classes)
    nref = rng.randint(1, max_refs)
    refs = [("r%d" % i, rng.choice(cnames)) for i in range(nref)]
    nprim = rng.randint(1, 3)
    prims = [("v%d" % i, rng.choice(["int", "int", "bool"])) for i in range(nprim)]
    nparam_r = rng.randint(1, nref)
    nparam_p = rng.randint(0, nprim)
    params = refs[:nparam_r] + prims[:nparam_p]
    locs = refs[nparam_r:] + prims[nparam_p:]
    g = _Gen(rng, cnames, hier, refs, prims, 0)
    body = []
    for r, t in refs[nparam_r:]:
        # most locals get an object up front so runs do not trap right away
        if rng.random() < 0.8:
            body.append(("s", "%s = new %s;" % (r, rng.choice(sorted(hier.subtypes(t))))))
    n = rng.randint(max(3, len(body) + 1), max_stmts - 1)
    for i in range(len(body), n):
        if rng.random() < 0.15 and i < n - 1:
            body.append(("if", g.prim_expr("bool")))
        elif rng.random() < 0.03:
            body.append(("goto", None))
        else:
            body.append(("s", g.stmt()))
    # labels: branch targets chosen forward mostly, sometimes backward
    lines, need = [], {}
    for i, (kind, x) in enumerate(body):
        if kind in ("if", "goto"):
            if rng.random() < 0.8 or i == 0:
                tgt = rng.randint(i + 1, n)
            else:
                tgt = rng.randint(0, i)
            need[i] = tgt
    labels = {t: "L%d" % t for t in need.values()}
    for i, (kind, x) in enumerate(body):
        pre = "%s: " % labels[i] if i in labels else ""
        if kind == "if":
            lines.append("%sif (%s) goto %s;" % (pre, x, labels[need[i]]))
        elif kind == "goto":
            lines.append("%sgoto %s;" % (pre, labels[need[i]]))
        else:
            lines.append(pre + x)
    if n in labels:
        lines.append("%s: output high(%s);" % (labels[n], refs[0][0]))
    decl = ", ".join("%s %s" % (t, v) for v, t in params)
    ldecl = "".join("  local %s %s;\n" % (t, v) for v, t in locs)
    return "method %s(%s) {\n%s%s\n}" % (name, decl, ldecl, "\n".join("  " + l for l in lines))


def random_program(rng, max_stmts=20, max_refs=4, attempts=50):
    """A random, type-correct, reducible, call-free single-method program (source, TypedProgram)."""
    for _ in range(attempts):
        cls = random_classes(rng)
        src = cls + "\n" + random_method_source(rng, cls, max_stmts=max_stmts, max_refs=max_refs)
        try:
            tp = load_program(src)
            m = tp.methods[0]
            g = build_cfg(m)
            compute_cdrs(g, postdominator_tree(g))
        except IrreducibleFlow:
            continue
        return src, tp
    raise RuntimeError("could not generate a reducible program")


def corpus(seed, count=50, **kw):
    rng = random.Random(seed)
    return [random_program(rng, **kw) for _ in range(count)]
