"""Reduced ordered binary decision diagrams plus the variable registry,
predicates and assignment sets the analyzer is built on.

Nodes are plain integers.  0 and 1 are the terminals.  Every other node is
a triple (level, lo, hi) kept unique in a hash table, so two predicates
are equivalent exactly when they are the same integer.
"""
import sys
from itertools import product

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

FALSE = 0
TRUE = 1


class BddError(Exception):
    pass


class BDD:
    def __init__(self):
        self.names = []
        self.index = {}
        # node id -> (level, lo, hi); terminals sit below every variable
        self.nodes = [(None, None, None), (None, None, None)]
        self.unique = {}
        self.ite_cache = {}
        self.peak = 0

    # ---- variables -------------------------------------------------
    def declare(self, name):
        if name in self.index:
            raise BddError("variable %r declared twice" % name)
        self.index[name] = len(self.names)
        self.names.append(name)
        return self.index[name]

    @property
    def nvars(self):
        return len(self.names)

    def level(self, u):
        if u < 2:
            return self.nvars
        return self.nodes[u][0]

    def var(self, name_or_level):
        lv = self.index[name_or_level] if isinstance(name_or_level, str) else name_or_level
        return self.mk(lv, FALSE, TRUE)

    def mk(self, lv, lo, hi):
        if lo == hi:
            return lo
        key = (lv, lo, hi)
        u = self.unique.get(key)
        if u is None:
            u = len(self.nodes)
            self.nodes.append(key)
            self.unique[key] = u
        return u

    def size(self):
        return len(self.nodes)

    def clear_caches(self):
        self.ite_cache.clear()

    # ---- core operations -------------------------------------------
    def ite(self, f, g, h):
        if f == TRUE:
            return g
        if f == FALSE:
            return h
        if g == h:
            return g
        if g == TRUE and h == FALSE:
            return f
        key = (f, g, h)
        r = self.ite_cache.get(key)
        if r is not None:
            return r
        nodes = self.nodes
        top = nodes[f][0]
        if g > 1 and nodes[g][0] < top:
            top = nodes[g][0]
        if h > 1 and nodes[h][0] < top:
            top = nodes[h][0]
        f0, f1 = self._cof(f, top)
        g0, g1 = self._cof(g, top)
        h0, h1 = self._cof(h, top)
        r = self.mk(top, self.ite(f0, g0, h0), self.ite(f1, g1, h1))
        self.ite_cache[key] = r
        return r

    def _cof(self, u, lv):
        if u < 2:
            return u, u
        n = self.nodes[u]
        if n[0] == lv:
            return n[1], n[2]
        return u, u

    def neg(self, f):
        return self.ite(f, FALSE, TRUE)

    def conj(self, f, g):
        return self.ite(f, g, FALSE)

    def disj(self, f, g):
        return self.ite(f, TRUE, g)

    def implies(self, f, g):
        return self.ite(f, g, TRUE)

    def equiv(self, f, g):
        return self.ite(f, g, self.neg(g))

    def xor(self, f, g):
        return self.ite(f, self.neg(g), g)

    # ---- quantification, substitution, cofactors -------------------
    def exists(self, f, levels):
        levels = frozenset(levels)
        if not levels:
            return f
        deepest = max(levels)
        memo = {}

        def rec(u):
            if u < 2:
                return u
            lv, lo, hi = self.nodes[u]
            if lv > deepest:
                return u
            r = memo.get(u)
            if r is not None:
                return r
            a, b = rec(lo), rec(hi)
            if lv in levels:
                r = self.disj(a, b)
            else:
                r = self.mk(lv, a, b)
            memo[u] = r
            return r

        return rec(f)

    def forall(self, f, levels):
        return self.neg(self.exists(self.neg(f), levels))

    def compose(self, f, mapping):
        """Simultaneous substitution: mapping is level -> node."""
        if not mapping:
            return f
        deepest = max(mapping)
        memo = {}

        def rec(u):
            if u < 2:
                return u
            lv, lo, hi = self.nodes[u]
            if lv > deepest:
                return u
            r = memo.get(u)
            if r is not None:
                return r
            a, b = rec(lo), rec(hi)
            x = mapping.get(lv)
            if x is None:
                r = self.ite(self.mk(lv, FALSE, TRUE), b, a)
            else:
                r = self.ite(x, b, a)
            memo[u] = r
            return r

        return rec(f)

    def restrict(self, f, binding):
        """Cofactor by a cube given as level -> bool."""
        if not binding:
            return f
        deepest = max(binding)
        memo = {}

        def rec(u):
            if u < 2:
                return u
            lv, lo, hi = self.nodes[u]
            if lv > deepest:
                return u
            r = memo.get(u)
            if r is not None:
                return r
            if lv in binding:
                r = rec(hi) if binding[lv] else rec(lo)
            else:
                r = self.mk(lv, rec(lo), rec(hi))
            memo[u] = r
            return r

        return rec(f)

    # ---- inspection -------------------------------------------------
    def evaluate(self, f, values):
        """values: level -> bool (missing levels read as False)."""
        u = f
        while u > 1:
            lv, lo, hi = self.nodes[u]
            u = hi if values.get(lv, False) else lo
        return u == TRUE

    def support(self, f):
        seen = set()
        out = set()
        stack = [f]
        while stack:
            u = stack.pop()
            if u < 2 or u in seen:
                continue
            seen.add(u)
            lv, lo, hi = self.nodes[u]
            out.add(lv)
            stack.append(lo)
            stack.append(hi)
        return out

    def node_count(self, f):
        seen = set()
        stack = [f]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            if u > 1:
                stack.append(self.nodes[u][1])
                stack.append(self.nodes[u][2])
        return len(seen)

    def paths(self, f):
        """Disjoint cubes (level -> bool) covering f, in a fixed order."""
        out = []

        def rec(u, cube):
            if u == FALSE:
                return
            if u == TRUE:
                out.append(dict(cube))
                return
            lv, lo, hi = self.nodes[u]
            cube[lv] = False
            rec(lo, cube)
            cube[lv] = True
            rec(hi, cube)
            del cube[lv]

        rec(f, {})
        return out

    def cube(self, binding):
        u = TRUE
        for lv in sorted(binding, reverse=True):
            if binding[lv]:
                u = self.mk(lv, FALSE, u)
            else:
                u = self.mk(lv, u, FALSE)
        return u

    def satcount(self, f):
        n = self.nvars
        memo = {}

        def lvl(u):
            return n if u < 2 else self.nodes[u][0]

        def rec(u):
            if u < 2:
                return u
            if u in memo:
                return memo[u]
            lv, lo, hi = self.nodes[u]
            c = rec(lo) * 2 ** (lvl(lo) - lv - 1) + rec(hi) * 2 ** (lvl(hi) - lv - 1)
            memo[u] = c
            return c

        return rec(f) * 2 ** lvl(f)


class Pred:
    """A predicate: a node of one VarSpace's diagram store."""

    __slots__ = ("space", "node")

    def __init__(self, space, node):
        self.space = space
        self.node = node

    def _other(self, other):
        if isinstance(other, bool):
            return other and TRUE or FALSE
        if not isinstance(other, Pred):
            raise TypeError("expected a predicate, got %r" % (other,))
        if other.space is not self.space:
            raise BddError("predicates from different variable spaces")
        return other.node

    def __and__(self, other):
        return Pred(self.space, self.space.bdd.conj(self.node, self._other(other)))

    __rand__ = __and__

    def __or__(self, other):
        return Pred(self.space, self.space.bdd.disj(self.node, self._other(other)))

    __ror__ = __or__

    def __xor__(self, other):
        return Pred(self.space, self.space.bdd.xor(self.node, self._other(other)))

    def __invert__(self):
        return Pred(self.space, self.space.bdd.neg(self.node))

    def implies(self, other):
        return Pred(self.space, self.space.bdd.implies(self.node, self._other(other)))

    def equiv(self, other):
        return Pred(self.space, self.space.bdd.equiv(self.node, self._other(other)))

    def ite(self, then, other):
        b = self.space.bdd
        return Pred(self.space, b.ite(self.node, self._other(then), self._other(other)))

    def __eq__(self, other):
        if not isinstance(other, Pred):
            return NotImplemented
        return self.space is other.space and self.node == other.node

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __hash__(self):
        return hash((id(self.space), self.node))

    def __bool__(self):
        raise TypeError("use is_true()/is_false() on predicates")

    def is_true(self):
        return self.node == TRUE

    def is_false(self):
        return self.node == FALSE

    def support(self):
        return {self.space.bdd.names[lv] for lv in self.space.bdd.support(self.node)}

    def __repr__(self):
        return "Pred(%s)" % self.space.dump(self)


TAUTOLOGY = "tautology"
UNSATISFIABLE = "unsatisfiable"
CONTINGENT = "contingent"


class VarSpace:
    """Ordered registry of Boolean and small-enum variables.

    An enum variable of cardinality k is stored as ceil(log2 k) bits named
    ``name#0``, ``name#1``... (most significant first).  Cardinality one
    needs no bit at all.
    """

    def __init__(self):
        self.bdd = BDD()
        self.kinds = {}  # name -> "bool" | ("enum", k, [bit names])
        self.order = []
        self.tt = Pred(self, TRUE)
        self.ff = Pred(self, FALSE)

    def add_bool(self, name):
        if name in self.kinds:
            raise BddError("variable %r already declared" % name)
        self.bdd.declare(name)
        self.kinds[name] = "bool"
        self.order.append(name)
        return self.var(name)

    def add_enum(self, name, card):
        if name in self.kinds:
            raise BddError("variable %r already declared" % name)
        if card < 1:
            raise BddError("enum cardinality must be positive")
        nbits = (card - 1).bit_length()
        bits = ["%s#%d" % (name, i) for i in range(nbits)]
        for b in bits:
            self.bdd.declare(b)
        self.kinds[name] = ("enum", card, bits)
        self.order.append(name)
        return name

    def has(self, name):
        return name in self.kinds

    def var(self, name):
        if self.kinds.get(name) != "bool":
            raise BddError("no Boolean variable %r" % name)
        return Pred(self, self.bdd.var(name))

    def const(self, value):
        return self.tt if value else self.ff

    def enum_bits(self, name):
        kind = self.kinds[name]
        if kind == "bool":
            raise BddError("%r is Boolean" % name)
        return kind[2]

    def enum_card(self, name):
        return self.kinds[name][1]

    def _code(self, name, value):
        card = self.enum_card(name)
        if not 0 <= value < card:
            raise BddError("value %r out of range for %r" % (value, name))
        bits = self.enum_bits(name)
        n = len(bits)
        return {b: bool((value >> (n - 1 - i)) & 1) for i, b in enumerate(bits)}

    def enum_eq(self, name, value):
        code = self._code(name, value)
        return self.cube(code)

    def enum_in(self, name, values):
        out = self.ff
        for v in values:
            out = out | self.enum_eq(name, v)
        return out

    def enum_assign(self, name, value):
        return AssignmentSet(self, {b: self.const(v) for b, v in self._code(name, value).items()})

    def cube(self, binding):
        """binding: Boolean variable name -> bool."""
        b = self.bdd
        return Pred(self, b.cube({b.index[k]: v for k, v in binding.items()}))

    def bits_of(self, names):
        out = []
        for n in names:
            k = self.kinds.get(n)
            if k is None:
                if n in self.bdd.index:
                    out.append(n)
                    continue
                raise BddError("unknown variable %r" % n)
            if k == "bool":
                out.append(n)
            else:
                out.extend(k[2])
        return out

    # ---- operations on predicates ----------------------------------
    def exists(self, f, names):
        lv = [self.bdd.index[n] for n in self.bits_of(names)]
        return Pred(self, self.bdd.exists(f.node, lv))

    def forall(self, f, names):
        lv = [self.bdd.index[n] for n in self.bits_of(names)]
        return Pred(self, self.bdd.forall(f.node, lv))

    def substitute(self, f, assignment):
        if assignment is None or not assignment.items:
            return f
        if assignment.space is not self:
            raise BddError("assignment from a different variable space")
        m = {self.bdd.index[k]: v.node for k, v in assignment.items.items()}
        return Pred(self, self.bdd.compose(f.node, m))

    def cofactor(self, f, g):
        """Partial evaluation of f under the cube g."""
        binding = self.cube_binding(g)
        b = self.bdd
        return Pred(self, b.restrict(f.node, {b.index[k]: v for k, v in binding.items()}))

    def cube_binding(self, g):
        if g.is_false():
            raise BddError("cofactor by an unsatisfiable constraint")
        b = self.bdd
        binding = {}
        u = g.node
        while u > 1:
            lv, lo, hi = b.nodes[u]
            if lo == FALSE:
                binding[b.names[lv]] = True
                u = hi
            elif hi == FALSE:
                binding[b.names[lv]] = False
                u = lo
            else:
                raise BddError("constraint is not a conjunction of literals")
        return binding

    def classify(self, f):
        if f.node == TRUE:
            return TAUTOLOGY
        if f.node == FALSE:
            return UNSATISFIABLE
        return CONTINGENT

    def evaluate(self, f, values):
        """values: name -> bool for Boolean vars or name -> int for enums."""
        b = self.bdd
        flat = {}
        for k, v in values.items():
            kind = self.kinds.get(k)
            if kind is None and k in b.index:
                flat[b.index[k]] = bool(v)
            elif kind == "bool":
                flat[b.index[k]] = bool(v)
            else:
                for bit, bv in self._code(k, v).items():
                    flat[b.index[bit]] = bv
        return b.evaluate(f.node, flat)

    def paths(self, f):
        b = self.bdd
        return [{b.names[lv]: v for lv, v in c.items()} for c in b.paths(f.node)]

    def dump(self, f):
        """Sum-of-products text in registry order (one cube per BDD path)."""
        if f.is_true():
            return "tt"
        if f.is_false():
            return "ff"
        b = self.bdd
        cubes = []
        for c in b.paths(f.node):
            lits = []
            for lv in sorted(c):
                lits.append(b.names[lv] if c[lv] else "!" + b.names[lv])
            cubes.append(" & ".join(lits))
        return " | ".join(cubes)

    def size(self, f):
        return self.bdd.node_count(f.node)

    def truth_table(self, f, names):
        """Brute-force truth table over the given Boolean variables."""
        rows = []
        for vals in product([False, True], repeat=len(names)):
            rows.append(self.evaluate(f, dict(zip(names, vals))))
        return tuple(rows)


class AssignmentSet:
    """Guarded simultaneous assignment [x0 := e0, ...]; absent = unchanged."""

    def __init__(self, space, items=None):
        self.space = space
        self.items = dict(items or {})
        for k, v in self.items.items():
            if not isinstance(v, Pred) or v.space is not space:
                raise BddError("right-hand side for %r is not a predicate of this space" % k)

    def merge(self, other):
        """The join of two assignment sets: doubly assigned variables get a disjunction."""
        if other.space is not self.space:
            raise BddError("assignment sets from different variable spaces")
        out = dict(self.items)
        for k, v in other.items.items():
            out[k] = out[k] | v if k in out else v
        return AssignmentSet(self.space, out)

    __or__ = merge

    def get(self, name, default=None):
        return self.items.get(name, default)

    def targets(self):
        return set(self.items)

    def map_rhs(self, fn):
        return AssignmentSet(self.space, {k: fn(v) for k, v in self.items.items()})

    def __len__(self):
        return len(self.items)

    def __eq__(self, other):
        if not isinstance(other, AssignmentSet):
            return NotImplemented
        return self.space is other.space and self.items == other.items

    def __repr__(self):
        parts = ["%s := %s" % (k, self.space.dump(v)) for k, v in sorted(self.items.items())]
        return "[" + ", ".join(parts) + "]"
