"""Guard synthesis by backward co-reachability of bad states over an SCFG."""
import json
import time
from dataclasses import dataclass, field

from .encoder import PC, Encoder

SECURE, INSECURE, CONDITIONAL = "secure-always", "insecure-always", "conditional"
DNF_CAP = 64


class Interrupted(Exception):
    pass


def bad_states(s):
    """B0: each location maps to the negation of its invariant."""
    return {l: ~s.inv(l) for l in s.locations}


def _pre_at(s, B, l):
    sp = s.space
    acc = sp.ff
    for g, T, t in s.trans[l]:
        if B[t].is_false():
            continue
        acc = acc | (g & sp.substitute(B[t], T))
    return sp.exists(acc, s.inputs)


def preimage(s, B):
    return {l: _pre_at(s, B, l) for l in s.locations}


def _check_caps(s, deadline, node_cap):
    if deadline is not None and time.monotonic() > deadline:
        raise Interrupted("timeout")
    if node_cap is not None and len(s.space.bdd.nodes) > node_cap:
        raise Interrupted("node cap")


def coreach(s, B0=None, deadline=None, node_cap=None, stats=None):
    """Least fixed point of B = B0 | pre(B), by a worklist over locations."""
    if B0 is None:
        B0 = bad_states(s)
    B = dict(B0)
    preds = s.preds()
    work = sorted({p for l in s.locations if not B[l].is_false() for p in preds[l]})
    pending = set(work)
    evals = 0
    while work:
        l = work.pop(0)
        pending.discard(l)
        _check_caps(s, deadline, node_cap)
        new = B[l] | _pre_at(s, B, l)
        evals += 1
        if new != B[l]:
            B[l] = new
            for p in sorted(preds[l]):
                if p not in pending:
                    pending.add(p)
                    work.append(p)
    if stats is not None:
        stats["iterations"] = evals
    return B


def coreach_trace(s, B0=None, max_iter=10000):
    """Jacobi iterates B0, B1, ... up to and including the fixed point."""
    if B0 is None:
        B0 = bad_states(s)
    trace = [dict(B0)]
    while len(trace) <= max_iter:
        prev = trace[-1]
        pre = preimage(s, prev)
        nxt = {l: B0[l] | pre[l] for l in s.locations}
        if nxt == prev:
            return trace
        trace.append(nxt)
    raise Interrupted("no convergence after %d iterations" % max_iter)


@dataclass
class Guard:
    method: str
    domain: str
    pred: object
    space: object
    status: str = "ok"
    stats: dict = field(default_factory=dict)
    refs: list = field(default_factory=list)
    prims: list = field(default_factory=list)
    scfg: object = None

    @property
    def classification(self):
        return classify_guard(self)


def synthesize_guard(m, domain="deep", summaries=None, timeout=None, node_cap=None,
                     override=None, **kw):
    """Returns a Guard; on a resource cap breach the guard is ff with status 'interrupted'."""
    t0 = time.monotonic()
    enc = Encoder(m, domain, summaries, **kw)
    s, _ = enc.encode()
    stats = {"locations": len(s.locations), "statebits": s.state_bits()}
    deadline = None if timeout is None else t0 + timeout
    status = "ok"
    try:
        B = coreach(s, deadline=deadline, node_cap=node_cap, stats=stats)
        g = s.space.cofactor(~B[s.init], s.x0)
    except Interrupted as e:
        g = s.space.ff
        status = "interrupted"
        stats["reason"] = str(e)
    if override is not None:
        g = s.space.const(override) if isinstance(override, bool) else override
    stats["millis"] = int(round((time.monotonic() - t0) * 1000))
    name = domain if isinstance(domain, str) else domain.name
    return Guard(m.name, name, g, s.space, status, stats, list(m.refs), list(m.prims), s)


def classify_guard(g):
    p = g.pred if isinstance(g, Guard) else g
    if p.is_true():
        return SECURE
    if p.is_false():
        return INSECURE
    return CONDITIONAL


# ---------------------------------------------------------------------------
# rendering

_KIND_ORDER = {"pc": 0, "lev": 1, "reach": 2, "alias": 3, "freach": 4}


def _var_key(space, name):
    kind = name.split("(")[0]
    decl = getattr(space, "decl", {})
    args = name[len(kind) + 1:-1].split(",") if "(" in name else []
    pos = tuple(decl.get(a, len(decl)) for a in args)
    return (_KIND_ORDER.get(kind, 9), pos, name)


def _is_level(name):
    return name == PC or name.startswith("lev(") or name.startswith("reach(")


def _lit(name, val):
    if _is_level(name):
        return "%s=%s" % (name, "high" if val else "low")
    return name if val else "!" + name


def prime_cubes(space, f, cap=DNF_CAP):
    """Irredundant list of prime implicants covering f (greedy, deterministic)."""
    if f.is_false():
        return []
    if f.is_true():
        return [{}]
    paths = space.paths(f)
    if len(paths) > 4 * cap:
        raise Interrupted("too many paths for DNF")
    primes = []
    for c in paths:
        c = dict(c)
        for v in sorted(c, key=lambda n: _var_key(space, n), reverse=True):
            trial = {k: b for k, b in c.items() if k != v}
            if (space.cube(trial) & ~f).is_false():
                c = trial
        if c not in primes:
            primes.append(c)
    primes.sort(key=lambda c: (len(c), sorted(_var_key(space, k) for k in c)))
    kept = list(primes)
    for c in list(primes):
        others = space.ff
        for d in kept:
            if d is not c:
                others = others | space.cube(d)
        if others == f and len(kept) > 1:
            kept.remove(c)
    if len(kept) > cap:
        raise Interrupted("DNF exceeds %d cubes" % cap)
    return kept


def _cube_text(space, c, neg=False):
    names = sorted(c, key=lambda n: _var_key(space, n))
    return [_lit(n, (not c[n]) if neg else c[n]) for n in names]


def guard_text(space, f):
    if f.is_true():
        return "true"
    if f.is_false():
        return "false"
    try:
        bad = prime_cubes(space, ~f)
    except Interrupted:
        return space.dump(f)
    units, clauses = [], []
    for c in bad:
        lits = _cube_text(space, c, neg=True)
        if len(lits) == 1:
            units.append((sorted(_var_key(space, n) for n in c), lits[0]))
        else:
            clauses.append((len(c), sorted(_var_key(space, n) for n in c), "(" + " | ".join(lits) + ")"))
    units.sort()
    clauses.sort()
    return " & ".join([u[1] for u in units] + [c[2] for c in clauses])


def guard_dnf(space, f):
    if f.is_false():
        return []
    return [_cube_text(space, c) for c in prime_cubes(space, f)]


def guard_record(g):
    try:
        dnf = guard_dnf(g.space, g.pred)
    except Interrupted:
        dnf = None
    return {
        "method": g.method,
        "domain": g.domain,
        "status": g.status,
        "classification": classify_guard(g),
        "formula": guard_text(g.space, g.pred),
        "dnf": dnf,
        "stats": {k: g.stats.get(k) for k in ("locations", "statebits", "iterations", "millis")},
    }


def render_guard(g, fmt="text"):
    if fmt == "text":
        return guard_text(g.space, g.pred)
    if fmt == "dnf":
        try:
            cubes = guard_dnf(g.space, g.pred)
        except Interrupted as e:
            return "dnf unavailable (%s)" % e
        if not cubes:
            return "false"
        return "\n".join(" & ".join(c) if c else "true" for c in cubes)
    if fmt == "json":
        return json.dumps(guard_record(g), sort_keys=True)
    raise ValueError("unknown format %r" % fmt)


def context_vars(g):
    """Names of calling-context variables a guard may mention."""
    sp = g.space
    return [n for n in sp.order if n == PC or n.startswith(("lev(", "reach(", "alias(", "freach("))
            and "'" not in n]
