"""heapguard command line: analyze, validate, xcheck, report."""
import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from .concrete import (
    INCIDENT, INDUCED, check_inductive, check_noninterference, check_secure_abstraction,
)
from .encoder import EncodeError, MissingSummary, StubError, encode_method, load_summaries, validate_scfg
from .guards import guard_record, render_guard, synthesize_guard
from .heap import DOMAINS, MUTANTS
from .sir import SirError, load_program

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_STUB = 0, 1, 2, 3


def _domains(name):
    return list(DOMAINS) if name == "all" else [name]


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load(path):
    try:
        return load_program(_read(path))
    except SirError as e:
        loc = "" if e.line is None else "%d:%d:" % (e.line, e.col or 0)
        raise SystemExit(_die("%s:%s error: %s" % (path, loc, e.msg), EXIT_INPUT))
    except OSError as e:
        raise SystemExit(_die("%s: %s" % (path, e), EXIT_INPUT))


def _die(msg, code):
    print(msg, file=sys.stderr)
    return code


def _analyze_one(job):
    """Worker: (path, source, method name, domain, options) -> record dict."""
    path, src, mname, dom, opts = job
    tp = load_program(src)
    m = tp.method(mname)
    stubs = load_summaries(opts.get("stubs"))
    try:
        g = synthesize_guard(m, dom, stubs, timeout=opts.get("timeout"), node_cap=opts.get("node_cap"),
                             assume_worst=opts.get("assume_worst", False),
                             hardened=opts.get("hardened", False))
    except MissingSummary as e:
        return {"error": "missing-summary", "message": str(e), "method": mname, "domain": dom}
    rec = guard_record(g)
    rec["file"] = path
    rec["refcount"] = len(m.refs)
    rec["text"] = render_guard(g, opts.get("format", "text")) if opts.get("format") != "json" else None
    return rec


def _percentile(xs, p):
    if not xs:
        return 0
    xs = sorted(xs)
    k = min(len(xs) - 1, max(0, int(round(p / 100.0 * (len(xs) - 1)))))
    return xs[k]


def summarize(records):
    counts = {"secure-always": 0, "insecure-always": 0, "conditional": 0}
    interrupted = 0
    ms = []
    for r in records:
        counts[r["classification"]] = counts.get(r["classification"], 0) + 1
        interrupted += r.get("status") == "interrupted"
        ms.append(r["stats"]["millis"] or 0)
    return {"records": len(records), "classification": counts, "interrupted": interrupted,
            "millis": {"p50": _percentile(ms, 50), "p90": _percentile(ms, 90), "max": max(ms) if ms else 0}}


def _summary_text(s):
    c = s["classification"]
    return ("summary: %d records; secure-always %d, insecure-always %d, conditional %d; "
            "interrupted %d; ms p50 %d p90 %d max %d" % (
                s["records"], c.get("secure-always", 0), c.get("insecure-always", 0),
                c.get("conditional", 0), s["interrupted"], s["millis"]["p50"], s["millis"]["p90"],
                s["millis"]["max"]))


def write_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "domain", "refcount", "statebits", "millis", "class"])
        for r in records:
            w.writerow([r["method"], r["domain"], r.get("refcount", ""), r["stats"]["statebits"],
                        r["stats"]["millis"], r["classification"]])


def cmd_analyze(args):
    jobs = []
    try:
        load_summaries(args.stubs)
    except StubError as e:
        return _die("stubs: %s" % e, EXIT_INPUT)
    opts = {"stubs": args.stubs, "timeout": args.timeout, "node_cap": args.node_cap,
            "assume_worst": args.assume_worst, "format": args.format, "hardened": args.hardened}
    for path in args.inputs:
        tp = _load(path)
        src = _read(path)
        for m in sorted(tp.methods, key=lambda m: m.name):
            for d in _domains(args.domain):
                jobs.append((path, src, m.name, d, opts))
    order = {d: i for i, d in enumerate(DOMAINS)}
    jobs.sort(key=lambda j: (j[2], j[0], order[j[3]]))
    try:
        if args.jobs and args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                records = list(ex.map(_analyze_one, jobs))
        else:
            records = [_analyze_one(j) for j in jobs]
    except (SirError, EncodeError) as e:
        return _die("error: %s" % e, EXIT_INPUT)
    errs = [r for r in records if "error" in r]
    if errs:
        for r in errs:
            print("error: %s (use --assume-worst to havoc unknown calls)" % r["message"], file=sys.stderr)
        return EXIT_STUB
    for r in records:
        if args.format == "json":
            out = {k: v for k, v in r.items() if k != "text"}
            print(json.dumps(out, sort_keys=True))
        elif args.format == "dnf":
            print("%s [%s] %s:" % (r["method"], r["domain"], r["classification"]))
            for line in r["text"].splitlines():
                print("  " + line)
        else:
            tag = " (interrupted)" if r["status"] == "interrupted" else ""
            print("%s [%s] %s: %s%s" % (r["method"], r["domain"], r["classification"], r["text"], tag))
    s = summarize(records)
    if args.format != "json":
        print(_summary_text(s))
    if args.csv:
        write_csv(args.csv, records)
    return EXIT_OK


def cmd_validate(args):
    try:
        stubs = load_summaries(args.stubs)
    except StubError as e:
        return _die("stubs: %s" % e, EXIT_INPUT)
    bad = False
    for path in args.inputs:
        tp = _load(path)
        for m in sorted(tp.methods, key=lambda m: m.name):
            bits, mbad = [], False
            for d in _domains(args.domain):
                try:
                    s, _ = encode_method(m, d, stubs, assume_worst=args.assume_worst)
                except MissingSummary as e:
                    return _die("%s: %s" % (path, e), EXIT_STUB)
                except (SirError, EncodeError) as e:
                    return _die("%s: method %s: %s" % (path, m.name, e), EXIT_INPUT)
                rep = validate_scfg(s)
                for w in s.warnings:
                    print("warning: %s: %s: %s" % (path, m.name, w), file=sys.stderr)
                if not rep.ok:
                    bad = mbad = True
                    for v in rep.violations:
                        print("%s: %s [%s]: %s" % (path, m.name, d, v))
                bits.append("%s=%d" % (d, rep.statebits))
            print("%s: %s: %s; locations %d; state bits %s" % (
                path, m.name, "valid" if not mbad else "INVALID", rep.locations, " ".join(bits)))
    return EXIT_FAIL if bad else EXIT_OK


def cmd_xcheck(args):
    suites = ["inductive", "abstraction", "ni"] if args.suite == "all" else [args.suite]
    reports = []
    for suite in suites:
        for d in _domains(args.domain):
            if suite == "inductive":
                rep = check_inductive(d, args.refs, mutant=args.mutant, hardened=args.hardened)
                rep.stats.pop("masks", None)
            elif suite == "abstraction":
                rep = check_secure_abstraction(d, args.trials, args.seed, mutant=args.mutant,
                                               hardened=args.hardened, mode=args.graph, cover=not args.no_cover)
            else:
                if not args.program:
                    return _die("--suite ni needs --program", EXIT_INPUT)
                tp = _load(args.program)
                rep = None
                for m in sorted(tp.methods, key=lambda m: m.name):
                    g = synthesize_guard(m, d, load_summaries(args.stubs), hardened=args.hardened)
                    r = check_noninterference(m, g, args.trials, args.budget, args.seed, mode=args.graph,
                                              override=True if args.override_tt else None)
                    if rep is None:
                        rep = r
                    else:
                        rep.violations.extend(r.violations)
                        rep.trials += r.trials
            reports.append(rep)
            status = "pass" if rep.ok else "FAIL"
            n = rep.stats.get("violation_count", len(rep.violations))
            print("%s [%s]: %s (%d violations, %d trials)" % (suite, d, status, n, rep.trials))
            for v in rep.violations[:args.show]:
                if "reproducer" in v:
                    print(v["reproducer"])
                else:
                    print("  " + json.dumps(v, sort_keys=True, default=str))
    if args.json:
        with open(args.json, "w") as fh:
            fh.write("[" + ",\n".join(r.to_json() for r in reports) + "]\n")
    return EXIT_OK if all(r.ok for r in reports) else EXIT_FAIL


def cmd_report(args):
    records = []
    for path in args.inputs:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
    records.sort(key=lambda r: (r["method"], r["domain"]))
    s = summarize(records)
    if args.format == "json":
        print(json.dumps(s, sort_keys=True))
    else:
        print(_summary_text(s))
        by = {}
        for r in records:
            by.setdefault(r["domain"], []).append(r)
        for d in sorted(by):
            print("  %s: %s" % (d, _summary_text(summarize(by[d]))[len("summary: "):]))
    if args.csv:
        write_csv(args.csv, records)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="heapguard", description="Information-flow guard inference for .sir programs")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, inputs=True):
        if inputs:
            sp.add_argument("inputs", nargs="+", help=".sir files")
        sp.add_argument("--domain", default="deep", choices=list(DOMAINS) + ["all"])
        sp.add_argument("--stubs", help="JSON method summaries")
        sp.add_argument("--assume-worst", action="store_true", help="havoc calls without a summary")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--hardened", action="store_true",
                        help="join the receiver level into heap writes and track reachability through loads")

    a = sub.add_parser("analyze", help="infer guards")
    common(a)
    a.add_argument("--format", default="text", choices=["text", "json", "dnf"])
    a.add_argument("--timeout", type=float, default=300.0)
    a.add_argument("--node-cap", type=int, default=5_000_000)
    a.add_argument("--jobs", type=int, default=1)
    a.add_argument("--csv")
    a.set_defaults(fn=cmd_analyze)

    v = sub.add_parser("validate", help="encode and check determinism/reactivity")
    common(v)
    v.set_defaults(fn=cmd_validate)

    x = sub.add_parser("xcheck", help="run the oracle suites")
    common(x, inputs=False)
    x.add_argument("--suite", default="all", choices=["inductive", "abstraction", "ni", "all"])
    x.add_argument("--refs", type=int, default=3)
    x.add_argument("--trials", type=int, default=1000)
    x.add_argument("--budget", type=int, default=10000)
    x.add_argument("--program")
    x.add_argument("--mutant", choices=sorted(MUTANTS))
    x.add_argument("--graph", default=INDUCED, choices=[INDUCED, INCIDENT])
    x.add_argument("--no-cover", action="store_true", help="only check indistinguishability of post-heaps")
    x.add_argument("--override-tt", action="store_true", help="pretend every guard is true (control)")
    x.add_argument("--show", type=int, default=1)
    x.add_argument("--json")
    x.set_defaults(fn=cmd_xcheck)

    r = sub.add_parser("report", help="summarize JSON guard records")
    r.add_argument("inputs", nargs="+")
    r.add_argument("--format", default="text", choices=["text", "json"])
    r.add_argument("--csv")
    r.set_defaults(fn=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "timeout", 1) is not None and getattr(args, "timeout", 1) <= 0:
        return _die("--timeout must be positive", EXIT_INPUT)
    try:
        return args.fn(args)
    except SystemExit as e:
        return e.code


if __name__ == "__main__":
    sys.exit(main())
