"""Command-line entry point.

Exit codes: 0 equivalent/ok, 1 not-equivalent, 2 kernel error (race,
deadlock, safety, structural), 3 unknown, 4 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus, serialize
from . import symexpr as sx
from .decide import Budgets, eq
from .frontend import LaunchConfig
from .oracle import EnumerationLimit, enumerate_schedules
from .pipeline import (
    CheckRequest,
    KernelError,
    Report,
    check_equivalence,
    exit_code,
    make_symbolic_inputs,
    output_roots,
    prepare,
    serialize_env,
)
from .symexec import parse_trace, run

EXIT_OK, EXIT_NOT_EQUIVALENT, EXIT_KERNEL_ERROR, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}")


def _resolve(path: str) -> Path:
    """A path as given, or else the bundled corpus file of that name."""
    p = Path(path)
    if p.exists():
        return p
    q = corpus.path(path)
    if q.exists():
        return q
    raise UsageError(f"no such file: {path}")


def _read(path: str) -> str:
    try:
        return _resolve(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _config(path: str) -> LaunchConfig:
    return LaunchConfig.loads(_read(path))


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------


def fmt_race(r: dict) -> str:
    a, b = r["first"], r["second"]
    return (
        f"data race on {r['address']}: {a['kind']} by thread {a['tid']} ({a['loc']}) "
        f"vs {b['kind']} by thread {b['tid']} ({b['loc']}) at step {r['step']}"
    )


def fmt_deadlock(d: dict) -> str:
    lines = ["deadlock:"]
    if "conflict" in d:
        c = d["conflict"]
        lines[0] += (
            f" thread {c['tid_a']} waits on {{{','.join(map(str, c['set_a']))}}}, "
            f"thread {c['tid_b']} waits on {{{','.join(map(str, c['set_b']))}}}"
        )
    for t, s in enumerate(d["threads"]):
        lines.append(f"  thread {t}: {s}")
    return "\n".join(lines)


def fmt_safety(s: dict) -> str:
    who = f"thread {s['tid']} at {s['loc']}" if s["tid"] >= 0 else s["loc"]
    out = f"{s['kind']}: {who}: {s['target']}"
    return out + (f" ({s['detail']})" if s.get("detail") else "")


def summarize(report: Report) -> str:
    lines = [f"verdict: {report.verdict}"]
    for key in ("a", "b"):
        k = report.kernels[key]
        desc = f"{k['label']}"
        if "name" in k:
            desc += f" [{k['name']}, {k['threads']} threads, {k['statements']} statements]"
        lines.append(f"kernel {key.upper()}: {desc}: {k['status']}")
    if report.error:
        e = report.error
        lines.append(f"{e['kind']} error in kernel {e['kernel'].upper()}: {e['message']}")
    if report.race:
        lines.append(fmt_race(report.race))
    if report.deadlock:
        lines.append(fmt_deadlock(report.deadlock))
    if report.safety:
        lines.append(fmt_safety(report.safety))
    for v in report.vcs:
        name = f"{v['array']}[{v['index']}]"
        if v["verdict"] == "equal":
            lines.append(f"  {name}: equal ({v['method']}, {v['cases']} case{'s' if v['cases'] != 1 else ''})")
        elif v["verdict"] == "not-equal":
            w = v["witness"]
            pt = ", ".join(f"{k}={x}" for k, x in w["point"].items())
            lines.append(f"  {name}: NOT equal at {{{pt}}}: A in {w['lhs']}, B in {w['rhs']}")
        else:
            lines.append(f"  {name}: unknown ({v['reason']})")
    if report.side_conditions:
        open_ = [s["nonzero"] for s in report.side_conditions if not s["discharged"]]
        lines.append(
            f"side conditions: {len(report.side_conditions)}, "
            + ("all discharged" if not open_ else f"{len(open_)} undischarged")
        )
        lines.extend(f"  {s} != 0" for s in open_)
    if report.reason:
        lines.append(f"reason: {report.reason}")
    t = report.timings
    lines.append(
        "time: " + ", ".join(f"{k} {t.get(k, 0.0):.3f}s" for k in ("parse", "exec_a", "exec_b", "decide"))
    )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    if args.corpus:
        return _check_corpus(args)
    if len(args.kernels) != 2 or not args.config:
        raise UsageError("check needs two kernel files and --config (or --corpus)")
    a, b = args.kernels
    req = CheckRequest(_read(a), _read(b), _config(args.config), a_label=a, b_label=b)
    report = check_equivalence(req, jobs=args.jobs, emit_env=args.emit_env)
    # with --report - stdout carries only the JSON
    print(summarize(report), file=sys.stderr if args.report == "-" else sys.stdout)
    if args.report:
        text = report.to_json()
        if args.report == "-":
            sys.stdout.write(text)
        else:
            Path(args.report).write_text(text, encoding="utf-8")
    return exit_code(report)


def _check_corpus(args) -> int:
    wanted = set(args.kernels)
    failures = 0
    for p in corpus.pairs():
        if wanted and p.name not in wanted:
            continue
        if p.slow and not args.slow and p.name not in wanted:
            continue
        req = CheckRequest(p.a.read_text(), p.b.read_text(), LaunchConfig.load(p.config), p.a.name, p.b.name)
        r = check_equivalence(req, jobs=args.jobs)
        kind_ok = p.outcome is None or getattr(r, p.outcome) is not None
        ok = r.verdict == p.verdict and kind_ok
        failures += not ok
        got = r.verdict + (f" ({p.outcome})" if p.outcome and kind_ok else "")
        print(f"{'ok  ' if ok else 'FAIL'} {p.name:26s} expected {p.verdict:15s} got {got}")
    return EXIT_OK if not failures else EXIT_NOT_EQUIVALENT


def cmd_exec(args) -> int:
    cfg = _config(args.config).for_kernel(args.kernel)
    prep = prepare(_read(args.file), cfg)
    sched = args.schedule
    if sched.startswith("trace:"):
        sched = parse_trace(_read(sched[len("trace:"):]))
    out = run(prep.program, make_symbolic_inputs(prep.launch), sched, checked=not args.unchecked)
    if out.kind == "final":
        for name, e in output_roots(out.shared, prep.launch.outputs).items():
            print(f"{name} = {sx.to_str(e)}")
        if args.emit_env:
            serialize_env(out.shared, prep.launch.outputs, args.emit_env)
        if args.trace:
            print("\n".join(out.trace))
        return EXIT_OK
    payload = out.report.as_dict()
    print({"race": fmt_race, "deadlock": fmt_deadlock, "safety": fmt_safety}[out.kind](payload))
    return EXIT_KERNEL_ERROR


def cmd_enumerate(args) -> int:
    cfg = _config(args.config).for_kernel(args.kernel)
    prep = prepare(_read(args.file), cfg)
    try:
        outs = enumerate_schedules(prep.program, make_symbolic_inputs(prep.launch), args.limit)
    except EnumerationLimit as exc:
        print(f"error: {exc}; raise --limit", file=sys.stderr)
        return EXIT_USAGE
    print(f"{len(outs)} distinct outcome{'s' if len(outs) != 1 else ''}")
    for o in outs:
        if o.kind == "final":
            roots = output_roots(o.shared, prep.launch.outputs)
            print("final: " + "; ".join(f"{k} = {sx.to_str(sx.canonicalize(e))}" for k, e in roots.items()))
        else:
            fmt = {"race": fmt_race, "deadlock": fmt_deadlock, "safety": fmt_safety}[o.kind]
            print(f"{o.kind}: {fmt(o.report.as_dict())}")
    return EXIT_OK if all(o.kind == "final" for o in outs) else EXIT_KERNEL_ERROR


def _load_expr(path: str) -> sx.Expr:
    text = _read(path)
    try:
        return serialize.loads(text)
    except serialize.FormatError:
        env = serialize.loads_env(text)
        if len(env) != 1:
            raise
        return next(iter(env.values()))


def cmd_decide(args) -> int:
    f, g = _load_expr(args.f), _load_expr(args.g)
    v = eq(f, g, budgets=Budgets.from_env(), seed=args.seed)
    d: dict = {"verdict": v.kind}
    if v.kind == "equal":
        d.update(method=v.method, cases=v.cases)
    elif v.kind == "not-equal":
        d["witness"] = v.witness.as_dict()
    else:
        d["reason"] = v.reason
    d["side_conditions"] = [s.as_dict() for s in v.side_conditions]
    print(json.dumps(d, indent=2))
    return {"equal": EXIT_OK, "not-equal": EXIT_NOT_EQUIVALENT}.get(v.kind, EXIT_UNKNOWN)


def cmd_fmt_env(args) -> int:
    env = serialize.loads_env(_read(args.path))
    for name, e in env.items():
        if args.canonical:
            e = sx.canonicalize(e)
        print(f"{name} = {sx.to_str(e)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="volta-mini", description="Equivalence checker for mini GPU kernels.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="check two kernels for equivalence")
    c.add_argument("kernels", nargs="*", help="kernel A and kernel B (or pair names with --corpus)")
    c.add_argument("--config")
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--report", help="write the JSON report here ('-' for stdout)")
    c.add_argument("--emit-env", help="directory for a.env and b.env")
    c.add_argument("--corpus", action="store_true", help="run the bundled corpus against its expected verdicts")
    c.add_argument("--slow", action="store_true", help="include slow corpus pairs")
    c.set_defaults(fn=cmd_check)

    e = sub.add_parser("exec", help="symbolically execute one kernel")
    e.add_argument("file")
    e.add_argument("--config", required=True)
    e.add_argument("--kernel", choices=("a", "b"), default="a", help="which config overrides apply")
    e.add_argument("--schedule", default="round-robin", help="round-robin, random:SEED or trace:PATH")
    e.add_argument("--unchecked", action="store_true", help="disable race detection")
    e.add_argument("--emit-env")
    e.add_argument("--trace", action="store_true", help="print the executed schedule")
    e.set_defaults(fn=cmd_exec)

    n = sub.add_parser("enumerate", help="explore every schedule of one kernel")
    n.add_argument("file")
    n.add_argument("--config", required=True)
    n.add_argument("--kernel", choices=("a", "b"), default="a")
    n.add_argument("--limit", type=int, default=100_000)
    n.set_defaults(fn=cmd_enumerate)

    d = sub.add_parser("decide", help="decide equality of two serialized expressions")
    d.add_argument("f")
    d.add_argument("g")
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(fn=cmd_decide)

    f = sub.add_parser("fmt-env", help="pretty-print an env file")
    f.add_argument("path")
    f.add_argument("--canonical", action="store_true")
    f.set_defaults(fn=cmd_fmt_env)
    return ap


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be at least 1")
        return args.fn(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except KernelError as exc:
        print(f"error: {exc.payload.get('message', exc)}", file=sys.stderr)
        return EXIT_KERNEL_ERROR
    except ValueError as exc:  # config, env-file, trace and budget errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
