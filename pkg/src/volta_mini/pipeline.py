"""End-to-end equivalence checking of two kernels.

Phases run in a fixed order: parse and elaborate A, then B; execute A, then
B, against the same symbolic inputs; build one verification condition per
output element; decide the conditions (optionally in worker processes);
assemble a :class:`Report`.  Every failure becomes a report verdict.
"""

from __future__ import annotations

import json
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import serialize
from . import symexpr as sx
from .decide import Budgets, eq
from .frontend import (
    ConfigError,
    ElaborationError,
    KernelSyntaxError,
    Launch,
    LaunchConfig,
    StructuredCtaError,
    elaborate,
    parse_kernel,
    resolve,
)
from .ir import Addr, Program
from .symexec import Final, Outcome, SafetyReport, run
from .symexpr import Expr

VERDICTS = ("equivalent", "not-equivalent", "kernel-A-error", "kernel-B-error", "unknown")


@dataclass(frozen=True)
class CheckRequest:
    a_source: str
    b_source: str
    config: LaunchConfig
    a_label: str = "a"
    b_label: str = "b"


@dataclass(frozen=True)
class VC:
    array: str
    index: int
    lhs: Expr
    rhs: Expr

    @property
    def name(self) -> str:
        return f"{self.array}[{self.index}]"


@dataclass
class Report:
    verdict: str
    kernels: dict
    vcs: list = field(default_factory=list)
    race: dict | None = None
    deadlock: dict | None = None
    safety: dict | None = None
    error: dict | None = None
    side_conditions: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    reason: str | None = None

    def as_dict(self, with_timings: bool = True) -> dict:
        d: dict = {"verdict": self.verdict, "kernels": self.kernels, "vcs": self.vcs}
        for key in ("race", "deadlock", "safety", "error"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        d["side_conditions"] = self.side_conditions
        if self.reason is not None:
            d["reason"] = self.reason
        if with_timings:
            d["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return d

    def to_json(self, with_timings: bool = True) -> str:
        return json.dumps(self.as_dict(with_timings), indent=2) + "\n"


# ---------------------------------------------------------------------------
# inputs and environments
# ---------------------------------------------------------------------------


def symbol_name(array: str, index: int) -> str:
    return f"{array}_{index}"


def make_symbolic_inputs(inputs: Mapping[str, int] | Launch) -> dict[Addr, Expr]:
    """One fresh variable ``<array>_<index>`` per input element."""
    if isinstance(inputs, Launch):
        inputs = {a: inputs.sizes[a] for a in inputs.inputs}
    return {Addr(a, i): sx.var(symbol_name(a, i)) for a, n in inputs.items() for i in range(n)}


def output_roots(mem: Mapping[Addr, Expr], outputs: Sequence[str]) -> dict[str, Expr]:
    roots: dict[str, Expr] = {}
    for a in outputs:
        for g in sorted((g for g in mem if g.array == a), key=lambda g: g.offset):
            roots[str(g)] = mem[g]
    return roots


def serialize_env(mem: Mapping[Addr, Expr], outputs: Sequence[str], path: str | Path) -> None:
    """Write the output elements of ``mem`` to ``path`` over one shared node table."""
    Path(path).write_text(serialize.dumps_env(output_roots(mem, outputs)), encoding="utf-8")


def deserialize_env(path: str | Path) -> dict[Addr, Expr]:
    env = serialize.loads_env(Path(path).read_text(encoding="utf-8"))
    out: dict[Addr, Expr] = {}
    for name, e in env.items():
        array, _, rest = name.partition("[")
        if not rest.endswith("]"):
            raise serialize.FormatError(f"root name {name!r} is not of the form array[index]")
        out[Addr(array, int(rest[:-1]))] = e
    return out


# ---------------------------------------------------------------------------
# kernel front half
# ---------------------------------------------------------------------------


@dataclass
class Prepared:
    program: Program
    launch: Launch


class KernelError(Exception):
    """Parse/elaboration failure, carrying the report payload."""

    def __init__(self, payload: dict):
        super().__init__(payload.get("message", ""))
        self.payload = payload


def prepare(source: str, cfg: LaunchConfig) -> Prepared:
    try:
        ast = parse_kernel(source)
        launch = resolve(ast, cfg)
        p = elaborate(ast, cfg)
    except KernelSyntaxError as exc:
        raise KernelError(
            {"kind": "syntax", "message": exc.msg_text, "line": exc.line, "col": exc.col}
        ) from None
    except StructuredCtaError as exc:
        raise KernelError(
            {"kind": "structured-cta", "reason": exc.reason, "loc": exc.loc, "message": str(exc)}
        ) from None
    except (ElaborationError, ConfigError) as exc:
        raise KernelError({"kind": "elaboration", "message": str(exc)}) from None
    return Prepared(p, launch)


def execute(source: str, cfg: LaunchConfig, schedule="round-robin") -> tuple[Prepared, Outcome]:
    """Elaborate and run one kernel on fresh symbolic inputs."""
    prep = prepare(source, cfg)
    return prep, run(prep.program, make_symbolic_inputs(prep.launch), schedule)


# ---------------------------------------------------------------------------
# deciding
# ---------------------------------------------------------------------------


def vc_seed(array: str, index: int) -> int:
    return zlib.crc32(f"{array}[{index}]".encode())


def _decide_one(job: tuple[str, str, int, Budgets]) -> dict:
    """Decide one VC given as env text; runs in worker processes too."""
    name, text, seed, budgets = job
    env = serialize.loads_env(text)
    v = eq(env["lhs"], env["rhs"], budgets=budgets, seed=seed)
    out: dict = {"verdict": v.kind}
    if v.kind == "equal":
        out["method"] = v.method
        out["cases"] = v.cases
    elif v.kind == "not-equal":
        out["witness"] = v.witness.as_dict()
    else:
        out["reason"] = v.reason
    out["side_conditions"] = [s.as_dict() for s in v.side_conditions]
    return out


def decide_vcs(vcs: Sequence[VC], jobs: int = 1, budgets: Budgets | None = None) -> list[dict]:
    budgets = budgets or Budgets.from_env()
    work = [
        (vc.name, serialize.dumps_env({"lhs": vc.lhs, "rhs": vc.rhs}), vc_seed(vc.array, vc.index), budgets)
        for vc in vcs
    ]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            return list(pool.map(_decide_one, work))
    return [_decide_one(w) for w in work]


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def _kernel_info(label: str, prep: Prepared | None, status: str) -> dict:
    d: dict = {"label": label, "status": status}
    if prep is not None:
        d["name"] = prep.program.name
        d["threads"] = prep.program.n
        d["statements"] = sum(len(t) for t in prep.program.threads)
    return d


def _error_outcome(report: Report, outcome: Outcome, which: str) -> None:
    report.verdict = f"kernel-{which}-error"
    payload = outcome.report.as_dict()
    payload["kernel"] = which.lower()
    setattr(report, outcome.kind, payload)


def check_equivalence(
    req: CheckRequest,
    jobs: int = 1,
    *,
    emit_env: str | Path | None = None,
    budgets: Budgets | None = None,
) -> Report:
    timings = {"parse": 0.0, "exec_a": 0.0, "exec_b": 0.0, "decide": 0.0}
    kernels = {"a": {"label": req.a_label, "status": "pending"}, "b": {"label": req.b_label, "status": "pending"}}
    report = Report("unknown", kernels, timings=timings)

    preps: dict[str, Prepared] = {}
    t0 = time.perf_counter()
    for which, src in (("A", req.a_source), ("B", req.b_source)):
        key = which.lower()
        try:
            preps[key] = prepare(src, req.config.for_kernel(key))
        except KernelError as exc:
            timings["parse"] = time.perf_counter() - t0
            report.verdict = f"kernel-{which}-error"
            report.error = dict(exc.payload, kernel=key)
            kernels[key] = _kernel_info(getattr(req, f"{key}_label"), None, exc.payload["kind"])
            return report
        kernels[key] = _kernel_info(getattr(req, f"{key}_label"), preps[key], "elaborated")
    timings["parse"] = time.perf_counter() - t0

    la, lb = preps["a"].launch, preps["b"].launch
    if la.signature() != lb.signature():
        report.reason = (
            f"input/output signatures differ: a has {_sig_str(la)}, b has {_sig_str(lb)}"
        )
        return report

    init = make_symbolic_inputs(la)
    finals: dict[str, Final] = {}
    for which in ("A", "B"):
        key = which.lower()
        t = time.perf_counter()
        out = run(preps[key].program, init)
        timings[f"exec_{key}"] = time.perf_counter() - t
        kernels[key]["status"] = out.kind
        if out.kind != "final":
            _error_outcome(report, out, which)
            return report
        finals[key] = out

    vcs: list[VC] = []
    for a in la.outputs:
        for i in range(la.sizes[a]):
            g = Addr(a, i)
            sides = []
            for which in ("A", "B"):
                key = which.lower()
                v = finals[key].shared.get(g)
                if v is None:
                    kernels[key]["status"] = "safety"
                    _error_outcome(
                        report,
                        _Unwritten(SafetyReport("uninitialized-memory-read", -1, f"<output {g}>", str(g),
                                                "output element never written")),
                        which,
                    )
                    return report
                sides.append(v)
            vcs.append(VC(a, i, sides[0], sides[1]))

    if emit_env is not None:
        d = Path(emit_env)
        d.mkdir(parents=True, exist_ok=True)
        serialize_env(finals["a"].shared, la.outputs, d / "a.env")
        serialize_env(finals["b"].shared, la.outputs, d / "b.env")

    t = time.perf_counter()
    results = decide_vcs(vcs, jobs, budgets)
    timings["decide"] = time.perf_counter() - t

    conds: dict[str, bool] = {}
    for vc, r in zip(vcs, results):
        entry = {"array": vc.array, "index": vc.index, "verdict": r["verdict"]}
        for k in ("method", "cases", "witness", "reason"):
            if k in r:
                entry[k] = r[k]
        report.vcs.append(entry)
        for s in r["side_conditions"]:
            conds[s["nonzero"]] = conds.get(s["nonzero"], True) and s["discharged"]
    report.side_conditions = [{"nonzero": k, "discharged": v} for k, v in conds.items()]

    kinds = [r["verdict"] for r in results]
    if "not-equal" in kinds:
        report.verdict = "not-equivalent"
    elif "unknown" in kinds:
        report.verdict = "unknown"
        report.reason = f"{kinds.count('unknown')} of {len(kinds)} verification conditions undecided"
    elif not all(conds.values()):
        report.verdict = "unknown"
        report.reason = "side conditions not discharged: " + ", ".join(k for k, v in conds.items() if not v)
    else:
        report.verdict = "equivalent"
    return report


@dataclass(frozen=True)
class _Unwritten:
    report: SafetyReport
    kind = "safety"


def _sig_str(l: Launch) -> str:
    ins, outs = l.signature()
    f = lambda xs: ", ".join(f"{a}[{n}]" for a, n in xs) or "none"  # noqa: E731
    return f"inputs {f(ins)}; outputs {f(outs)}"


EXIT_CODES = {
    "equivalent": 0,
    "not-equivalent": 1,
    "kernel-A-error": 2,
    "kernel-B-error": 2,
    "unknown": 3,
}


def exit_code(report: Report) -> int:
    return EXIT_CODES[report.verdict]
