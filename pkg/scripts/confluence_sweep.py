"""Sweep random programs through the schedule oracle.

    python scripts/confluence_sweep.py --count 2000 --threads 3 --warp-size 3

For each program, every schedule is enumerated and the checked run is
compared against the trace-definition race oracle.  Reports how many programs
were confluent, how many raced, and any disagreement between the checked
dynamics and the oracle (printing the first few offending programs).
"""

from __future__ import annotations

import argparse
import random
import time
from collections import Counter

from volta_mini import symexpr as sx
from volta_mini.ir import stmt_str
from volta_mini.oracle import enumerate_schedules, has_unchecked_race
from volta_mini.randprog import GenConfig, initial_memory, random_program
from volta_mini.symexec import run


def canon(o):
    return frozenset((k, sx.canonicalize(v)) for k, v in o.shared.items())


def show(p) -> str:
    return "\n".join(f"  t{t}: " + "; ".join(stmt_str(s) for s in th) for t, th in enumerate(p.threads))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=3)
    ap.add_argument("--stmts", type=int, default=6)
    ap.add_argument("--addrs", type=int, default=3)
    ap.add_argument("--warp-size", type=int, default=2)
    ap.add_argument("--show", type=int, default=3, help="offending programs to print")
    args = ap.parse_args()

    cfg = GenConfig(args.threads, args.stmts, args.addrs, warp_size=args.warp_size)
    rng = random.Random(args.seed)
    stats: Counter[str] = Counter()
    bad = []
    t = time.perf_counter()
    for _ in range(args.count):
        p = random_program(rng, cfg)
        init = initial_memory(p)
        outs = enumerate_schedules(p, init)
        kinds = {o.kind for o in outs}
        finals = {canon(o) for o in outs if o.kind == "final"}
        if "final" in kinds and (len(kinds) > 1 or len(finals) > 1):
            stats["non-confluent"] += 1
            bad.append(("non-confluent", p))
        stats["final" if kinds == {"final"} else "error"] += 1
        oracle = has_unchecked_race(p)
        checked = run(p, init).kind == "race"
        stats["oracle race"] += oracle
        if oracle != checked:
            key = "false positive" if checked else "false negative"
            stats[key] += 1
            bad.append((key, p))
    elapsed = time.perf_counter() - t

    print(f"{args.count} programs in {elapsed:.1f}s (threads<={args.threads}, W={args.warp_size})")
    for k in ("final", "error", "oracle race", "non-confluent", "false positive", "false negative"):
        print(f"  {k:15s} {stats[k]}")
    for kind, p in bad[: args.show]:
        print(f"\n{kind}:\n{show(p)}")


if __name__ == "__main__":
    main()
