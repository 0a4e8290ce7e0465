"""Time naive vs online softmax equivalence as the vector length grows.

    python scripts/softmax_scaling.py --sizes 4 8 16 32 --jobs 4

Prints one row per size: verdict, per-phase timings and the number of max
cases the decision procedure split each VC into.
"""

from __future__ import annotations

import argparse
import time

from volta_mini import corpus
from volta_mini.frontend import LaunchConfig
from volta_mini.pipeline import CheckRequest, check_equivalence


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 16])
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    a = corpus.path("softmax_naive.mk").read_text()
    b = corpus.path("softmax_online.mk").read_text()
    print(f"{'N':>4} {'verdict':12} {'exec_a':>8} {'exec_b':>8} {'decide':>8} {'total':>8} {'cases/VC':>9}")
    for n in args.sizes:
        cfg = LaunchConfig(n, params={"N": n})
        t = time.perf_counter()
        r = check_equivalence(CheckRequest(a, b, cfg), jobs=args.jobs)
        total = time.perf_counter() - t
        cases = max((v.get("cases", 0) for v in r.vcs), default=0)
        tm = r.timings
        print(
            f"{n:>4} {r.verdict:12} {tm['exec_a']:8.3f} {tm['exec_b']:8.3f} "
            f"{tm['decide']:8.3f} {total:8.3f} {cases:>9}"
        )


if __name__ == "__main__":
    main()
