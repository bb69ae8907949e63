"""Strategy comparison on the generated corpus: all seven strategies, 3 seeds."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from symtree.experiments import rq1, rq1_verdict


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", type=Path, default=Path("runs/corpus"))
    ap.add_argument("--out", type=Path, default=Path("runs/rq1"))
    ap.add_argument("--selections", type=int, default=2000)
    ap.add_argument("--seeds", default="0,1,2")
    args = ap.parse_args()
    seeds = tuple(int(s) for s in args.seeds.split(","))
    res = rq1(args.corpus, args.out, seeds, args.selections, log=lambda m: print(m, file=sys.stderr, flush=True))
    ok, msg = rq1_verdict(res.totals)
    print((args.out / "summary.txt").read_text(), end="")
    print(f"programs={res.programs} planted={res.planted_fraction:.2f} seconds={res.seconds:.1f}")
    print(f"directional RQ1: {'PASS' if ok else 'FAIL'} ({msg})")
    if res.correlation is not None:
        print(f"correlation > 0.3: {'PASS' if res.correlation > 0.3 else 'FAIL'} (r={res.correlation:.4f})")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
