"""Ablations: full MCTS against its three ablated variants on the same corpus."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from symtree.experiments import rq3, rq3_verdict


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", type=Path, default=Path("runs/corpus"))
    ap.add_argument("--out", type=Path, default=Path("runs/rq3"))
    ap.add_argument("--selections", type=int, default=2000)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--reuse", type=Path, default=None, help="RQ1 output whose full-MCTS cells are copied")
    args = ap.parse_args()
    seeds = tuple(int(s) for s in args.seeds.split(","))
    res = rq3(args.corpus, args.out, seeds, args.selections, log=lambda m: print(m, file=sys.stderr, flush=True), prior=args.reuse)
    ok, msg = rq3_verdict(res.totals)
    print((args.out / "summary.txt").read_text(), end="")
    print(f"seconds={res.seconds:.1f}")
    print(f"ablations: {'PASS' if ok else 'FAIL'} ({msg})")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
