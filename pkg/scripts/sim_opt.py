"""Counts playouts at the loop program's fork site for several optimization degrees."""

from __future__ import annotations

import argparse
import math
import sys

from symtree.experiments import sim_optimization


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degrees", default="1,5,20,inf")
    ap.add_argument("--max-selections", type=int, default=200)
    args = ap.parse_args()
    print("degree,simulations,after_onset,seconds")
    for d in args.degrees.split(","):
        degree = math.inf if d == "inf" else int(d)
        r = sim_optimization(degree, args.max_selections)
        print(f"{d},{r.simulations},{r.after_onset},{r.seconds:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
