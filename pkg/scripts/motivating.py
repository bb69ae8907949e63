"""Runs every strategy on the bundled motivating program and prints when each
reaches the abort plus the heap labels of its terminals in order."""

from __future__ import annotations

import argparse
import sys

from symtree.experiments import motivating


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-selections", type=int, default=50)
    args = ap.parse_args()
    runs = motivating(args.seed, args.max_selections)
    print("strategy,abort_selection,first_terminal_is_abort,terminal_labels")
    for name, r in runs.items():
        labels = " ".join(str(x) for x in r.terminal_labels)
        print(f"{name},{r.error_selection if r.error_selection is not None else '-'},{r.first_terminal_is_abort},{labels}")
    best = min(r.error_selection for r in runs.values() if r.error_selection is not None)
    return 0 if runs["mcts"].error_selection == best else 1


if __name__ == "__main__":
    sys.exit(main())
