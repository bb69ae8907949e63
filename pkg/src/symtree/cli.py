"""Command-line front end: run, analyze, bench, gen-corpus.

Exit status: 0 on success, 1 on usage or input errors, 2 on internal errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from .analysis import AnalysisError, format_classification
from .bench import ABLATIONS, BenchConfig, CorpusSpec, cmd_bench, gen_corpus
from .engine import EngineConfig, Executor, write_run_artifacts
from .ir import IRError, parse_program
from .mcts import SQRT2, MctsConfig, MctsSearcher, write_tree_dump
from .strategies import ALL_STRATEGIES

EXIT_OK, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; usage errors are 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _degree(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'inf', got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("optimization degree must be positive")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _add_shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--max-selections", type=_nonneg, default=None, help="state-selection budget")
    p.add_argument("--max-steps", type=_nonneg, default=None, help="total instruction budget")
    p.add_argument("--solver-budget", type=_nonneg, default=100_000, help="search steps per solver query")
    p.add_argument("--budget-ms", type=_nonneg, default=None, help="wall-clock budget (nondeterministic)")
    p.add_argument("--record-wall-time", action="store_true", help="write real wall times into errors.csv/stats.csv")
    p.add_argument("--coverage-scope", choices=("all", "tree"), default="all",
                   help="count unsafe sites covered by playouts too (all) or only by real execution (tree)")


def _add_mcts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--uct-c", type=float, default=SQRT2)
    p.add_argument("--optimization-degree", type=_degree, default=700)
    p.add_argument("--sim-step-cap", type=_nonneg, default=20000)
    p.add_argument("--no-guided-expansion", action="store_true")
    p.add_argument("--no-simulation", action="store_true")
    p.add_argument("--no-sim-opt", action="store_true")
    p.add_argument("--reward-scope", choices=("playout", "new"), default="playout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="symtree", description="Symbolic execution with unsafe-pointer-guided MCTS search.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="explore one program")
    run.add_argument("program", type=Path)
    run.add_argument("--search", choices=ALL_STRATEGIES, default="mcts")
    run.add_argument("--tree-dump", type=Path, default=None)
    _add_shared(run)
    _add_mcts(run)

    an = sub.add_parser("analyze", help="print the pointer classification and unsafe sites")
    an.add_argument("program", type=Path)

    bench = sub.add_parser("bench", help="run every strategy on every corpus program")
    bench.add_argument("corpus", type=Path)
    bench.add_argument("--strategies", default=",".join(ALL_STRATEGIES),
                       help="comma-separated; ablations: " + ", ".join(ABLATIONS))
    bench.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    bench.add_argument("--no-witnesses", action="store_true")
    bench.add_argument("--quiet", action="store_true")
    bench.add_argument("--reuse", type=Path, help="earlier bench output; cells with an identical configuration are copied")
    _add_shared(bench)
    _add_mcts(bench)

    gen = sub.add_parser("gen-corpus", help="generate a benchmark corpus")
    gen.add_argument("--count", type=_nonneg, default=30)
    gen.add_argument("--min-segments", type=_nonneg, default=CorpusSpec.min_segments)
    gen.add_argument("--max-segments", type=_nonneg, default=CorpusSpec.max_segments)
    gen.add_argument("--loop-prob", type=float, default=CorpusSpec.loop_prob)
    gen.add_argument("--bug-prob", type=float, default=CorpusSpec.bug_prob)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, default=Path("corpus"))
    return parser


def engine_config(args, default_selections: int | None) -> EngineConfig:
    sel = args.max_selections if args.max_selections is not None else default_selections
    return EngineConfig(
        max_selections=sel,
        max_steps=args.max_steps,
        budget_ms=args.budget_ms,
        solver_budget=args.solver_budget,
        coverage_scope=args.coverage_scope,
        record_wall_time=args.record_wall_time or args.budget_ms is not None,
        seed=args.seed,
    )


def mcts_config(args) -> MctsConfig:
    return MctsConfig(
        c=args.uct_c,
        optimization_degree=args.optimization_degree,
        sim_step_cap=args.sim_step_cap,
        seed=args.seed,
        guided_expansion=not args.no_guided_expansion,
        simulation=not args.no_simulation,
        sim_optimization=not args.no_sim_opt,
        reward_scope=args.reward_scope,
    )


def _load(path: Path):
    try:
        return parse_program(path.read_text())
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    except IRError as e:
        raise UsageError(f"{path}: {e}") from None


def cmd_run(args) -> int:
    from .bench import make_strategy

    program = _load(args.program)
    searcher = make_strategy(args.search, args.seed, mcts_config(args))
    ex = Executor(program, searcher, engine_config(args, None))
    st = ex.run()
    write_run_artifacts(ex, args.out, args.search)
    if args.tree_dump is not None:
        write_tree_dump(ex, args.tree_dump)
    print(
        f"{args.search}: selections={st.selections} unsafe_covered={st.unsafe_covered} "
        f"unique_errors={st.unique_errors} test_cases={st.test_cases}"
    )
    if isinstance(searcher, MctsSearcher):
        print(f"backpropagations={searcher.backprops} simulations={st.simulations}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    program = _load(args.program)
    sys.stdout.write(format_classification(program))
    return EXIT_OK


def cmd_bench_cli(args) -> int:
    strategies = tuple(s for s in args.strategies.split(",") if s)
    unknown = [s for s in strategies if s not in ALL_STRATEGIES and s not in ABLATIONS]
    if unknown:
        raise UsageError(f"unknown strategies: {', '.join(unknown)}")
    try:
        seeds = tuple(int(s) for s in args.seeds.split(",") if s)
    except ValueError:
        raise UsageError(f"bad --seeds {args.seeds!r}") from None
    if not args.corpus.is_dir():
        raise UsageError(f"corpus directory {args.corpus} does not exist")
    config = BenchConfig(
        strategies=strategies,
        seeds=seeds,
        engine=engine_config(args, 2000),
        mcts=mcts_config(args),
        witnesses=not args.no_witnesses,
    )
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    records = cmd_bench(args.corpus, args.out, config, log, args.reuse)
    sys.stdout.write((args.out / "summary.txt").read_text())
    return EXIT_OK if not any(r.failed for r in records) else EXIT_INTERNAL


def cmd_gen_corpus(args) -> int:
    if args.min_segments > args.max_segments:
        raise UsageError("--min-segments exceeds --max-segments")
    spec = replace(
        CorpusSpec(),
        program_count=args.count,
        min_segments=args.min_segments,
        max_segments=args.max_segments,
        loop_prob=args.loop_prob,
        bug_prob=args.bug_prob,
        seed=args.seed,
    )
    manifest = gen_corpus(spec, args.out)
    planted = sum(1 for _, bugs in manifest if bugs)
    print(f"wrote {len(manifest)} programs to {args.out} ({planted} with planted bugs)")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "analyze": cmd_analyze, "bench": cmd_bench_cli, "gen-corpus": cmd_gen_corpus}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, AnalysisError) as e:
        print(f"symtree: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - report, exit 2
        print(f"symtree: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
