"""Experiment drivers shared by scripts/ and the acceptance tests."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .bench import BenchConfig, BenchRecord, CorpusSpec, aggregate, cmd_bench, gen_corpus, pearson, read_manifest
from .engine import EngineConfig, Executor
from .ir import Location, Program, parse_program
from .mcts import MctsConfig, MctsSearcher, tree_rows
from .strategies import ALL_STRATEGIES, BASELINES, make_searcher


def bundled_program(name: str) -> Program:
    """One of the programs shipped in symtree/programs (e.g. 'motivating')."""
    text = resources.files("symtree").joinpath("programs", f"{name}.ir").read_text()
    return parse_program(text)


def heap_labels(executor: Executor) -> dict[int, int]:
    """Number tree nodes like a binary heap: root 1, true child 2k+1, false child 2k."""
    labels: dict[int, int] = {}
    for sid, parent, side, *_ in tree_rows(executor):
        labels[sid] = 1 if parent is None else 2 * labels[parent] + (1 if side else 0)
    return labels


@dataclass
class MotivatingRun:
    strategy: str
    error_selection: int | None  # selection index of the abort error
    terminal_labels: list[int]  # heap labels of terminals in termination order
    first_terminal_is_abort: bool
    seconds: float


ABORT_SITE = Location("main", "fail", 0)


def motivating(seed: int = 0, max_selections: int = 50) -> dict[str, MotivatingRun]:
    program = bundled_program("motivating")
    out = {}
    for name in ALL_STRATEGIES:
        t0 = time.perf_counter()
        ex = Executor(program, make_searcher(name, seed), EngineConfig(max_selections=max_selections, seed=seed))
        ex.run()
        labels = heap_labels(ex)
        sel = next((s for err, s, _ in ex.error_log if err.site == ABORT_SITE), None)
        first = ex.terminals[0][0] if ex.terminals else None
        abort_terms = {sid for sid, status in ex.terminals if status.startswith("error")}
        out[name] = MotivatingRun(
            name,
            sel,
            [labels[sid] for sid, _ in ex.terminals],
            first is not None and first in abort_terms,
            time.perf_counter() - t0,
        )
    return out


@dataclass
class SimOptResult:
    degree: float
    simulations: int  # at the loop's fork site
    after_onset: int  # simulations since the site's best reward last improved
    seconds: float


LOOP_FORK = Location("main", "head", 1)


def sim_optimization(degree: float, max_selections: int = 200) -> SimOptResult:
    program = bundled_program("loop")
    t0 = time.perf_counter()
    searcher = MctsSearcher(MctsConfig(optimization_degree=degree))
    Executor(program, searcher, EngineConfig(max_selections=max_selections)).run()
    st = searcher.table.get(LOOP_FORK)
    return SimOptResult(degree, st.simulations, st.stagnant, time.perf_counter() - t0)


@dataclass
class BenchOutcome:
    records: list[BenchRecord]
    totals: dict[str, dict[str, int]]
    planted_fraction: float
    seconds: float
    programs: int
    correlation: float | None = None
    notes: list[str] = field(default_factory=list)


def ensure_corpus(corpus: Path, spec: CorpusSpec | None = None) -> list[tuple[str, int]]:
    spec = spec or CorpusSpec()
    if not (Path(corpus) / "manifest.csv").exists():
        return gen_corpus(spec, Path(corpus))
    return read_manifest(Path(corpus))


def run_bench(
    corpus: Path,
    out: Path,
    strategies: tuple[str, ...],
    seeds: tuple[int, ...] = (0, 1, 2),
    selections: int = 2000,
    log=None,
    prior: Path | None = None,
) -> BenchOutcome:
    manifest = ensure_corpus(corpus)
    config = BenchConfig(strategies=strategies, seeds=seeds, engine=EngineConfig(max_selections=selections))
    t0 = time.perf_counter()
    records = cmd_bench(corpus, out, config, log, prior)
    outcome = BenchOutcome(
        records,
        aggregate(records),
        sum(1 for _, b in manifest if b) / max(len(manifest), 1),
        time.perf_counter() - t0,
        len(manifest),
    )
    ok = [r for r in records if not r.failed]
    try:
        outcome.correlation = pearson([r.unsafe_covered for r in ok], [r.unique_errors for r in ok])
    except ValueError as e:
        outcome.notes.append(str(e))
    return outcome


def rq1(corpus: Path, out: Path, seeds=(0, 1, 2), selections: int = 2000, log=None) -> BenchOutcome:
    return run_bench(corpus, out, ALL_STRATEGIES, seeds, selections, log)


RQ3_VARIANTS = ("mcts", "mcts-noexp", "mcts-nosim", "mcts-nosopt")


def rq3(corpus: Path, out: Path, seeds=(0, 1, 2), selections: int = 2000, log=None, prior: Path | None = None) -> BenchOutcome:
    """``prior`` may name the RQ1 output: its full-MCTS cells are reused."""
    return run_bench(corpus, out, RQ3_VARIANTS, seeds, selections, log, prior)


def rq1_verdict(totals: dict[str, dict[str, int]]) -> tuple[bool, str]:
    """Each MCTS total is >= every baseline's and > at least three baselines'."""
    m = totals["mcts"]
    ok = True
    parts = []
    for k in ("unsafe_covered", "unique_errors"):
        ge_all = all(m[k] >= totals[b][k] for b in BASELINES)
        beaten = [b for b in BASELINES if m[k] > totals[b][k]]
        ok = ok and ge_all and len(beaten) >= 3
        vals = " ".join(f"{b}={totals[b][k]}" for b in BASELINES)
        parts.append(f"{k}: mcts={m[k]} {vals} (beats {len(beaten)})")
    return ok, "; ".join(parts)


def rq3_verdict(totals: dict[str, dict[str, int]]) -> tuple[bool, str]:
    full = totals["mcts"]["unsafe_covered"]
    others = {v: totals[v]["unsafe_covered"] for v in RQ3_VARIANTS[1:]}
    ok = all(full >= v for v in others.values()) and full > others["mcts-nosim"]
    return ok, f"mcts={full} " + " ".join(f"{k}={v}" for k, v in others.items())


__all__ = [
    "ABORT_SITE",
    "LOOP_FORK",
    "RQ3_VARIANTS",
    "bundled_program",
    "ensure_corpus",
    "heap_labels",
    "motivating",
    "rq1",
    "rq1_verdict",
    "rq3",
    "rq3_verdict",
    "run_bench",
    "sim_optimization",
]
