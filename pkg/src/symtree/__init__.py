"""Miniature symbolic execution engine with unsafe-pointer-guided MCTS search."""

from .analysis import ProgramAnalysis, classify_pointers, compute_post_dominators, unique_blocks, unsafe_sites
from .engine import EngineConfig, ErrorRecord, Executor, RunStats, TestCase
from .ir import Location, Program, parse_program
from .mcts import MctsConfig, MctsSearcher
from .solver import canonical_model, check_sat
from .strategies import ALL_STRATEGIES, BASELINES, make_searcher

__version__ = "0.1.0"

__all__ = [
    "ALL_STRATEGIES",
    "BASELINES",
    "EngineConfig",
    "ErrorRecord",
    "Executor",
    "Location",
    "MctsConfig",
    "MctsSearcher",
    "Program",
    "ProgramAnalysis",
    "RunStats",
    "TestCase",
    "canonical_model",
    "check_sat",
    "classify_pointers",
    "compute_post_dominators",
    "make_searcher",
    "parse_program",
    "unique_blocks",
    "unsafe_sites",
]
