import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from symtree.bench import ABLATIONS, CorpusSpec, gen_program, make_strategy
from symtree.engine import EngineConfig, Executor
from symtree.experiments import LOOP_FORK, bundled_program, sim_optimization
from symtree.ir import Location, parse_program
from symtree.mcts import (
    SQRT2,
    MctsConfig,
    MctsSearcher,
    StagnationTable,
    TreeNode,
    backpropagate,
    do_selection,
    is_worth_simulation,
    reward_fn,
    uct,
)


def _mcts_run(program, selections=200, **cfg):
    searcher = MctsSearcher(MctsConfig(**cfg))
    ex = Executor(program, searcher, EngineConfig(max_selections=selections))
    ex.run()
    return ex, searcher


# --- formulas -----------------------------------------------------------------


@given(
    st.integers(1, 10**6),
    st.integers(1, 10**6),
    st.floats(0, 1e6, allow_nan=False),
    st.floats(0, 100, allow_nan=False),
)
def test_uct_matches_formula(vp, vc, r, c):
    parent, child = TreeNode(0, V=vp), TreeNode(1, V=vc, R=r)
    direct = r / vc + c * math.sqrt(2 * math.log(vp) / vc)
    assert abs(uct(parent, child, c) - direct) <= 1e-9 * max(1.0, abs(direct))


def test_uct_unvisited_child_is_infinite():
    assert uct(TreeNode(0, V=3), TreeNode(1), SQRT2) == math.inf


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_reward_is_half_unsafe_plus_half_errors(u, e):
    assert reward_fn(u, e) == 0.5 * u + 0.5 * e


def test_reward_examples():
    assert reward_fn(0, 0) == 0
    assert reward_fn(3, 1) == 2.0
    assert reward_fn(1, 0) == 0.5


# --- tree mechanics -----------------------------------------------------------


def test_backpropagate_updates_path_to_root():
    root = TreeNode(0)
    mid = TreeNode(1, parent=root)
    leaf = TreeNode(2, parent=mid)
    assert backpropagate(1.5, leaf) == 3
    assert (root.V, mid.V, leaf.V) == (1, 1, 1)
    assert (root.R, mid.R, leaf.R) == (1.5, 1.5, 1.5)


def test_selection_prefers_unvisited_then_uct():
    root = TreeNode(0, V=10)
    a = TreeNode(1, parent=root, in_tree=True, V=5, R=5.0)
    b = TreeNode(2, parent=root, in_tree=True, V=5, R=1.0)
    root.left, root.right = a, b
    assert do_selection(root, SQRT2) is a
    b.V, b.R = 0, 0.0
    assert do_selection(root, SQRT2) is b
    b.exhausted = True
    assert do_selection(root, SQRT2) is a


def test_selection_without_candidates_raises():
    with pytest.raises(ValueError):
        do_selection(TreeNode(0), SQRT2)


def test_stagnation_counts_from_last_improvement():
    t = StagnationTable()
    site = Location("main", "b", 1)
    for r in (0, 0, 1.5, 1.0, 1.5, 2.0, 0):
        t.record(site, r)
    st_ = t.get(site)
    assert (st_.best, st_.stagnant, st_.simulations) == (2.0, 1, 7)


def test_worth_simulation_cutoff():
    t = StagnationTable()
    site = Location("main", "b", 1)
    node = TreeNode(1, fork_site=site)
    cfg = MctsConfig(optimization_degree=3)
    for _ in range(3):
        assert is_worth_simulation(node, t, cfg)
        t.record(site, 0)
    assert not is_worth_simulation(node, t, cfg)
    assert is_worth_simulation(node, t, MctsConfig(optimization_degree=math.inf))
    assert is_worth_simulation(node, t, MctsConfig(optimization_degree=3, sim_optimization=False))
    assert not is_worth_simulation(node, t, MctsConfig(simulation=False))


# --- whole runs ---------------------------------------------------------------


def _check_accounting(ex, searcher):
    root = searcher.root
    assert root.V == searcher.backprops
    for node in searcher.nodes.values():
        assert node.V >= sum(ch.V for ch in node.children())
        if not node.in_tree:
            assert node.V == 0


def test_accounting_on_motivating():
    ex, s = _mcts_run(bundled_program("motivating"))
    _check_accounting(ex, s)
    assert s.backprops > 0


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(sorted(ABLATIONS) + ["mcts"]))
def test_accounting_on_generated_programs(seed, variant):
    p = parse_program(gen_program(random.Random(seed), CorpusSpec())[0])
    searcher = make_strategy(variant, seed)
    ex = Executor(p, searcher, EngineConfig(max_selections=150))
    ex.run()
    _check_accounting(ex, searcher)


def test_guided_expansion_follows_exp_score():
    # at f's first fork, BB2 holds an unsafe store and BB3's unique blocks hold none
    ex, s = _mcts_run(bundled_program("motivating"), selections=3)
    first = s.nodes[0]
    chosen = [ch for ch in first.children() if ch.in_tree]
    assert len(chosen) == 1 and chosen[0].successor == "BB2"


def test_no_simulation_means_no_playouts():
    ex, s = _mcts_run(bundled_program("motivating"), simulation=False)
    assert ex.stats.simulations == 0
    assert all(n.R == 0 for n in s.nodes.values())


def test_runs_are_deterministic():
    p = parse_program(gen_program(random.Random(2), CorpusSpec())[0])
    a, _ = _mcts_run(p, 150, seed=1)
    b, _ = _mcts_run(p, 150, seed=1)
    assert a.terminals == b.terminals and a.error_log == b.error_log
    assert a.stats == b.stats


def test_simulation_optimization_caps_stagnant_site():
    r5 = sim_optimization(5)
    assert r5.simulations == 5 and r5.after_onset == 5
    rinf = sim_optimization(math.inf)
    assert rinf.simulations > 50


def test_loop_fork_site_is_the_loop_branch():
    p = bundled_program("loop")
    assert p.instruction(LOOP_FORK).op == "br"
