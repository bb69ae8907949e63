"""Unsafe-pointer-guided Monte Carlo tree search over the execution tree.

Tree nodes mirror execution states one to one (node id == state id). A
selection walks down from the last returned node: nodes with a child not yet
in the search tree are expanded (by ExpScore), otherwise the walk descends by
UCT. The expanded node is simulated with a forking-disabled playout and the
reward is backpropagated to the root.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from .ir import Location
from .strategies import Searcher

if TYPE_CHECKING:
    from .engine import ExecutionState, Executor

SQRT2 = math.sqrt(2.0)


@dataclass
class MctsConfig:
    c: float = SQRT2
    optimization_degree: float = 700  # math.inf disables stagnation cut-off
    sim_step_cap: int = 20000
    seed: int = 0
    guided_expansion: bool = True
    simulation: bool = True
    sim_optimization: bool = True
    reward_scope: str = "playout"  # playout | new


@dataclass(eq=False)
class TreeNode:
    id: int
    parent: "TreeNode | None" = None
    side: bool | None = None
    fork_site: Location | None = None
    successor: str | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    in_tree: bool = False
    V: int = 0
    R: float = 0.0
    terminal: bool = False
    exhausted: bool = False
    state: "ExecutionState | None" = field(default=None, repr=False)
    exp_score: int | None = None

    def children(self) -> list["TreeNode"]:
        return [c for c in (self.left, self.right) if c is not None]


@dataclass
class SiteStats:
    best: float = 0.0
    stagnant: int = 0
    simulations: int = 0


class StagnationTable:
    """Per fork site: best reward so far and simulations since it last improved.

    The best reward starts at 0, so a playout only counts as progress when it
    earns something.
    """

    def __init__(self):
        self.sites: dict[Location, SiteStats] = {}

    def get(self, site: Location) -> SiteStats:
        st = self.sites.get(site)
        if st is None:
            st = self.sites[site] = SiteStats()
        return st

    def record(self, site: Location | None, reward: float) -> None:
        if site is None:
            return
        st = self.get(site)
        st.simulations += 1
        if reward > st.best:
            st.best = reward
            st.stagnant = 0
        else:
            st.stagnant += 1


def uct(parent: TreeNode, child: TreeNode, c: float) -> float:
    if child.V == 0:
        return math.inf
    return child.R / child.V + c * math.sqrt(2.0 * math.log(parent.V) / child.V)


def reward_fn(n_unsafe: int, n_error: int) -> float:
    return 0.5 * n_unsafe + 0.5 * n_error


def backpropagate(reward: float, node: TreeNode | None) -> int:
    updated = 0
    while node is not None:
        node.R += reward
        node.V += 1
        updated += 1
        node = node.parent
    return updated


def do_selection(node: TreeNode, c: float) -> TreeNode:
    cands = [ch for ch in (node.left, node.right) if ch is not None and ch.in_tree and not ch.exhausted]
    if not cands:
        raise ValueError(f"node {node.id} has no in-tree child to select")
    best = cands[0]
    for ch in cands[1:]:
        if uct(node, ch, c) > uct(node, best, c):
            best = ch
    return best


def is_worth_simulation(node: TreeNode, table: StagnationTable, config: MctsConfig) -> bool:
    if not config.simulation:
        return False
    if node.fork_site is None or not config.sim_optimization:
        return True
    return table.get(node.fork_site).stagnant < config.optimization_degree


class MctsSearcher(Searcher):
    name = "mcts"

    def __init__(self, config: MctsConfig | None = None):
        self.config = config or MctsConfig()
        self.nodes: dict[int, TreeNode] = {}
        self.root: TreeNode | None = None
        self.cur: TreeNode | None = None
        self.table = StagnationTable()
        self.expand_rng = random.Random(f"expand-{self.config.seed}")
        self.sim_rng = random.Random(f"simulate-{self.config.seed}")
        self.backprops = 0

    # -- engine events

    def update(self, current, added, removed):
        if current is None:
            for s in added:
                node = TreeNode(s.id, in_tree=True, state=s)
                s.node = node
                self.nodes[s.id] = node
                self.root = node
            return
        if added:
            self.on_fork(current, added)
        elif current in removed:
            self.on_terminate(current)

    def on_fork(self, parent_state: "ExecutionState", children: list["ExecutionState"]) -> None:
        parent = self.nodes.get(parent_state.id)
        if parent is None or parent.state is not parent_state or parent.children():
            raise RuntimeError(f"search tree out of sync at state {parent_state.id}")
        parent.state = None
        for s in children:
            node = TreeNode(s.id, parent=parent, side=s.side, fork_site=s.fork_site, successor=s.successor, state=s)
            s.node = node
            self.nodes[s.id] = node
            if s.side:
                parent.left = node
            else:
                parent.right = node

    def on_terminate(self, state: "ExecutionState") -> None:
        node = self.nodes.get(state.id)
        if node is None or node.children():
            raise RuntimeError(f"search tree out of sync at state {state.id}")
        node.terminal = True
        node.state = None
        self._mark_exhausted(node)

    def _mark_exhausted(self, node: TreeNode | None) -> None:
        while node is not None and not node.exhausted:
            if not node.terminal:
                kids = node.children()
                if node.state is not None or not kids or not all(k.exhausted for k in kids):
                    return
            node.exhausted = True
            node = node.parent

    # -- MCTS steps

    def expansion_score(self, node: TreeNode) -> int:
        if node.exp_score is None:
            site = node.fork_site
            node.exp_score = self.executor.analysis.successor_score(site.func, site.block, node.successor)
        return node.exp_score

    def do_expansion(self, node: TreeNode) -> TreeNode:
        cands = [ch for ch in (node.left, node.right) if ch is not None and not ch.in_tree]
        if not cands:
            raise ValueError(f"node {node.id} has no child to expand")
        if len(cands) == 1:
            chosen = cands[0]
        elif not self.config.guided_expansion:
            chosen = cands[self.expand_rng.randrange(2)]
        else:
            chosen = cands[0]
            if self.expansion_score(cands[1]) > self.expansion_score(cands[0]):
                chosen = cands[1]
        chosen.in_tree = True
        return chosen

    def do_simulation(self, node: TreeNode) -> float:
        ex = self.executor
        before = frozenset(ex.unsafe_covered) if self.config.reward_scope == "new" else None
        trace = ex.simulate_playout(node.state, self.sim_rng, self.config.sim_step_cap)
        covered = trace.unsafe_covered if before is None else trace.unsafe_covered - before
        reward = reward_fn(len(covered), trace.errors_found)
        self.table.record(node.fork_site, reward)
        return reward

    def _backprop(self, reward: float, node: TreeNode) -> None:
        backpropagate(reward, node)
        self.backprops += 1

    def select_next_state(self) -> "ExecutionState | None":
        root = self.root
        if root is None or root.exhausted:
            return None
        node = self.cur if self.cur is not None and not self.cur.exhausted else root
        while True:
            if node.state is not None:
                # live leaf already in the tree: run it (the root at start)
                self.cur = node
                return node.state
            if any(ch is not None and not ch.in_tree for ch in (node.left, node.right)):
                child = self.do_expansion(node)
                if is_worth_simulation(child, self.table, self.config):
                    reward = self.do_simulation(child)
                elif self.config.simulation:
                    reward = self.table.get(child.fork_site).best
                else:
                    reward = 0.0
                self._backprop(reward, child)
                self.cur = child
                return child.state
            node = do_selection(node, self.config.c)

    def select(self, worklist):
        s = self.select_next_state()
        if s is not None and worklist.get(s.id) is not s:
            raise RuntimeError(f"selected state {s.id} is not live")
        return s

    # -- reporting

    def site_simulations(self, site: Location) -> int:
        st = self.table.sites.get(site)
        return st.simulations if st else 0


def tree_rows(executor: "Executor") -> list[tuple]:
    """(id, parent, side, V, R, in_tree, terminal) for every state ever created."""
    searcher = executor.searcher
    terminal = {sid for sid, _ in executor.terminals}
    rows = []
    for sid in sorted(executor.lineage):
        parent, side = executor.lineage[sid]
        if isinstance(searcher, MctsSearcher):
            n = searcher.nodes[sid]
            rows.append((sid, parent, side, n.V, n.R, n.in_tree, n.terminal))
        else:
            rows.append((sid, parent, side, 0, 0.0, False, sid in terminal))
    return rows


def write_tree_dump(executor: "Executor", path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("id,parent,side,V,R,in_tree,terminal\n")
        for sid, parent, side, v, r, in_tree, term in tree_rows(executor):
            p = "" if parent is None else str(parent)
            sd = "" if side is None else ("T" if side else "F")
            fh.write(f"{sid},{p},{sd},{v},{r!r},{int(in_tree)},{int(term)}\n")
