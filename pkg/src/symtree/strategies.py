"""Baseline state-selection strategies.

Simplified, deterministic analogues of the usual engine searchers. Every
strategy breaks ties on the smallest state id, so the choice depends only on
state attributes and the seed, never on worklist order.
"""

from __future__ import annotations

import bisect
import heapq
import random
from collections import deque
from typing import TYPE_CHECKING, Callable

if TYPE_CHECKING:
    from .engine import ExecutionState, Executor

INF = float("inf")


class Searcher:
    """Common interface: ``select`` picks from the worklist, ``update`` observes changes."""

    name = "base"

    def attach(self, executor: "Executor") -> None:
        self.executor = executor

    def select(self, worklist: dict[int, "ExecutionState"]) -> "ExecutionState | None":
        raise NotImplementedError

    def update(self, current, added: list, removed: list) -> None:
        pass


class _HeapSearcher(Searcher):
    """Argmin over a static per-state key, with lazy deletion."""

    def __init__(self):
        self.heap: list = []
        self.live: set[int] = set()

    def key(self, s: "ExecutionState"):
        raise NotImplementedError

    def update(self, current, added, removed):
        for s in removed:
            self.live.discard(s.id)
        for s in added:
            self.live.add(s.id)
            heapq.heappush(self.heap, (self.key(s), s.id))

    def select(self, worklist):
        if not worklist:
            raise ValueError("select on an empty worklist")
        while self.heap:
            _, sid = self.heap[0]
            if sid in self.live and sid in worklist:
                return worklist[sid]
            heapq.heappop(self.heap)
        raise RuntimeError("searcher lost track of the worklist")


class BfsSearcher(_HeapSearcher):
    name = "bfs"

    def key(self, s):
        return (s.depth, s.id)


class DfsSearcher(_HeapSearcher):
    name = "dfs"

    def key(self, s):
        return (-s.depth, -s.id)


class IcntSearcher(_HeapSearcher):
    """Fewest instructions since the state last covered something new."""

    name = "icnt"

    def key(self, s):
        return (s.since_new, s.id)


class RandomSearcher(Searcher):
    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)
        self.ids: list[int] = []

    def update(self, current, added, removed):
        for s in removed:
            i = bisect.bisect_left(self.ids, s.id)
            if i < len(self.ids) and self.ids[i] == s.id:
                self.ids.pop(i)
        for s in added:
            bisect.insort(self.ids, s.id)

    def select(self, worklist):
        if not worklist:
            raise ValueError("select on an empty worklist")
        return worklist[self.ids[self.rng.randrange(len(self.ids))]]


class CoverageIndex:
    """Covered instructions plus distance-to-uncovered over the call supergraph.

    Edges: fall-through, branch targets, call to callee entry, and ``ret`` to
    every instruction following a call of that function. Distances are
    recomputed lazily when the executor's coverage version moves.
    """

    def __init__(self, executor: "Executor"):
        self.ex = executor
        code = executor.code
        n = len(code.locations)
        gid = {loc: i for i, loc in enumerate(code.locations)}
        self.gid = gid
        succ: list[list[int]] = [[] for _ in range(n)]
        entry = {f: gid[(f, code.entry_block[f], 0)] for f in code.blocks}
        ret_sites: dict[str, list[int]] = {f: [] for f in code.blocks}
        for blocks in code.blocks.values():
            for ins_list in blocks.values():
                for ins in ins_list:
                    if ins.op == "call":
                        ret_sites[ins.a[1]].append(ins.gid + 1)
        for fname, blocks in code.blocks.items():
            for ins_list in blocks.values():
                for ins in ins_list:
                    g = ins.gid
                    if ins.op == "br":
                        succ[g] += [gid[(fname, ins.a[1], 0)], gid[(fname, ins.a[2], 0)]]
                    elif ins.op == "jmp":
                        succ[g].append(gid[(fname, ins.a[0], 0)])
                    elif ins.op == "call":
                        succ[g].append(entry[ins.a[1]])
                    elif ins.op == "ret":
                        succ[g] += ret_sites[fname]
                    elif ins.op not in ("abort", "exit"):
                        succ[g].append(g + 1)
        self.pred: list[list[int]] = [[] for _ in range(n)]
        for g, ss in enumerate(succ):
            for t in ss:
                self.pred[t].append(g)
        self.version = -1
        self.dist: list[float] = [INF] * n

    @property
    def covered(self) -> bytearray:
        return self.ex.covered

    def refresh(self) -> bool:
        if self.version == self.ex.coverage_version:
            return False
        self.version = self.ex.coverage_version
        covered = self.ex.covered
        dist = [INF] * len(covered)
        q = deque()
        for g, c in enumerate(covered):
            if not c:
                dist[g] = 0
                q.append(g)
        while q:
            g = q.popleft()
            d = dist[g] + 1
            for p in self.pred[g]:
                if dist[p] > d:
                    dist[p] = d
                    q.append(p)
        self.dist = dist
        return True

    def state_gid(self, s: "ExecutionState") -> int:
        f = s.frames[-1]
        return self.gid[(f.func, f.block, f.index)]

    def distance(self, s: "ExecutionState") -> float:
        return self.dist[self.state_gid(s)]


class _CoverageSearcher(Searcher):
    """Argmin over a coverage-dependent key; keys are rebuilt when coverage changes."""

    def __init__(self):
        self.heap: list = []
        self.live: dict[int, "ExecutionState"] = {}
        self.index: CoverageIndex | None = None

    def attach(self, executor):
        super().attach(executor)
        self.index = CoverageIndex(executor)

    def key(self, s):
        raise NotImplementedError

    def update(self, current, added, removed):
        for s in removed:
            self.live.pop(s.id, None)
        for s in added:
            self.live[s.id] = s
            if self.index.version == self.executor.coverage_version:
                heapq.heappush(self.heap, (self.key(s), s.id))

    def select(self, worklist):
        if not worklist:
            raise ValueError("select on an empty worklist")
        if self.index.refresh():
            self.heap = [(self.key(s), sid) for sid, s in self.live.items()]
            heapq.heapify(self.heap)
        while self.heap:
            _, sid = self.heap[0]
            if sid in self.live:
                return worklist[sid]
            heapq.heappop(self.heap)
        raise RuntimeError("searcher lost track of the worklist")


class CovNewSearcher(_CoverageSearcher):
    """Prefer a state about to execute an uncovered instruction, then the closest one."""

    name = "covnew"

    def key(self, s):
        g = self.index.state_gid(s)
        return (self.index.covered[g], self.index.dist[g], s.id)


class Md2uSearcher(_CoverageSearcher):
    """Minimal distance to an uncovered instruction."""

    name = "md2u"

    def key(self, s):
        return (self.index.distance(s), s.id)


BASELINES = ("bfs", "dfs", "random", "covnew", "md2u", "icnt")
ALL_STRATEGIES = BASELINES + ("mcts",)


def make_searcher(name: str, seed: int = 0, mcts_config=None) -> Searcher:
    factories: dict[str, Callable[[], Searcher]] = {
        "bfs": BfsSearcher,
        "dfs": DfsSearcher,
        "random": lambda: RandomSearcher(seed),
        "covnew": CovNewSearcher,
        "md2u": Md2uSearcher,
        "icnt": IcntSearcher,
    }
    if name == "mcts":
        from .mcts import MctsConfig, MctsSearcher

        return MctsSearcher(mcts_config or MctsConfig(seed=seed))
    if name not in factories:
        raise ValueError(f"unknown search strategy {name!r}")
    return factories[name]()
