"""Static analyses feeding the MCTS searcher.

Post-dominators are computed by plain iterative dataflow over the reverse
CFG. Pointer classification is a flow- and context-insensitive value-flow
fixpoint in the spirit of CCured: every pointer-creating definition
(``alloc``, ``gep``, ``cast``) starts SAFE, definitions reaching a ``gep``
become SEQ, definitions reaching a ``cast`` become DYN.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

from .ir import CFG, EXIT, Location, Program, build_cfg


class AnalysisError(Exception):
    pass


class PointerKind(enum.IntEnum):
    SAFE = 0
    SEQ = 1
    DYN = 2


# ---------------------------------------------------------------------------
# post-dominators


@dataclass(frozen=True)
class PostDomTree:
    ipostdom: dict[str, str]
    postdoms: dict[str, frozenset[str]]

    def post_dominates(self, a: str, b: str) -> bool:
        return a in self.postdoms[b]


def compute_post_dominators(cfg: CFG) -> PostDomTree:
    nodes = list(cfg.nodes)
    live = _reachable_rev(cfg)
    for n in nodes:
        if n not in live:
            raise AnalysisError(f"{cfg.function}: block {n!r} does not reach the function exit")
    everything = frozenset(nodes)
    pdom: dict[str, frozenset[str]] = {n: everything for n in nodes}
    pdom[EXIT] = frozenset({EXIT})
    changed = True
    while changed:
        changed = False
        for n in reversed(nodes):
            if n == EXIT:
                continue
            succs = cfg.succ[n]
            if not succs:
                raise AnalysisError(f"{cfg.function}: block {n!r} has no successors")
            inter = frozenset.intersection(*(pdom[s] for s in succs))
            new = inter | {n}
            if new != pdom[n]:
                pdom[n] = new
                changed = True
    ipd: dict[str, str] = {EXIT: EXIT}
    for n in nodes:
        if n == EXIT:
            continue
        strict = pdom[n] - {n}
        # the immediate post-dominator is the strict one post-dominated by all others
        ipd[n] = max(strict, key=lambda d: len(pdom[d]))
    return PostDomTree(ipd, pdom)


def _reachable_rev(cfg: CFG) -> set[str]:
    seen = {EXIT}
    stack = [EXIT]
    while stack:
        for p in cfg.pred[stack.pop()]:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def _reachable(cfg: CFG, src: str, avoid: str | None) -> set[str]:
    if src == avoid:
        return set()
    seen = {src}
    stack = [src]
    while stack:
        n = stack.pop()
        for s in cfg.succ[n]:
            if s != avoid and s not in seen:
                seen.add(s)
                stack.append(s)
    return seen


def unique_blocks(cfg: CFG, pd: PostDomTree, fork_block: str, successor: str) -> frozenset[str]:
    """Blocks only the state entering ``successor`` can execute before the join.

    Collects everything reachable from ``successor`` without crossing the fork's
    immediate post-dominator, minus what the sibling successor can also reach.
    """
    join = pd.ipostdom[fork_block]
    mine = _reachable(cfg, successor, join)
    for other in cfg.succ[fork_block]:
        if other != successor:
            mine -= _reachable(cfg, other, join)
    mine.discard(EXIT)
    return frozenset(mine)


# ---------------------------------------------------------------------------
# pointer classification


@dataclass(frozen=True)
class PointerClassification:
    kind: dict[Location, PointerKind]
    # variable (func, name) -> pointer definitions that may flow into it
    origins: dict[tuple[str, str], frozenset[Location]] = field(compare=False, repr=False)

    def unsafe_defs(self) -> set[Location]:
        return {loc for loc, k in self.kind.items() if k != PointerKind.SAFE}


def _value_flow(program: Program) -> tuple[dict[tuple[str, str], set[Location]], list[Location]]:
    """Fixpoint of origin sets for every variable; objects are named by alloc site."""
    origins: dict[tuple[str, str], set[Location]] = defaultdict(set)
    contents: dict[Location, set[Location]] = defaultdict(set)  # alloc site -> stored defs
    points_to: dict[Location, set[Location]] = defaultdict(set)  # def -> alloc sites
    defs: list[Location] = []
    instrs = list(program.locations())
    for loc, ins in instrs:
        if ins.op in ("alloc", "gep", "cast"):
            defs.append(loc)
            origins[(loc.func, ins.dst)].add(loc)
            if ins.op == "alloc":
                points_to[loc].add(loc)
    rets: dict[str, list[str]] = defaultdict(list)
    for loc, ins in instrs:
        if ins.op == "ret" and ins.args and isinstance(ins.args[0], str):
            rets[loc.func].append(ins.args[0])

    changed = True
    while changed:
        changed = False

        def flow(dst: set, src) -> None:
            nonlocal changed
            before = len(dst)
            dst |= src
            if len(dst) != before:
                changed = True

        for loc, ins in instrs:
            fn = loc.func
            op = ins.op
            if op in ("gep", "cast"):
                base = ins.args[1]
                for d in list(origins[(fn, base)]):
                    flow(points_to[loc], points_to[d])
            elif op == "store":
                ptr, val = ins.args
                if isinstance(val, str):
                    vals = origins[(fn, val)]
                    if vals:
                        for d in list(origins[(fn, ptr)]):
                            for obj in list(points_to[d]):
                                flow(contents[obj], vals)
            elif op == "load":
                dst, ptr = ins.args
                for d in list(origins[(fn, ptr)]):
                    for obj in list(points_to[d]):
                        flow(origins[(fn, dst)], contents[obj])
            elif op == "call":
                dst, callee = ins.args[0], ins.args[1]
                params = program.functions[callee].params
                for p, arg in zip(params, ins.args[2:]):
                    if isinstance(arg, str):
                        flow(origins[(callee, p)], origins[(fn, arg)])
                for r in rets[callee]:
                    flow(origins[(fn, dst)], origins[(callee, r)])
    return origins, defs


def classify_pointers(program: Program) -> PointerClassification:
    origins, defs = _value_flow(program)
    kind = {d: PointerKind.SAFE for d in defs}
    for loc, ins in program.locations():
        if ins.op == "gep":
            kind[loc] = max(kind[loc], PointerKind.SEQ)
            for d in origins.get((loc.func, ins.args[1]), ()):
                kind[d] = max(kind[d], PointerKind.SEQ)
        elif ins.op == "cast":
            kind[loc] = PointerKind.DYN
            for d in origins.get((loc.func, ins.args[1]), ()):
                kind[d] = PointerKind.DYN
    frozen = {k: frozenset(v) for k, v in origins.items() if v}
    return PointerClassification(dict(sorted(kind.items())), frozen)


def unsafe_sites(program: Program, c: PointerClassification) -> frozenset[Location]:
    bad = c.unsafe_defs()
    sites = set()
    for loc, ins in program.locations():
        if ins.op in ("load", "store"):
            ptr = ins.args[1] if ins.op == "load" else ins.args[0]
            if c.origins.get((loc.func, ptr), frozenset()) & bad:
                sites.add(loc)
    return frozenset(sites)


def exp_score(blocks: frozenset[str] | set[str], unsafe: frozenset[Location], func: str | None = None) -> int:
    """Number of distinct unsafe dereference sites located in ``blocks``."""
    return sum(1 for s in unsafe if s.block in blocks and (func is None or s.func == func))


# ---------------------------------------------------------------------------
# bundle used by the engine and searchers


class ProgramAnalysis:
    """Lazily computed, cached analyses of one program."""

    def __init__(self, program: Program):
        self.program = program
        self.cfgs = {name: build_cfg(f) for name, f in program.functions.items()}
        self._pdoms: dict[str, PostDomTree] = {}
        self._scores: dict[tuple[str, str, str], int] = {}

    @cached_property
    def classification(self) -> PointerClassification:
        return classify_pointers(self.program)

    @cached_property
    def unsafe(self) -> frozenset[Location]:
        return unsafe_sites(self.program, self.classification)

    def post_dominators(self, func: str) -> PostDomTree:
        if func not in self._pdoms:
            self._pdoms[func] = compute_post_dominators(self.cfgs[func])
        return self._pdoms[func]

    def successor_score(self, func: str, fork_block: str, successor: str) -> int:
        key = (func, fork_block, successor)
        if key not in self._scores:
            cfg = self.cfgs[func]
            blocks = unique_blocks(cfg, self.post_dominators(func), fork_block, successor)
            self._scores[key] = exp_score(blocks, self.unsafe, func)
        return self._scores[key]


def format_classification(program: Program) -> str:
    c = classify_pointers(program)
    lines = [f"{loc} {k.name}" for loc, k in c.kind.items()]
    lines += [f"UNSAFE {loc}" for loc in sorted(unsafe_sites(program, c))]
    return "\n".join(lines) + ("\n" if lines else "")
