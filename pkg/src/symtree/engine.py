"""Symbolic execution core: states, forking, bounds checking, playouts.

The :class:`Executor` runs the classic selection loop: ask the searcher for
a state, run it until the next symbolic branch or termination, hand the
children back. Playouts (forking disabled, one random feasible side per
branch) are provided for the MCTS searcher.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Union

from .analysis import ProgramAnalysis
from .ir import Location, Program
from .solver import (
    DEFAULT_BUDGET,
    Cmp,
    Expr,
    Status,
    Sym,
    Term,
    check_sat,
    check_with,
    evaluate,
    mk_binop,
    mk_cmp,
    mk_ite,
    negate,
    truth,
)

if TYPE_CHECKING:
    from .strategies import Searcher

OUT_OF_BOUNDS = "OutOfBounds"
ABORT_REACHED = "AbortReached"


class EngineError(Exception):
    """Internal inconsistency or an unsupported operation on a path."""


@dataclass(frozen=True, slots=True)
class Pointer:
    obj: int
    offset: Expr


Value = Union[int, Term, Pointer]


@dataclass
class MemoryObject:
    obj_id: int
    size: int
    cells: list


@dataclass
class Frame:
    func: str
    block: str
    index: int
    locals: dict[str, Value]
    ret_dst: str | None = None

    def copy(self) -> "Frame":
        return Frame(self.func, self.block, self.index, dict(self.locals), self.ret_dst)


class ExecutionState:
    __slots__ = (
        "id",
        "frames",
        "memory",
        "next_obj",
        "pc",
        "inputs",
        "model",
        "covered_unsafe",
        "depth",
        "steps",
        "since_new",
        "parent",
        "side",
        "fork_site",
        "successor",
        "node",
        "prefix",
    )

    def __init__(self, sid: int):
        self.id = sid
        self.frames: list[Frame] = []
        self.memory: dict[int, MemoryObject] = {}
        self.next_obj = 0
        self.pc: list[Expr] = []
        self.inputs: list[Sym] = []
        self.model: dict[Sym, int] = {}  # some model of pc, not necessarily canonical
        self.covered_unsafe: set[Location] = set()
        self.depth = 0
        self.steps = 0
        self.since_new = 0
        self.parent: int | None = None
        self.side: bool | None = None
        self.fork_site: Location | None = None
        self.successor: str | None = None
        self.node = None
        self.prefix = None  # solver state for a prefix of pc, see check_with

    @property
    def location(self) -> Location:
        f = self.frames[-1]
        return Location(f.func, f.block, f.index)

    def clone(self, sid: int) -> "ExecutionState":
        s = ExecutionState(sid)
        s.frames = [f.copy() for f in self.frames]
        s.memory = {k: MemoryObject(m.obj_id, m.size, list(m.cells)) for k, m in self.memory.items()}
        s.next_obj = self.next_obj
        s.pc = list(self.pc)
        s.inputs = list(self.inputs)
        s.model = dict(self.model)
        s.covered_unsafe = set(self.covered_unsafe)
        s.depth = self.depth
        s.steps = self.steps
        s.since_new = self.since_new
        s.prefix = self.prefix
        return s

    def __repr__(self) -> str:
        return f"<state {self.id} at {self.location} depth={self.depth}>"


@dataclass(frozen=True)
class ErrorRecord:
    site: Location
    kind: str
    witness: tuple[tuple[str, int], ...]

    @property
    def key(self) -> tuple[Location, str]:
        return (self.site, self.kind)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    inputs: tuple[tuple[str, int], ...]
    status: str  # exit | error:<kind>@<site> | unverified

    def serialize(self) -> str:
        lines = [f"input {name} = {value}" for name, value in self.inputs]
        lines.append(f"status = {self.status}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "TestCase":
        inputs = []
        status = ""
        for line in text.splitlines():
            if line.startswith("input "):
                name, _, value = line[len("input ") :].partition(" = ")
                inputs.append((name, int(value)))
            elif line.startswith("status = "):
                status = line[len("status = ") :]
        return cls(tuple(inputs), status)


# --- step outcomes -----------------------------------------------------------


@dataclass
class Continue:
    state: ExecutionState


@dataclass
class Forked:
    parent: ExecutionState
    true_state: ExecutionState | None
    false_state: ExecutionState | None
    site: Location


@dataclass
class Terminated:
    state: ExecutionState
    reason: str  # exit | error | cap | unverified
    error: ErrorRecord | None = None


StepOutcome = Union[Continue, Forked, Terminated]


@dataclass
class SimulationTrace:
    visited_blocks: list[tuple[str, str]] = field(default_factory=list)
    unsafe_covered: set[Location] = field(default_factory=set)
    errors_found: int = 0
    steps: int = 0
    errors: list[ErrorRecord] = field(default_factory=list)


@dataclass
class RunStats:
    selections: int = 0
    instructions: int = 0
    unsafe_covered: int = 0
    unique_errors: int = 0
    test_cases: int = 0
    solver_unknowns: int = 0
    wall_ms: int = 0
    forks: int = 0
    simulations: int = 0
    sim_instructions: int = 0

    FIELDS = (
        "selections",
        "instructions",
        "unsafe_covered",
        "unique_errors",
        "test_cases",
        "solver_unknowns",
        "wall_ms",
        "forks",
        "simulations",
        "sim_instructions",
    )


@dataclass
class EngineConfig:
    max_selections: int | None = None
    max_steps: int | None = None
    budget_ms: int | None = None
    solver_budget: int = DEFAULT_BUDGET
    max_path_steps: int = 20000
    sim_step_cap: int = 20000
    coverage_scope: str = "all"  # all | tree
    record_wall_time: bool = False
    seed: int = 0


# --- compiled program --------------------------------------------------------


class _Ins:
    __slots__ = ("op", "a", "gid", "loc", "unsafe", "block")

    def __init__(self, op, a, gid, loc, unsafe, block):
        self.op, self.a, self.gid, self.loc, self.unsafe, self.block = op, a, gid, loc, unsafe, block


class CompiledProgram:
    """Instruction arrays with dense ids, shared by every state of a run."""

    def __init__(self, program: Program, analysis: ProgramAnalysis):
        self.program = program
        self.blocks: dict[str, dict[str, list[_Ins]]] = {}
        self.locations: list[Location] = []
        unsafe = analysis.unsafe
        for fname, f in program.functions.items():
            fb: dict[str, list[_Ins]] = {}
            for b in f.blocks:
                code = []
                for i, ins in enumerate(b.instructions):
                    loc = Location(fname, b.label, i)
                    code.append(_Ins(ins.op, ins.args, len(self.locations), loc, loc in unsafe, b.label))
                    self.locations.append(loc)
                fb[b.label] = code
            self.blocks[fname] = fb
        self.entry_block = {name: f.entry_block for name, f in program.functions.items()}
        self.params = {name: f.params for name, f in program.functions.items()}


# --- executor ----------------------------------------------------------------


class Executor:
    def __init__(
        self,
        program: Program,
        searcher: "Searcher",
        config: EngineConfig | None = None,
        analysis: ProgramAnalysis | None = None,
    ):
        self.program = program
        self.config = config or EngineConfig()
        self.analysis = analysis or ProgramAnalysis(program)
        self.code = CompiledProgram(program, self.analysis)
        self.unsafe = self.analysis.unsafe
        self.searcher = searcher
        self.stats = RunStats()
        self.next_id = 0
        self.covered = bytearray(len(self.code.locations))
        self.coverage_version = 0
        self.unsafe_covered: set[Location] = set()
        self.errors: dict[tuple[Location, str], ErrorRecord] = {}
        self.error_log: list[tuple[ErrorRecord, int, int]] = []  # record, selection, wall_ms
        self.test_cases: list[TestCase] = []
        self.terminals: list[tuple[int, str]] = []  # (state id, status) in termination order
        self.lineage: dict[int, tuple[int | None, bool | None]] = {}
        self.worklist: dict[int, ExecutionState] = {}
        self.current_selection = 0
        self._t0 = 0.0

    # -- ids / time

    def _fresh_id(self) -> int:
        sid = self.next_id
        self.next_id += 1
        return sid

    def elapsed_ms(self) -> int:
        return int((time.perf_counter() - self._t0) * 1000)

    def _wall(self) -> int:
        return self.elapsed_ms() if self.config.record_wall_time else 0

    # -- initial state

    def init_state(self) -> ExecutionState:
        s = ExecutionState(self._fresh_id())
        entry = self.program.entry
        frame = Frame(entry, self.code.entry_block[entry], 0, {})
        for p in self.code.params[entry]:
            frame.locals[p] = self._new_input(s, p)
        s.frames.append(frame)
        self.lineage[s.id] = (None, None)
        return s

    def _new_input(self, s: ExecutionState, name: str) -> Sym:
        sym = Sym(f"{name}_{len(s.inputs)}", len(s.inputs))
        s.inputs.append(sym)
        return sym

    # -- main loop

    def _budget_left(self) -> bool:
        c = self.config
        if c.max_selections is not None and self.stats.selections >= c.max_selections:
            return False
        if c.max_steps is not None and self.stats.instructions >= c.max_steps:
            return False
        if c.budget_ms is not None and self.elapsed_ms() >= c.budget_ms:
            return False
        return True

    def run(self) -> RunStats:
        self._t0 = time.perf_counter()
        root = self.init_state()
        self.worklist = {root.id: root}
        self.searcher.attach(self)
        self.searcher.update(None, [root], [])
        while self.worklist and self._budget_left():
            self.current_selection = self.stats.selections + 1
            state = self.searcher.select(self.worklist)
            if state is None:
                break
            self.stats.selections += 1
            limit = self.config.max_path_steps - state.steps
            if self.config.max_steps is not None:
                limit = min(limit, self.config.max_steps - self.stats.instructions)
            outcome = self.run_until_event(state, max(limit, 0))
            self._dispatch(outcome)
        self.stats.wall_ms = self._wall()
        self.stats.unsafe_covered = len(self.unsafe_covered)
        self.stats.unique_errors = len(self.errors)
        return self.stats

    def _dispatch(self, outcome: StepOutcome) -> None:
        if isinstance(outcome, Forked):
            parent = outcome.parent
            del self.worklist[parent.id]
            children = [c for c in (outcome.true_state, outcome.false_state) if c is not None]
            for c in children:
                self.worklist[c.id] = c
                self.lineage[c.id] = (parent.id, c.side)
            self.stats.forks += 1
            self.searcher.update(parent, children, [parent])
            if not children:
                self.terminals.append((parent.id, "infeasible"))
        elif isinstance(outcome, Terminated):
            s = outcome.state
            del self.worklist[s.id]
            self._finish(outcome)
            self.searcher.update(s, [], [s])
        else:
            s = outcome.state
            if s.steps >= self.config.max_path_steps:
                del self.worklist[s.id]
                self._finish(Terminated(s, "cap"))
                self.searcher.update(s, [], [s])

    def _finish(self, t: Terminated) -> None:
        s = t.state
        if t.reason == "exit":
            tc = self.generate_test_case(s)
        elif t.reason == "error":
            assert t.error is not None
            tc = TestCase(t.error.witness, f"error:{t.error.kind}@{t.error.site}")
        elif t.reason == "unverified":
            tc = TestCase(tuple((v.name, 0) for v in s.inputs), "unverified")
        else:
            tc = None
        if tc is not None:
            self.test_cases.append(tc)
            self.stats.test_cases += 1
        self.terminals.append((s.id, tc.status if tc else t.reason))

    def generate_test_case(self, s: ExecutionState) -> TestCase:
        res = check_sat(s.pc, self.config.solver_budget, s.inputs)
        if not res.sat:
            if res.status is Status.UNKNOWN:
                self.stats.solver_unknowns += 1
            return TestCase(tuple((v.name, 0) for v in s.inputs), "unverified")
        return TestCase(tuple((v.name, res.model[v]) for v in s.inputs), "exit")

    def record_error(self, err: ErrorRecord) -> bool:
        if err.key in self.errors:
            return False
        self.errors[err.key] = err
        self.error_log.append((err, self.current_selection, self._wall()))
        return True

    # -- solver helpers

    def _feasible(self, s: ExecutionState, cond: Expr) -> tuple[Status, dict, tuple | None]:
        """Status of ``pc and cond``, a model update, and the new solver prefix if any."""
        if isinstance(cond, int):
            return (Status.SAT if cond else Status.UNSAT), {}, None
        if evaluate(cond, s.model):
            return Status.SAT, {}, None
        res = check_with(s.pc, cond, self.config.solver_budget, s.prefix, s.model)
        if res.status is Status.UNKNOWN:
            self.stats.solver_unknowns += 1
        return res.status, res.model, res.prefix

    def _witness(self, s: ExecutionState, extra: Iterable[Expr] = ()) -> tuple[tuple[str, int], ...] | None:
        res = check_sat(list(s.pc) + list(extra), self.config.solver_budget, s.inputs)
        if not res.sat:
            if res.status is Status.UNKNOWN:
                self.stats.solver_unknowns += 1
            return None
        return tuple((v.name, res.model[v]) for v in s.inputs)

    def _branch_child(self, s: ExecutionState, cond: Expr, model: dict, side: bool, target: str, site: Location) -> ExecutionState:
        c = s.clone(self._fresh_id())
        c.pc.append(cond)
        c.model.update(model)
        c.depth += 1
        c.side = side
        c.parent = s.id
        c.fork_site = site
        c.successor = target
        f = c.frames[-1]
        f.block, f.index = target, 0
        return c

    def fork(self, s: ExecutionState, cond: Expr, t_label: str, f_label: str, site: Location):
        """Children for both feasible sides of a symbolic branch (either may be None)."""
        pos, neg = truth(cond), negate(cond)
        children = []
        for side, c, label in ((True, pos, t_label), (False, neg, f_label)):
            status, model, prefix = self._feasible(s, c)
            child = None
            if status is Status.SAT:
                child = self._branch_child(s, c, model, side, label, site)
                if prefix is not None:
                    child.prefix = prefix
            children.append(child)
        return children[0], children[1]

    # -- memory access

    def _check_bounds(
        self, s: ExecutionState, ptr: Pointer, loc: Location, playout: bool
    ) -> tuple[str, ErrorRecord | None]:
        """'ok', 'error' (with record) or 'unknown'."""
        obj = s.memory.get(ptr.obj)
        if obj is None:
            raise EngineError(f"{loc}: dereference of a dead object")
        off, size = ptr.offset, obj.size
        if isinstance(off, int):
            if 0 <= off < size:
                return "ok", None
            w = self._witness(s)
            if w is None:
                return "unknown", None
            return "error", ErrorRecord(loc, OUT_OF_BOUNDS, w)
        unknown = False
        for viol in (Cmp("ge", off, size), Cmp("lt", off, 0)):
            status, _, _ = self._feasible(s, viol)
            if status is Status.SAT:
                w = self._witness(s, [viol])
                if w is None:
                    return "unknown", None
                return "error", ErrorRecord(loc, OUT_OF_BOUNDS, w)
            if status is Status.UNKNOWN:
                unknown = True
        return ("unknown" if unknown else "ok"), None

    def _concretize(self, s: ExecutionState, off: Expr) -> int:
        v = evaluate(off, s.model)
        s.pc.append(Cmp("eq", off, v))
        return v

    def _load(self, s: ExecutionState, ptr: Pointer) -> Value:
        cells = s.memory[ptr.obj].cells
        off = ptr.offset
        if isinstance(off, int):
            return cells[off]
        if any(isinstance(c, Pointer) for c in cells):
            return cells[self._concretize(s, off)]
        value: Expr = cells[-1]
        for k in range(len(cells) - 2, -1, -1):
            value = mk_ite(Cmp("eq", off, k), cells[k], value)
        return value

    def _store(self, s: ExecutionState, ptr: Pointer, value: Value) -> None:
        cells = s.memory[ptr.obj].cells
        off = ptr.offset
        if isinstance(off, int):
            cells[off] = value
            return
        if isinstance(value, Pointer) or any(isinstance(c, Pointer) for c in cells):
            cells[self._concretize(s, off)] = value
            return
        for k in range(len(cells)):
            cells[k] = mk_ite(Cmp("eq", off, k), value, cells[k])

    # -- interpretation

    def run_until_event(self, s: ExecutionState, limit: int) -> StepOutcome:
        return self._interpret(s, limit, None, None)

    def simulate_playout(self, s: ExecutionState, rng: random.Random, step_cap: int | None = None) -> SimulationTrace:
        """Run a clone of ``s`` down one random feasible path with forking disabled."""
        cap = self.config.sim_step_cap if step_cap is None else step_cap
        clone = s.clone(-1)
        trace = SimulationTrace()
        f = clone.frames[-1]
        trace.visited_blocks.append((f.func, f.block))
        self._interpret(clone, cap, rng, trace)
        self.stats.simulations += 1
        self.stats.sim_instructions += trace.steps
        return trace

    def _interpret(
        self, s: ExecutionState, limit: int, rng: random.Random | None, trace: SimulationTrace | None
    ) -> StepOutcome:
        playout = trace is not None
        blocks = self.code.blocks
        covered = self.covered
        scope_all = self.config.coverage_scope == "all"
        steps = 0
        frame = s.frames[-1]
        code = blocks[frame.func][frame.block]
        env = frame.locals

        def val(x):
            return x if isinstance(x, int) else env[x]

        try:
            while True:
                if steps >= limit:
                    return Continue(s)
                ins = code[frame.index]
                steps += 1
                if not playout:
                    if not covered[ins.gid]:
                        covered[ins.gid] = 1
                        self.coverage_version += 1
                        s.since_new = 0
                    else:
                        s.since_new += 1
                op = ins.op
                a = ins.a
                frame.index += 1
                if op == "binop":
                    env[a[0]] = mk_binop(a[1], val(a[2]), val(a[3]))
                elif op == "cmp":
                    x, y = val(a[2]), val(a[3])
                    if isinstance(x, Pointer) or isinstance(y, Pointer):
                        env[a[0]] = self._pointer_cmp(a[1], x, y, ins.loc)
                    else:
                        env[a[0]] = mk_cmp(a[1], x, y)
                elif op == "br":
                    cond = val(a[0])
                    if isinstance(cond, Pointer):
                        raise EngineError(f"{ins.loc}: branch on a pointer")
                    if isinstance(cond, int):
                        target = a[1] if cond else a[2]
                    elif playout:
                        target = self._playout_branch(s, cond, a[1], a[2], rng)
                    else:
                        t, f = self.fork(s, cond, a[1], a[2], ins.loc)
                        return Forked(s, t, f, ins.loc)
                    frame.block, frame.index = target, 0
                    code = blocks[frame.func][target]
                    if playout:
                        trace.visited_blocks.append((frame.func, target))
                elif op == "jmp":
                    frame.block, frame.index = a[0], 0
                    code = blocks[frame.func][a[0]]
                    if playout:
                        trace.visited_blocks.append((frame.func, a[0]))
                elif op == "const":
                    env[a[0]] = a[1]
                elif op == "load" or op == "store":
                    ptr = val(a[1] if op == "load" else a[0])
                    if not isinstance(ptr, Pointer):
                        raise EngineError(f"{ins.loc}: dereference of a non-pointer")
                    if ins.unsafe:
                        s.covered_unsafe.add(ins.loc)
                        if playout:
                            trace.unsafe_covered.add(ins.loc)
                            if scope_all:
                                self.unsafe_covered.add(ins.loc)
                        else:
                            self.unsafe_covered.add(ins.loc)
                    status, err = self._check_bounds(s, ptr, ins.loc, playout)
                    if status == "error":
                        assert err is not None
                        if playout:
                            trace.errors_found += 1
                            trace.errors.append(err)
                            self.record_error(err)
                        else:
                            self.record_error(err)
                        return Terminated(s, "error", err)
                    if status == "unknown":
                        return Terminated(s, "unverified")
                    if op == "load":
                        env[a[0]] = self._load(s, ptr)
                    else:
                        self._store(s, ptr, val(a[1]))
                elif op == "gep":
                    ptr = val(a[1])
                    if not isinstance(ptr, Pointer):
                        raise EngineError(f"{ins.loc}: gep on a non-pointer")
                    d = val(a[2])
                    if isinstance(d, Pointer):
                        raise EngineError(f"{ins.loc}: pointer used as an offset")
                    env[a[0]] = Pointer(ptr.obj, mk_binop("add", ptr.offset, d))
                elif op == "cast":
                    ptr = val(a[1])
                    if not isinstance(ptr, Pointer):
                        raise EngineError(f"{ins.loc}: cast of a non-pointer")
                    env[a[0]] = ptr
                elif op == "sym":
                    env[a[0]] = self._new_input(s, a[0])
                elif op == "alloc":
                    oid = s.next_obj
                    s.next_obj += 1
                    s.memory[oid] = MemoryObject(oid, a[1], [0] * a[1])
                    env[a[0]] = Pointer(oid, 0)
                elif op == "call":
                    callee = a[1]
                    args = [val(x) for x in a[2:]]
                    new = Frame(callee, self.code.entry_block[callee], 0, dict(zip(self.code.params[callee], args)), a[0])
                    s.frames.append(new)
                    frame, env = new, new.locals
                    code = blocks[callee][new.block]
                    if playout:
                        trace.visited_blocks.append((callee, new.block))
                elif op == "ret":
                    rv = val(a[0]) if a else 0
                    done = s.frames.pop()
                    if not s.frames:
                        return Terminated(s, "exit")
                    frame = s.frames[-1]
                    env = frame.locals
                    if done.ret_dst is not None:
                        env[done.ret_dst] = rv
                    code = blocks[frame.func][frame.block]
                    if playout:
                        trace.visited_blocks.append((frame.func, frame.block))
                elif op == "exit":
                    return Terminated(s, "exit")
                elif op == "abort":
                    w = self._witness(s)
                    if w is None:
                        return Terminated(s, "unverified")
                    err = ErrorRecord(ins.loc, ABORT_REACHED, w)
                    self.record_error(err)
                    if playout:
                        trace.errors_found += 1
                        trace.errors.append(err)
                    return Terminated(s, "error", err)
                else:
                    raise EngineError(f"{ins.loc}: unknown opcode {op!r}")
        finally:
            s.steps += steps
            if playout:
                trace.steps += steps
            else:
                self.stats.instructions += steps

    def _pointer_cmp(self, rel: str, x: Value, y: Value, loc: Location) -> Expr:
        if not (isinstance(x, Pointer) and isinstance(y, Pointer)) or rel not in ("eq", "ne"):
            raise EngineError(f"{loc}: unsupported pointer comparison")
        if x.obj != y.obj:
            return int(rel == "ne")
        return mk_cmp(rel, x.offset, y.offset)

    def _playout_branch(self, s: ExecutionState, cond: Expr, t_label: str, f_label: str, rng: random.Random) -> str:
        # pick a side uniformly, fall back to the other when infeasible: this is
        # the uniform choice among feasible sides with one solver call at most
        want = rng.random() < 0.5
        pos, neg = truth(cond), negate(cond)
        first, second = (pos, neg) if want else (neg, pos)
        status, model, prefix = self._feasible(s, first)
        if status is Status.SAT:
            s.pc.append(first)
            s.model.update(model)
            if prefix is not None:
                s.prefix = prefix
            return t_label if want else f_label
        s.pc.append(second)
        return f_label if want else t_label


def write_run_artifacts(ex: Executor, out: Path, strategy: str) -> None:
    """stats.csv, errors.csv, terminals.csv and one file per test case."""
    out.mkdir(parents=True, exist_ok=True)
    st = ex.stats
    with open(out / "stats.csv", "w", newline="") as fh:
        fh.write("# symtree stats v1\n")
        fh.write("strategy," + ",".join(RunStats.FIELDS) + "\n")
        fh.write(strategy + "," + ",".join(str(getattr(st, k)) for k in RunStats.FIELDS) + "\n")
    with open(out / "errors.csv", "w", newline="") as fh:
        fh.write("# symtree errors v1\n")
        fh.write("site,kind,strategy,selection_index,wall_ms\n")
        for err, sel, wall in ex.error_log:
            fh.write(f"{err.site},{err.kind},{strategy},{sel},{wall}\n")
    with open(out / "terminals.csv", "w", newline="") as fh:
        fh.write("# symtree terminals v1\n")
        fh.write("seq,state,status\n")
        for i, (sid, status) in enumerate(ex.terminals, start=1):
            fh.write(f"{i},{sid},{status}\n")
    tdir = out / "tests"
    tdir.mkdir(exist_ok=True)
    for old in tdir.glob("test*.case"):
        old.unlink()
    for i, tc in enumerate(ex.test_cases, start=1):
        (tdir / f"test{i:06d}.case").write_text(tc.serialize())
