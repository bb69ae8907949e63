"""Concrete interpreter used to replay test cases and witnesses.

Independent of the symbolic engine: plain 32-bit integers, cell arrays, and
pointers that remember which definition created them. The provenance lets a
run report every pointer definition that actually reached a ``gep`` or
``cast``, which the classification must have flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import Location, Program
from .solver import sdiv, wrap

_REL = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class CPtr:
    obj: int
    offset: int
    origin: Location  # the alloc/gep/cast that produced this value


@dataclass
class ReplayResult:
    status: str  # exit | error | cap
    site: Location | None = None
    kind: str | None = None
    steps: int = 0
    gep_origins: set[Location] = field(default_factory=set)
    cast_origins: set[Location] = field(default_factory=set)
    blocks: list[tuple[str, str]] = field(default_factory=list)

    @property
    def error(self) -> tuple[Location, str] | None:
        return (self.site, self.kind) if self.status == "error" else None


def replay(program: Program, inputs: dict[str, int] | list[int], max_steps: int = 1_000_000) -> ReplayResult:
    """Run ``program`` concretely; the k-th symbolic input takes the k-th value.

    ``inputs`` may be a name map (names as in test-case files) or a plain list;
    inputs not supplied default to 0.
    """
    by_name = inputs if isinstance(inputs, dict) else None
    seq = list(inputs) if isinstance(inputs, list) else []
    counter = 0

    def fresh(name: str) -> int:
        nonlocal counter
        key = f"{name}_{counter}"
        if by_name is not None:
            v = by_name.get(key, 0)
        else:
            v = seq[counter] if counter < len(seq) else 0
        counter += 1
        return wrap(v)

    res = ReplayResult("cap")
    memory: dict[int, list] = {}
    entry = program.functions[program.entry]
    frames: list[tuple[str, dict, str, int, str | None]] = []
    env = {p: fresh(p) for p in entry.params}
    func, block, idx, ret_dst = entry.name, entry.entry_block, 0, None
    blocks = {name: f.block_map() for name, f in program.functions.items()}
    res.blocks.append((func, block))

    def val(x):
        return x if isinstance(x, int) else env[x]

    def goto(label):
        nonlocal block, idx
        block, idx = label, 0
        res.blocks.append((func, block))

    while res.steps < max_steps:
        ins = blocks[func][block].instructions[idx]
        loc = Location(func, block, idx)
        res.steps += 1
        idx += 1
        op, a = ins.op, ins.args
        if op == "sym":
            env[a[0]] = fresh(a[0])
        elif op == "const":
            env[a[0]] = a[1]
        elif op == "binop":
            x, y = val(a[2]), val(a[3])
            if a[1] == "add":
                env[a[0]] = wrap(x + y)
            elif a[1] == "sub":
                env[a[0]] = wrap(x - y)
            elif a[1] == "mul":
                env[a[0]] = wrap(x * y)
            else:
                env[a[0]] = sdiv(x, y)
        elif op == "cmp":
            x, y = val(a[2]), val(a[3])
            if isinstance(x, CPtr) or isinstance(y, CPtr):
                same = isinstance(x, CPtr) and isinstance(y, CPtr) and x.obj == y.obj and x.offset == y.offset
                env[a[0]] = int(same if a[1] == "eq" else not same)
            else:
                env[a[0]] = int(_REL[a[1]](x, y))
        elif op == "alloc":
            oid = len(memory)
            memory[oid] = [0] * a[1]
            env[a[0]] = CPtr(oid, 0, loc)
        elif op == "gep":
            p = val(a[1])
            res.gep_origins.add(p.origin)
            env[a[0]] = CPtr(p.obj, wrap(p.offset + val(a[2])), loc)
        elif op == "cast":
            p = val(a[1])
            res.cast_origins.add(p.origin)
            env[a[0]] = CPtr(p.obj, p.offset, loc)
        elif op in ("load", "store"):
            p = val(a[1] if op == "load" else a[0])
            cells = memory[p.obj]
            if not 0 <= p.offset < len(cells):
                res.status, res.site, res.kind = "error", loc, "OutOfBounds"
                return res
            if op == "load":
                env[a[0]] = cells[p.offset]
            else:
                cells[p.offset] = val(a[1])
        elif op == "br":
            goto(a[1] if val(a[0]) else a[2])
        elif op == "jmp":
            goto(a[0])
        elif op == "call":
            callee = program.functions[a[1]]
            args = [val(x) for x in a[2:]]
            frames.append((func, env, block, idx, ret_dst))
            env = dict(zip(callee.params, args))
            func, ret_dst = callee.name, a[0]
            goto(callee.entry_block)
        elif op == "ret":
            rv = val(a[0]) if a else 0
            if not frames:
                res.status = "exit"
                return res
            dst = ret_dst
            func, env, block, idx, ret_dst = frames.pop()
            env[dst] = rv
            res.blocks.append((func, block))
        elif op == "exit":
            res.status = "exit"
            return res
        elif op == "abort":
            res.status, res.site, res.kind = "error", loc, "AbortReached"
            return res
    return res
