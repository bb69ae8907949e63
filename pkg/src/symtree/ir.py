"""Textual IR: programs, functions, basic blocks, instructions, and CFGs.

The format is line oriented::

    func f(p, n) {
    entry:
      gep q, p, 1      # comments start with '#'
      cmp c, lt, n, 4
      br c, small, big
    small:
      ret 0
    big:
      ret 1
    }
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Union

Operand = Union[str, int]

EXIT = "<exit>"

BINOPS = ("add", "sub", "mul", "sdiv")
RELATIONS = ("eq", "ne", "lt", "le", "gt", "ge")
TERMINATORS = frozenset({"br", "jmp", "ret", "abort", "exit"})

# opcode -> (min operands, max operands); call is variadic
_ARITY = {
    "sym": (1, 1),
    "const": (2, 2),
    "binop": (4, 4),
    "cmp": (4, 4),
    "alloc": (2, 2),
    "gep": (3, 3),
    "cast": (2, 2),
    "load": (2, 2),
    "store": (2, 2),
    "br": (3, 3),
    "jmp": (1, 1),
    "call": (2, None),
    "ret": (0, 1),
    "abort": (0, 0),
    "exit": (0, 0),
}
OPCODES = frozenset(_ARITY)
DEFINING = frozenset({"sym", "const", "binop", "cmp", "alloc", "gep", "cast", "load", "call"})

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_INT = re.compile(r"-?[0-9]+\Z")
_FUNC_HEADER = re.compile(r"func\s+([A-Za-z_][A-Za-z0-9_]*)\s*\(([^)]*)\)\s*\{\Z")
_LABEL = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*:\Z")


class Location(NamedTuple):
    func: str
    block: str
    index: int

    def __str__(self) -> str:
        return f"{self.func}:{self.block}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> "Location":
        func, block, index = text.split(":")
        return cls(func, block, int(index))


@dataclass(frozen=True)
class Instruction:
    op: str
    args: tuple[Operand, ...] = ()
    line: int = field(default=0, compare=False)

    @property
    def dst(self) -> str | None:
        if self.op in DEFINING:
            return self.args[0]  # type: ignore[return-value]
        return None

    @property
    def is_terminator(self) -> bool:
        return self.op in TERMINATORS

    def targets(self) -> tuple[str, ...]:
        if self.op == "br":
            return (self.args[1], self.args[2])  # type: ignore[return-value]
        if self.op == "jmp":
            return (self.args[0],)  # type: ignore[return-value]
        return ()

    def uses(self) -> list[str]:
        """Identifiers read by this instruction."""
        a = self.args
        if self.op == "binop" or self.op == "cmp":
            ops = a[2:]
        elif self.op in ("gep",):
            ops = a[1:]
        elif self.op in ("cast", "load"):
            ops = a[1:]
        elif self.op == "store":
            ops = a
        elif self.op == "br":
            ops = a[:1]
        elif self.op == "call":
            ops = a[2:]
        elif self.op == "ret":
            ops = a
        else:
            ops = ()
        return [x for x in ops if isinstance(x, str)]

    def __str__(self) -> str:
        if not self.args:
            return self.op
        return f"{self.op} " + ", ".join(str(x) for x in self.args)


@dataclass(frozen=True)
class BasicBlock:
    label: str
    instructions: tuple[Instruction, ...]

    @property
    def terminator(self) -> Instruction:
        return self.instructions[-1]


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[str, ...]
    blocks: tuple[BasicBlock, ...]

    @property
    def entry_block(self) -> str:
        return self.blocks[0].label

    def block(self, label: str) -> BasicBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def block_map(self) -> dict[str, BasicBlock]:
        return {b.label: b for b in self.blocks}

    def locations(self) -> Iterator[tuple[Location, Instruction]]:
        for b in self.blocks:
            for i, ins in enumerate(b.instructions):
                yield Location(self.name, b.label, i), ins


@dataclass(frozen=True)
class Program:
    functions: dict[str, Function]
    entry: str = "main"

    def instruction(self, loc: Location) -> Instruction:
        return self.functions[loc.func].block(loc.block).instructions[loc.index]

    def locations(self) -> Iterator[tuple[Location, Instruction]]:
        for f in self.functions.values():
            yield from f.locations()


@dataclass(frozen=True)
class Diagnostic:
    message: str
    line: int = 0

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}" if self.line else self.message


class IRError(Exception):
    """Raised by the parser; carries the offending line number."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line else message)


# ---------------------------------------------------------------------------
# parsing and printing


def _operand(tok: str, lineno: int) -> Operand:
    tok = tok.strip()
    if _INT.match(tok):
        return int(tok)
    if _IDENT.match(tok):
        return tok
    raise IRError(f"bad operand {tok!r}", lineno)


def _parse_instruction(text: str, lineno: int) -> Instruction:
    head, _, rest = text.partition(" ")
    op = head.strip()
    if op not in OPCODES:
        raise IRError(f"unknown opcode {op!r}", lineno)
    rest = rest.strip()
    args = tuple(_operand(t, lineno) for t in rest.split(",")) if rest else ()
    lo, hi = _ARITY[op]
    if len(args) < lo or (hi is not None and len(args) > hi):
        raise IRError(f"wrong operand count for {op}", lineno)
    return Instruction(op, args, lineno)


def parse_program(text: str, entry: str = "main") -> Program:
    """Parse IR source text into a validated :class:`Program`.

    Raises :class:`IRError` naming the offending line on syntax errors,
    duplicate labels, unknown opcodes, and any validation failure.
    """
    functions: dict[str, Function] = {}
    lines = text.splitlines()
    cur_name: str | None = None
    params: tuple[str, ...] = ()
    blocks: list[BasicBlock] = []
    label: str | None = None
    body: list[Instruction] = []
    header_line = 0

    def close_block(lineno: int) -> None:
        nonlocal label, body
        if label is not None:
            if not body:
                raise IRError(f"empty block {label!r}", lineno)
            blocks.append(BasicBlock(label, tuple(body)))
        label, body = None, []

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if cur_name is None:
            m = _FUNC_HEADER.match(line)
            if not m:
                raise IRError("expected 'func <name>(<params>) {'", lineno)
            cur_name = m.group(1)
            if cur_name in functions:
                raise IRError(f"duplicate function {cur_name!r}", lineno)
            plist = [p.strip() for p in m.group(2).split(",") if p.strip()]
            for p in plist:
                if not _IDENT.match(p):
                    raise IRError(f"bad parameter {p!r}", lineno)
            if len(set(plist)) != len(plist):
                raise IRError("duplicate parameter", lineno)
            params = tuple(plist)
            blocks, label, body, header_line = [], None, [], lineno
            continue
        if line == "}":
            close_block(lineno)
            if not blocks:
                raise IRError(f"function {cur_name!r} has no blocks", lineno)
            functions[cur_name] = Function(cur_name, params, tuple(blocks))
            cur_name = None
            continue
        m = _LABEL.match(line)
        if m:
            close_block(lineno)
            name = m.group(1)
            if any(b.label == name for b in blocks):
                raise IRError(f"duplicate label {name!r}", lineno)
            label = name
            continue
        if label is None:
            raise IRError("instruction outside a block", lineno)
        body.append(_parse_instruction(line, lineno))
    if cur_name is not None:
        raise IRError(f"unterminated function {cur_name!r}", header_line)

    program = Program(functions, entry)
    diags = validate(program)
    if diags:
        d = diags[0]
        raise IRError(d.message, d.line)
    return program


def format_program(program: Program) -> str:
    out: list[str] = []
    for f in program.functions.values():
        out.append(f"func {f.name}({', '.join(f.params)}) {{")
        for b in f.blocks:
            out.append(f"{b.label}:")
            out.extend(f"  {ins}" for ins in b.instructions)
        out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# CFG


@dataclass(frozen=True)
class CFG:
    function: str
    entry: str
    nodes: tuple[str, ...]  # real block labels followed by EXIT
    succ: dict[str, tuple[str, ...]]
    pred: dict[str, tuple[str, ...]]

    def edge_count(self) -> int:
        return sum(len(s) for s in self.succ.values())


def build_cfg(f: Function) -> CFG:
    succ: dict[str, tuple[str, ...]] = {}
    for b in f.blocks:
        term = b.terminator
        if term.op in ("ret", "abort", "exit"):
            succ[b.label] = (EXIT,)
        else:
            succ[b.label] = term.targets()
    succ[EXIT] = ()
    pred: dict[str, list[str]] = {n: [] for n in succ}
    for n, ss in succ.items():
        for s in ss:
            pred[s].append(n)
    nodes = tuple(b.label for b in f.blocks) + (EXIT,)
    return CFG(f.name, f.entry_block, nodes, succ, {k: tuple(v) for k, v in pred.items()})


def reaches_exit(cfg: CFG) -> set[str]:
    seen = {EXIT}
    stack = [EXIT]
    while stack:
        n = stack.pop()
        for p in cfg.pred[n]:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


# ---------------------------------------------------------------------------
# validation


def _check_int(ins: Instruction, pos: int, diags: list[Diagnostic], what: str) -> None:
    if not isinstance(ins.args[pos], int):
        diags.append(Diagnostic(f"{ins.op}: {what} must be an integer literal", ins.line))


def _check_ident(ins: Instruction, pos: int, diags: list[Diagnostic], what: str) -> None:
    if not isinstance(ins.args[pos], str):
        diags.append(Diagnostic(f"{ins.op}: {what} must be an identifier", ins.line))


def validate(program: Program) -> list[Diagnostic]:
    """Return every structural problem found; an empty list means valid."""
    diags: list[Diagnostic] = []
    if program.entry not in program.functions:
        diags.append(Diagnostic(f"entry function {program.entry!r} is not defined"))
    for f in program.functions.values():
        if not f.blocks:
            diags.append(Diagnostic(f"function {f.name!r} has no blocks"))
            continue
        labels = [b.label for b in f.blocks]
        seen: set[str] = set()
        for lab in labels:
            if lab in seen:
                diags.append(Diagnostic(f"{f.name}: duplicate label {lab!r}"))
            seen.add(lab)
        defined = set(f.params)
        for b in f.blocks:
            for ins in b.instructions:
                if ins.dst is not None:
                    defined.add(ins.dst)
        for b in f.blocks:
            if not b.instructions:
                diags.append(Diagnostic(f"{f.name}: block {b.label!r} is empty"))
                continue
            if not b.terminator.is_terminator:
                diags.append(
                    Diagnostic(f"{f.name}: block {b.label!r} does not end with a terminator", b.terminator.line)
                )
            for ins in b.instructions[:-1]:
                if ins.is_terminator:
                    diags.append(Diagnostic(f"{f.name}: terminator before end of block {b.label!r}", ins.line))
            for ins in b.instructions:
                diags.extend(_check_instruction(program, f, ins, seen, defined))
        if not diags:
            cfg = build_cfg(f)
            ok = reaches_exit(cfg)
            for lab in labels:
                if lab not in ok:
                    diags.append(Diagnostic(f"{f.name}: block {lab!r} cannot reach function exit"))
    return diags


def _check_instruction(
    program: Program, f: Function, ins: Instruction, labels: set[str], defined: set[str]
) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    op, a = ins.op, ins.args
    if op not in OPCODES:
        return [Diagnostic(f"unknown opcode {op!r}", ins.line)]
    if op in DEFINING:
        _check_ident(ins, 0, diags, "destination")
    if op == "binop":
        if a[1] not in BINOPS:
            diags.append(Diagnostic(f"unknown binop {a[1]!r}", ins.line))
        if a[1] == "sdiv" and (not isinstance(a[3], int) or a[3] == 0):
            diags.append(Diagnostic("sdiv divisor must be a nonzero integer literal", ins.line))
    elif op == "cmp":
        if a[1] not in RELATIONS:
            diags.append(Diagnostic(f"unknown relation {a[1]!r}", ins.line))
    elif op == "const":
        _check_int(ins, 1, diags, "value")
    elif op == "alloc":
        _check_int(ins, 1, diags, "size")
        if isinstance(a[1], int) and a[1] < 1:
            diags.append(Diagnostic("alloc size must be at least 1", ins.line))
    elif op in ("gep", "cast", "load"):
        _check_ident(ins, 1, diags, "pointer")
    elif op == "store":
        _check_ident(ins, 0, diags, "pointer")
    elif op in ("br", "jmp"):
        for t in ins.targets():
            if not isinstance(t, str) or t not in labels:
                diags.append(Diagnostic(f"unknown label {t!r}", ins.line))
    elif op == "call":
        callee = a[1]
        if not isinstance(callee, str) or callee not in program.functions:
            diags.append(Diagnostic(f"call to undefined function {callee!r}", ins.line))
        elif len(program.functions[callee].params) != len(a) - 2:
            diags.append(Diagnostic(f"call to {callee!r} with wrong argument count", ins.line))
    uses = ins.uses()
    if op == "call":
        uses = [x for x in a[2:] if isinstance(x, str)]
    for u in uses:
        if u not in defined:
            diags.append(Diagnostic(f"{f.name}: use of undefined name {u!r}", ins.line))
    return diags
