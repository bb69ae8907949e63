"""Terms over 32-bit symbolic inputs and a small complete-within-budget solver.

The procedure is interval propagation (HC4-style revise over term trees;
compound subterms keep their own interval, and wrapping add/sub is narrowed
modulo 2^32) followed by a backtracking
search that assigns inputs in declaration order and tries values in
canonical order ``0, 1, -1, 2, -2, ...``. The first model found is therefore
the canonical one: each input gets the smallest-magnitude value consistent
with the constraints and the inputs fixed before it.
"""

from __future__ import annotations

import enum
from collections import deque
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

INT_MIN = -(1 << 31)
INT_MAX = (1 << 31) - 1
DEFAULT_BUDGET = 100_000

_PROPAGATION_ROUNDS = 24
_MOD = 1 << 32


def wrap(v: int) -> int:
    return ((v + (1 << 31)) & 0xFFFFFFFF) - (1 << 31)


def sdiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return wrap(q if (a < 0) == (b < 0) else -q)


# ---------------------------------------------------------------------------
# terms


class Term:
    __slots__ = ("vars", "key", "info")
    vars: frozenset["Sym"]
    key: tuple  # structural sort key, deterministic across runs
    info: "tuple | None"  # solver bookkeeping, filled in lazily by _info


class Sym(Term):
    """A symbolic input; ``index`` fixes its declaration order."""

    __slots__ = ("name", "index", "_hash")

    def __init__(self, name: str, index: int):
        self.name = name
        self.index = index
        self._hash = hash((name, index))
        self.vars = frozenset((self,))
        self.key = ("s", index, name)
        self.info = None

    def __repr__(self) -> str:
        return self.name

    def __eq__(self, other: object) -> bool:
        return self is other or (isinstance(other, Sym) and other.index == self.index and other.name == self.name)

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "Sym") -> bool:
        return self.index < other.index


Expr = Union[int, Term]


def _vars(x: Expr) -> frozenset[Sym]:
    return x.vars if isinstance(x, Term) else frozenset()


def _key(x: Expr) -> tuple:
    return x.key if isinstance(x, Term) else ("i", x)


class BinOp(Term):
    __slots__ = ("op", "a", "b")

    def __init__(self, op: str, a: Expr, b: Expr):
        self.op, self.a, self.b = op, a, b
        self.vars = _vars(a) | _vars(b)
        self.key = ("b", op, _key(a), _key(b))
        self.info = None

    def __repr__(self) -> str:
        return f"({self.a!r} {self.op} {self.b!r})"


class Cmp(Term):
    __slots__ = ("rel", "a", "b")

    def __init__(self, rel: str, a: Expr, b: Expr):
        self.rel, self.a, self.b = rel, a, b
        self.vars = _vars(a) | _vars(b)
        self.key = ("c", rel, _key(a), _key(b))
        self.info = None

    def __repr__(self) -> str:
        return f"({self.a!r} {self.rel} {self.b!r})"


class Ite(Term):
    __slots__ = ("cond", "a", "b")

    def __init__(self, cond: Expr, a: Expr, b: Expr):
        self.cond, self.a, self.b = cond, a, b
        self.vars = _vars(cond) | _vars(a) | _vars(b)
        self.key = ("t", _key(cond), _key(a), _key(b))
        self.info = None

    def __repr__(self) -> str:
        return f"ite({self.cond!r}, {self.a!r}, {self.b!r})"


_ARITH = {
    "add": lambda a, b: wrap(a + b),
    "sub": lambda a, b: wrap(a - b),
    "mul": lambda a, b: wrap(a * b),
    "sdiv": sdiv,
}
_REL = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
}
NEGATE = {"eq": "ne", "ne": "eq", "lt": "ge", "ge": "lt", "gt": "le", "le": "gt"}
_SWAP = {"eq": "eq", "ne": "ne", "lt": "gt", "gt": "lt", "le": "ge", "ge": "le"}


def mk_binop(op: str, a: Expr, b: Expr) -> Expr:
    if isinstance(a, int) and isinstance(b, int):
        return _ARITH[op](a, b)
    if op == "add":
        if a == 0 and isinstance(a, int):
            return b
        if b == 0 and isinstance(b, int):
            return a
    elif op == "sub" and isinstance(b, int) and b == 0:
        return a
    elif op == "mul":
        for x, y in ((a, b), (b, a)):
            if isinstance(x, int):
                if x == 0:
                    return 0
                if x == 1:
                    return y
    elif op == "sdiv" and isinstance(b, int) and b == 1:
        return a
    if op in ("add", "mul") and _key(b) < _key(a):
        a, b = b, a
    # hash-consing: structurally equal terms become one object, so the
    # solver's per-subterm intervals are shared between conjuncts
    ck = (op, a, b)
    t = _INTERN.get(ck)
    if t is None:
        if len(_INTERN) >= _INTERN_LIMIT:
            _INTERN.clear()
        t = _INTERN[ck] = BinOp(op, a, b)
    return t


_INTERN: dict[tuple, BinOp] = {}
_INTERN_LIMIT = 500_000


def mk_cmp(rel: str, a: Expr, b: Expr) -> Expr:
    if isinstance(a, int) and isinstance(b, int):
        return int(_REL[rel](a, b))
    return Cmp(rel, a, b)


def mk_ite(c: Expr, a: Expr, b: Expr) -> Expr:
    if isinstance(c, int):
        return a if c else b
    if isinstance(a, int) and isinstance(b, int) and a == b:
        return a
    return Ite(c, a, b)


def truth(t: Expr) -> Expr:
    """Boolean view of a value: nonzero means true."""
    if isinstance(t, Cmp) or isinstance(t, int):
        return t if not isinstance(t, int) else int(t != 0)
    return Cmp("ne", t, 0)


def negate(t: Expr) -> Expr:
    if isinstance(t, int):
        return int(t == 0)
    if isinstance(t, Cmp):
        return Cmp(NEGATE[t.rel], t.a, t.b)
    return Cmp("eq", t, 0)


def evaluate(t: Expr, model: Mapping[Sym, int]) -> int:
    if isinstance(t, int):
        return t
    if isinstance(t, Sym):
        return model.get(t, 0)
    if isinstance(t, BinOp):
        return _ARITH[t.op](evaluate(t.a, model), evaluate(t.b, model))
    if isinstance(t, Cmp):
        return int(_REL[t.rel](evaluate(t.a, model), evaluate(t.b, model)))
    if isinstance(t, Ite):
        return evaluate(t.a, model) if evaluate(t.cond, model) else evaluate(t.b, model)
    raise TypeError(f"not a term: {t!r}")


def collect_vars(conjuncts: Iterable[Expr]) -> list[Sym]:
    vs: set[Sym] = set()
    for c in conjuncts:
        vs |= _vars(c)
    return sorted(vs)


# ---------------------------------------------------------------------------
# results


class Status(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SolverResult:
    status: Status
    model: dict[Sym, int] = field(default_factory=dict)
    steps: int = 0
    # solver state to pass as ``prefix`` when extending this query (check_with only)
    prefix: "tuple | None" = field(default=None, repr=False, compare=False)

    @property
    def sat(self) -> bool:
        return self.status is Status.SAT


class SolverError(Exception):
    pass


class _Conflict(Exception):
    pass


class _OutOfBudget(Exception):
    pass


# ---------------------------------------------------------------------------
# interval propagation

class Box(dict):
    """Sym or compound term -> (lo, hi); remembers which entries were written."""

    __slots__ = ("changed",)

    def __init__(self, *args):
        super().__init__(*args)
        self.changed: list = []

    def __setitem__(self, key, value) -> None:
        dict.__setitem__(self, key, value)
        self.changed.append(key)


def _fwd(t: Expr, box: Box) -> tuple[int, int, bool]:
    """Interval of ``t`` under ``box``; the flag is False when wrapping may occur."""
    tt = type(t)
    if tt is Sym:
        lo, hi = box[t]
        return lo, hi, True
    if tt is BinOp:
        lo, hi, exact = _fwd_binop(t, box)
        stored = box.get(t)
        if stored is not None:
            if stored[0] > lo:
                lo = stored[0]
            if stored[1] < hi:
                hi = stored[1]
            if lo > hi:
                raise _Conflict
        return lo, hi, exact
    if isinstance(t, int):
        return t, t, True
    if isinstance(t, Cmp):
        alo, ahi, _ = _fwd(t.a, box)
        blo, bhi, _ = _fwd(t.b, box)
        rel = t.rel
        if rel == "lt":
            must, can = ahi < blo, alo < bhi
        elif rel == "le":
            must, can = ahi <= blo, alo <= bhi
        elif rel == "gt":
            must, can = alo > bhi, ahi > blo
        elif rel == "ge":
            must, can = alo >= bhi, ahi >= blo
        elif rel == "eq":
            must = alo == ahi == blo == bhi
            can = not (ahi < blo or bhi < alo)
        else:
            can = not (alo == ahi == blo == bhi)
            must = ahi < blo or bhi < alo
        if must:
            return 1, 1, True
        if not can:
            return 0, 0, True
        return 0, 1, True
    if isinstance(t, Ite):
        clo, chi, _ = _fwd(t.cond, box)
        if clo == chi == 0:
            return _fwd(t.b, box)
        if clo > 0 or chi < 0:
            return _fwd(t.a, box)
        alo, ahi, _ = _fwd(t.a, box)
        blo, bhi, _ = _fwd(t.b, box)
        return min(alo, blo), max(ahi, bhi), True
    raise TypeError(f"not a term: {t!r}")


def _fwd_binop(t: BinOp, box: Box) -> tuple[int, int, bool]:
    """Interval implied by the operands alone, ignoring the node's own interval."""
    a, b = t.a, t.b
    if type(a) is Sym:
        alo, ahi = box[a]
    else:
        alo, ahi, _ = _fwd(a, box)
    if type(b) is int:
        blo = bhi = b
        if t.op == "sdiv" and b > 0:
            # truncating division by a positive constant is monotone
            lo = alo // b if alo >= 0 else -((-alo) // b)
            hi = ahi // b if ahi >= 0 else -((-ahi) // b)
            return lo, hi, True
    else:
        blo, bhi, _ = _fwd(b, box)
    op = t.op
    if op == "add":
        lo, hi = alo + blo, ahi + bhi
    elif op == "sub":
        lo, hi = alo - bhi, ahi - blo
    elif op == "mul":
        ps = (alo * blo, alo * bhi, ahi * blo, ahi * bhi)
        lo, hi = min(ps), max(ps)
    else:
        d = t.b if isinstance(t.b, int) else None
        if d is None or (d == -1 and alo == INT_MIN):
            return INT_MIN, INT_MAX, False
        qs = (sdiv(alo, d), sdiv(ahi, d))
        lo, hi = min(qs), max(qs)
    if INT_MIN <= lo and hi <= INT_MAX:
        return lo, hi, True
    if op != "mul" and hi < INT_MIN:
        return lo + _MOD, hi + _MOD, False
    if op != "mul" and lo > INT_MAX:
        return lo - _MOD, hi - _MOD, False
    return INT_MIN, INT_MAX, False


def _narrow(t: Expr, lo: int, hi: int, box: Box) -> None:
    """Restrict ``box`` so that ``t`` can only take values in [lo, hi]."""
    if lo > hi:
        raise _Conflict
    if isinstance(t, int):
        if not lo <= t <= hi:
            raise _Conflict
        return
    if isinstance(t, Sym):
        clo, chi = box[t]
        nlo, nhi = max(lo, clo), min(hi, chi)
        if nlo > nhi:
            raise _Conflict
        if (nlo, nhi) != (clo, chi):
            box[t] = (nlo, nhi)
        return
    if isinstance(t, BinOp):
        _narrow_binop(t, lo, hi, box)
        return
    tlo, thi, _ = _fwd(t, box)
    if thi < lo or tlo > hi:
        raise _Conflict
    if tlo >= lo and thi <= hi:
        return
    if isinstance(t, Cmp):
        want_true = lo >= 1 or hi < 0
        want_false = lo == hi == 0
        if want_true:
            _apply_rel(t.rel, t.a, t.b, box)
        elif want_false:
            _apply_rel(NEGATE[t.rel], t.a, t.b, box)
        return
    if isinstance(t, Ite):
        clo, chi, _ = _fwd(t.cond, box)
        if clo == chi == 0:
            _narrow(t.b, lo, hi, box)
        elif clo > 0 or chi < 0:
            _narrow(t.a, lo, hi, box)


def _narrow_binop(t: BinOp, lo: int, hi: int, box: Box) -> None:
    stored = box.get(t)
    if stored is not None:
        lo, hi = max(lo, stored[0]), min(hi, stored[1])
    rlo, rhi, exact = _fwd_binop(t, box)
    lo, hi = max(lo, rlo), min(hi, rhi)
    if lo > hi:
        raise _Conflict
    if (lo, hi) == (rlo, rhi):
        return  # already implied by the operands
    # the node's own interval: repeated subterms share it across conjuncts
    if stored != (lo, hi):
        box[t] = (lo, hi)
    a, b = t.a, t.b
    if t.op in ("add", "sub"):
        _narrow_linear(t, lo, hi, box)
    elif t.op == "mul":
        if not exact:
            if lo == hi:
                _invert_point(t, lo, box)
        elif isinstance(b, int):
            _narrow_mul(a, b, lo, hi, box)
        elif isinstance(a, int):
            _narrow_mul(b, a, lo, hi, box)
        else:
            blo, bhi, _ = _fwd(b, box)
            if blo > 0 or bhi < 0:
                _narrow_by_quotient(a, lo, hi, blo, bhi, box)
            alo, ahi, _ = _fwd(a, box)
            if alo > 0 or ahi < 0:
                _narrow_by_quotient(b, lo, hi, alo, ahi, box)
    elif t.op == "sdiv" and isinstance(b, int) and exact:
        _narrow_div(a, b, lo, hi, box)


def _narrow_linear(t: BinOp, lo: int, hi: int, box: Box) -> None:
    # the unwrapped result equals the wrapped one shifted by -2^32, 0 or 2^32;
    # intersect each shift with the unwrapped range and narrow by the hull
    alo, ahi, _ = _fwd(t.a, box)
    blo, bhi, _ = _fwd(t.b, box)
    if t.op == "add":
        slo, shi = alo + blo, ahi + bhi
    else:
        slo, shi = alo - bhi, ahi - blo
    pieces = []
    for k in (-_MOD, 0, _MOD):
        plo, phi = max(lo + k, slo), min(hi + k, shi)
        if plo <= phi:
            pieces.append((plo, phi))
    if not pieces:
        raise _Conflict
    L, H = pieces[0][0], pieces[-1][1]
    if t.op == "add" and _key(t.a) == _key(t.b):
        _narrow(t.a, -((-L) // 2), H // 2, box)  # x + x == 2x
        return
    if t.op == "add":
        _narrow(t.a, L - bhi, H - blo, box)
        alo, ahi, _ = _fwd(t.a, box)
        _narrow(t.b, L - ahi, H - alo, box)
    else:
        _narrow(t.a, L + blo, H + bhi, box)
        alo, ahi, _ = _fwd(t.a, box)
        _narrow(t.b, alo - H, ahi - L, box)


def _invert_point(t: BinOp, v: int, box: Box) -> None:
    # multiplication by an odd constant is a bijection on 32-bit values,
    # so a point target pins the other operand exactly
    alo, ahi, _ = _fwd(t.a, box)
    blo, bhi, _ = _fwd(t.b, box)
    if blo == bhi and blo % 2:
        w = wrap(v * pow(blo, -1, _MOD))
        _narrow(t.a, w, w, box)
    elif alo == ahi and alo % 2:
        w = wrap(v * pow(alo, -1, _MOD))
        _narrow(t.b, w, w, box)


def _narrow_mul(x: Expr, c: int, lo: int, hi: int, box: Box) -> None:
    if c == 0:
        if not lo <= 0 <= hi:
            raise _Conflict
        return
    if c < 0:
        lo, hi, c = -hi, -lo, -c
    _narrow(x, -((-lo) // c), hi // c, box)


def _narrow_by_quotient(x: Expr, lo: int, hi: int, dlo: int, dhi: int, box: Box) -> None:
    # x * d in [lo, hi] with d ranging over [dlo, dhi] not containing 0
    qs = [Fraction(n, d) for n in (lo, hi) for d in (dlo, dhi)]
    _narrow(x, math.ceil(min(qs)), math.floor(max(qs)), box)


def _narrow_div(x: Expr, d: int, lo: int, hi: int, box: Box) -> None:
    # x / d in [lo, hi] with truncating division; x / -d == -(x / d)
    if d < 0:
        lo, hi, d = -hi, -lo, -d
    xlo = lo * d if lo > 0 else lo * d - d + 1
    xhi = hi * d + d - 1 if hi >= 0 else hi * d
    _narrow(x, xlo, xhi, box)


def _offset(t: Expr) -> tuple[Expr, int]:
    """(base, k) with t == wrap(base + k); nested constant shifts compose modulo 2^32."""
    k = 0
    while type(t) is BinOp:
        if t.op == "add":
            if type(t.b) is int:
                k, t = k + t.b, t.a
            elif type(t.a) is int:
                k, t = k + t.a, t.b
            else:
                break
        elif t.op == "sub" and type(t.b) is int:
            k, t = k - t.b, t.a
        else:
            break
    return t, k


def _same_base_rel(rel: str, a: Expr, b: Expr, box: Box) -> bool:
    """Decide ``a rel b`` when both are constant shifts of one base term.

    Returns True when handled. Without this, x + 1 < x style constraints only
    ping-pong the intervals one unit per revision.
    """
    if type(a) is int or type(b) is int:
        return False
    base, ka = _offset(a)
    other, kb = _offset(b)
    if isinstance(base, int) or not (base is other or (type(base) is Sym and base == other)):
        return False
    if rel in ("eq", "ne"):
        if ((ka - kb) % _MOD == 0) != (rel == "eq"):
            raise _Conflict
        return True
    holds = _REL[rel](ka, kb)
    # base + k is exact for both offsets on [nlo, nhi]
    nlo, nhi = INT_MIN - min(ka, kb, 0), INT_MAX - max(ka, kb, 0)
    lo, hi, _ = _fwd(base, box)
    if holds:
        return nlo <= lo and hi <= nhi  # entailed unless some value wraps
    # only wrapping values can satisfy it
    pieces = [(max(lo, INT_MIN), min(hi, nlo - 1)), (max(lo, nhi + 1), min(hi, INT_MAX))]
    pieces = [p for p in pieces if p[0] <= p[1]]
    if not pieces:
        raise _Conflict
    _narrow(base, pieces[0][0], pieces[-1][1], box)
    return False  # the hull may still hold non-solutions: keep revising


def _apply_rel(rel: str, a: Expr, b: Expr, box: Box) -> None:
    if _same_base_rel(rel, a, b, box):
        return
    alo, ahi, _ = _fwd(a, box)
    blo, bhi, _ = _fwd(b, box)
    if rel in ("gt", "ge"):
        rel, a, b = _SWAP[rel], b, a
        alo, ahi, blo, bhi = blo, bhi, alo, ahi
    if rel == "lt":
        if alo >= bhi:
            raise _Conflict
        _narrow(a, INT_MIN, bhi - 1, box)
        alo = _fwd(a, box)[0]
        _narrow(b, alo + 1, INT_MAX, box)
    elif rel == "le":
        if alo > bhi:
            raise _Conflict
        _narrow(a, INT_MIN, bhi, box)
        alo = _fwd(a, box)[0]
        _narrow(b, alo, INT_MAX, box)
    elif rel == "eq":
        lo, hi = max(alo, blo), min(ahi, bhi)
        if lo > hi:
            raise _Conflict
        _narrow(a, lo, hi, box)
        _narrow(b, lo, hi, box)
    else:  # ne: only endpoint trimming against a point
        if alo == ahi == blo == bhi:
            raise _Conflict
        if blo == bhi:
            _trim(a, blo, box)
        elif alo == ahi:
            _trim(b, alo, box)


def _trim(t: Expr, v: int, box: Box) -> None:
    lo, hi, _ = _fwd(t, box)
    if lo == v:
        _narrow(t, v + 1, hi, box)
    elif hi == v:
        _narrow(t, lo, v - 1, box)


def _is_view(t: Term) -> bool:
    return (
        isinstance(t, BinOp) and t.op == "sdiv" and isinstance(t.a, Sym)
        and isinstance(t.b, int) and t.b not in (0, -1)
    )


def _info(t: Term) -> tuple:
    """(Sym and BinOp subterms, input -> quotient view, inputs used otherwise), cached on the term."""
    inf = t.info
    if inf is not None:
        return inf
    if isinstance(t, Sym):
        inf = ((t,), {}, frozenset((t,)))
    elif _is_view(t):
        inf = ((t, t.a), {t.a: t}, frozenset())
    else:
        subs: dict[int, Term] = {id(t): t} if isinstance(t, BinOp) else {}
        views: dict[Sym, BinOp] = {}
        direct: set[Sym] = set()
        for ch in (t.cond, t.a, t.b) if isinstance(t, Ite) else (t.a, t.b):
            if isinstance(ch, Term):
                csubs, cviews, cdirect = _info(ch)
                for x in csubs:
                    subs[id(x)] = x
                for v, n in cviews.items():
                    if views.setdefault(v, n).key != n.key:
                        direct.add(v)
                direct |= cdirect
        inf = (tuple(subs.values()), views, frozenset(direct))
    t.info = inf
    return inf


def _watch_index(conjuncts: Sequence[Expr]) -> dict:
    """Sym or BinOp -> indices of the conjuncts that contain it."""
    watch: dict = {}
    for i, c in enumerate(conjuncts):
        if isinstance(c, Term):
            for t in _info(c)[0]:
                watch.setdefault(t, []).append(i)
    return watch


def _revise(c: Expr, box: Box) -> None:
    if isinstance(c, Cmp):
        _apply_rel(c.rel, c.a, c.b, box)
    else:
        lo, hi, _ = _fwd(c, box)
        if lo == hi == 0:
            raise _Conflict
        _trim(c, 0, box)


def _propagate(conjuncts: Sequence[Expr], box: Box, watch: dict | None = None, seeds: Iterable[int] | None = None) -> None:
    """Revise conjuncts until no interval moves (or a revision cap is hit).

    Only conjuncts mentioning a changed entry are revisited; ``seeds`` limits
    the initial worklist, e.g. to the conjuncts of a freshly restricted input.
    """
    if watch is None:
        watch = _watch_index(conjuncts)
    pending = deque(range(len(conjuncts)) if seeds is None else seeds)
    queued = set(pending)
    left = _PROPAGATION_ROUNDS * max(len(conjuncts), 1)
    while pending and left:
        i = pending.popleft()
        queued.discard(i)
        left -= 1
        box.changed = []
        _revise(conjuncts[i], box)
        for t in box.changed:
            for j in watch.get(t, ()):
                if j not in queued:
                    queued.add(j)
                    pending.append(j)


# ---------------------------------------------------------------------------
# search


def canonical_values(lo: int, hi: int) -> Iterator[int]:
    """Integers of [lo, hi] ordered by magnitude, non-negative first on ties."""
    if lo > hi:
        return
    if lo >= 0:
        yield from range(lo, hi + 1)
        return
    if hi <= 0:
        yield from range(hi, lo - 1, -1)
        return
    yield 0
    k = 1
    while k <= hi or -k >= lo:
        if k <= hi:
            yield k
        if -k >= lo:
            yield -k
        k += 1


def _halves(lo: int, hi: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Split [lo, hi] in two, the half nearer zero first."""
    if lo < 0 <= hi:
        return (0, hi), (lo, -1)
    mid = (lo + hi) // 2
    if lo >= 0:
        return (lo, mid), (mid + 1, hi)
    return (mid + 1, hi), (lo, mid)


def _probe_then_halves(lo: int, hi: int) -> list[tuple[int, int]]:
    """The value nearest zero as a point, then the rest of [lo, hi] in halves."""
    if lo <= 0 <= hi:
        return [(0, 0), (1, hi), (lo, -1)]
    if lo > 0:
        return [(lo, lo), *_halves(lo + 1, hi)]
    return [(hi, hi), *_halves(lo, hi - 1)]


_ENUMERATE_BELOW = 16  # domains smaller than this are enumerated, larger ones bisected
_SCAN = 16  # canonical values tried one by one before galloping on magnitude


class _Search:
    """Backtracking over inputs on top of interval propagation.

    ``find_any`` picks the input with the smallest interval (ties: the one in
    most conjuncts, then declaration order) and bisects its interval, or
    enumerates it once small. ``find_canonical`` fixes inputs in declaration
    order to the smallest-magnitude value (non-negative first) for which
    ``find_any`` shows the remaining problem is satisfiable.
    """

    def __init__(
        self, conjuncts: Sequence[Expr], budget: int, focus: frozenset[Sym] | None = None, watch: dict | None = None
    ):
        self.conjuncts = list(conjuncts)
        self.budget = budget
        self.steps = 0
        self.order = collect_vars(self.conjuncts)
        # inputs to branch on and the conjuncts a leaf must satisfy; other
        # inputs belong to an independent part that is already known sat
        self.branch = self.order if focus is None else [v for v in self.order if v in focus]
        self.checked = self.conjuncts if focus is None else [c for c in self.conjuncts if _vars(c) & focus]
        degree = {v: 0 for v in self.order}
        for c in self.conjuncts:
            for v in _vars(c):
                degree[v] += 1
        self.rank = {v: (-degree[v], i) for i, v in enumerate(self.order)}
        self.views = _quotient_views(self.conjuncts)
        self.watch = _watch_index(self.conjuncts) if watch is None else watch

    def _domain(self, box: Box, var: Sym) -> tuple[int, int]:
        """The interval search branches on: the quotient for a viewed input."""
        view = self.views.get(var)
        if view is None:
            return box[var]
        lo, hi, _ = _fwd(view, box)
        return lo, hi

    def _restrict_view(self, box: Box, var: Sym, qlo: int, qhi: int) -> Box | None:
        # inputs seen only through ``var sdiv d`` are interchangeable within a
        # quotient band, so a point quotient pins the input to one representative
        d = self.views[var].b
        lo, hi = box[var]
        if d < 0:
            qlo, qhi, d = -qhi, -qlo, -d
        xlo = qlo * d if qlo > 0 else qlo * d - d + 1
        xhi = qhi * d + d - 1 if qhi >= 0 else qhi * d
        lo, hi = max(lo, xlo), min(hi, xhi)
        if lo > hi:
            return None
        if qlo == qhi:
            lo = hi = next(canonical_values(lo, hi))
        return self._restrict(box, var, lo, hi)

    def _root(self, shave: bool = True) -> Box | None:
        box = Box({v: (INT_MIN, INT_MAX) for v in self.order})
        try:
            _propagate(self.conjuncts, box, self.watch)
        except _Conflict:
            return None
        return self._shave(box) if shave else box

    def _shave(self, box: Box) -> Box | None:
        """Drop halves of each domain that propagation alone refutes."""
        changed = True
        while changed:
            changed = False
            for var in self.order:
                while box[var][1] - box[var][0] >= _ENUMERATE_BELOW:
                    h1, h2 = _halves(*box[var])
                    c1 = self._restrict(box, var, *h1)
                    c2 = self._restrict(box, var, *h2)
                    if c1 is None and c2 is None:
                        return None
                    if c1 is not None and c2 is not None:
                        break
                    box = c1 if c1 is not None else c2
                    changed = True
        return box

    def _restrict(self, box: Box, var: Sym, lo: int, hi: int) -> Box | None:
        self.steps += 1
        if self.steps > self.budget:
            raise _OutOfBudget
        child = Box(box)
        clo, chi = box[var]
        lo, hi = max(lo, clo), min(hi, chi)
        if lo > hi:
            return None
        child[var] = (lo, hi)
        try:
            _propagate(self.conjuncts, child, self.watch, self.watch[var])
        except _Conflict:
            return None
        return child

    def _leaf(self, box: Box) -> dict[Sym, int] | None:
        model = {v: box[v][0] for v in self.branch}
        if all(evaluate(c, model) for c in self.checked):
            return model
        return None

    def _any(self, box: Box) -> dict[Sym, int] | None:
        free = [v for v in self.branch if box[v][0] != box[v][1]]
        if not free:
            return self._leaf(box)
        doms = {v: self._domain(box, v) for v in free}
        var = min(free, key=lambda v: (doms[v][1] - doms[v][0], self.rank[v]))
        lo, hi = doms[var]
        if hi - lo < _ENUMERATE_BELOW:
            parts = [(v, v) for v in canonical_values(lo, hi)]
        else:
            parts = _probe_then_halves(lo, hi)
        restrict = self._restrict_view if var in self.views else self._restrict
        for plo, phi in parts:
            child = restrict(box, var, plo, phi)
            if child is not None:
                found = self._any(child)
                if found is not None:
                    return found
        return None

    def find_any(self) -> dict[Sym, int] | None:
        box = self._root(shave=False)
        return None if box is None else self._any(box)

    def _feasible(self, box: Box, var: Sym, lo: int, hi: int) -> Box | None:
        child = self._restrict(box, var, lo, hi)
        if child is not None and self._any(child) is not None:
            return child
        return None

    def _fix_canonical(self, box: Box, var: Sym) -> Box | None:
        lo, hi = box[var]
        checked = -1  # every value of magnitude <= checked is infeasible
        for i, v in enumerate(canonical_values(lo, hi)):
            if i == _SCAN:
                break
            child = self._feasible(box, var, v, v)
            if child is not None:
                return child
            if v >= 0 and -v < lo or v < 0:
                checked = abs(v)
        else:
            return None
        top = max(abs(lo), abs(hi))
        # gallop, then bisect, on the smallest feasible magnitude
        k = max(checked, 1)
        while True:
            k = min(2 * k + 1, top)
            if self._feasible(box, var, -k, k) is not None:
                break
            if k == top:
                return None
            checked = k
        lo_k, hi_k = checked + 1, k
        while lo_k < hi_k:
            mid = (lo_k + hi_k) // 2
            if self._feasible(box, var, -mid, mid) is not None:
                hi_k = mid
            else:
                lo_k = mid + 1
        for v in (lo_k, -lo_k):
            child = self._feasible(box, var, v, v)
            if child is not None:
                return child
        raise SolverError(f"no value of magnitude {lo_k} for {var!r} despite a feasible range")

    def find_canonical(self) -> dict[Sym, int] | None:
        box = self._root()
        if box is None:
            return None
        for var in self.order:
            if box[var][0] == box[var][1]:
                continue
            nxt = self._fix_canonical(box, var)
            if nxt is None:
                return None
            box = nxt
        return self._leaf(box)


def _quotient_views(conjuncts: Sequence[Expr]) -> dict[Sym, BinOp]:
    """Inputs whose every occurrence is the same ``x sdiv d`` (d a constant, not -1)."""
    views: dict[Sym, BinOp] = {}
    direct: set[Sym] = set()
    for c in conjuncts:
        if isinstance(c, Term):
            _, cviews, cdirect = _info(c)
            for v, n in cviews.items():
                if views.setdefault(v, n).key != n.key:
                    direct.add(v)
            direct |= cdirect
    return {v: n for v, n in views.items() if v not in direct}


def _components(conjuncts: Sequence[Expr]) -> list[list[Expr]]:
    """Partition conjuncts into groups that share no inputs."""
    parent: dict[Sym, Sym] = {}

    def find(x: Sym) -> Sym:
        while parent[x] is not x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for c in conjuncts:
        vs = sorted(_vars(c))
        for v in vs:
            parent.setdefault(v, v)
        for v in vs[1:]:
            ra, rb = find(vs[0]), find(v)
            if ra is not rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[Sym, list[Expr]] = {}
    for c in conjuncts:
        vs = _vars(c)
        if vs:
            groups.setdefault(find(min(vs)), []).append(c)
    return [groups[k] for k in sorted(groups)]


def check_sat(
    conjuncts: Sequence[Expr],
    budget: int = DEFAULT_BUDGET,
    inputs: Iterable[Sym] = (),
    canonical: bool = True,
) -> SolverResult:
    """Decide the conjunction; SAT results carry the canonical model.

    ``inputs`` lists declared inputs that should appear in the model even
    when unconstrained (they get 0). With ``canonical=False`` any model is
    returned, which is usually much cheaper.
    """
    model: dict[Sym, int] = {v: 0 for v in inputs}
    for c in conjuncts:
        if isinstance(c, int) and c == 0:
            return SolverResult(Status.UNSAT)
    remaining = budget
    steps = 0
    for group in _components([c for c in conjuncts if not isinstance(c, int)]):
        search = _Search(group, remaining)
        try:
            found = search.find_canonical() if canonical else search.find_any()
        except _OutOfBudget:
            return SolverResult(Status.UNKNOWN, steps=steps + search.steps)
        steps += search.steps
        remaining -= search.steps
        if found is None:
            return SolverResult(Status.UNSAT, steps=steps)
        model.update(found)
    return SolverResult(Status.SAT, dict(sorted(model.items())), steps)


def canonical_model(
    conjuncts: Sequence[Expr], budget: int = DEFAULT_BUDGET, inputs: Iterable[Sym] = ()
) -> dict[Sym, int]:
    res = check_sat(conjuncts, budget, inputs)
    if not res.sat:
        raise SolverError(f"path condition is not satisfiable ({res.status.value})")
    return res.model


Prefix = tuple  # (box, n, watch): intervals and watch index for conjuncts [:n]


def check_with(
    base: Sequence[Expr],
    extra: Expr,
    budget: int = DEFAULT_BUDGET,
    prefix: Prefix | None = None,
    hint: Mapping[Sym, int] | None = None,
) -> SolverResult:
    """Satisfiability of ``base + [extra]`` assuming ``base`` alone is satisfiable.

    Only inputs connected to ``extra`` through shared conjuncts are searched;
    the returned model (any model, not the canonical one) covers just those.
    ``prefix`` is the ``prefix`` of an earlier SAT result whose query was a
    prefix of ``base``: only the newer conjuncts are revised from its
    intervals. ``hint`` (e.g. a model of ``base``) is clamped into the
    propagated intervals and tried before searching.
    """
    if isinstance(extra, int):
        return SolverResult(Status.SAT if extra else Status.UNSAT)
    conj = list(base)
    conj.append(extra)
    if prefix is not None:
        start, done, old_watch = prefix
        box = Box(start)
        watch = dict(old_watch)
    else:
        box, done, watch = Box(), 0, {}
    for i in range(done, len(conj)):
        c = conj[i]
        if isinstance(c, Term):
            for t in _info(c)[0]:
                watch[t] = watch.get(t, ()) + (i,)
                if isinstance(t, Sym) and t not in box:
                    dict.__setitem__(box, t, (INT_MIN, INT_MAX))
    try:
        _propagate(conj, box, watch, range(done, len(conj)))
    except _Conflict:
        return SolverResult(Status.UNSAT)
    focus = set(extra.vars)
    checked = [extra]
    pending = [c for c in base if isinstance(c, Term)]
    grew = True
    while grew:
        grew = False
        rest = []
        for c in pending:
            if c.vars & focus:
                focus |= c.vars
                checked.append(c)
                grew = True
            else:
                rest.append(c)
        pending = rest
    out_prefix = (box, len(conj), watch)
    if hint is not None:
        guess = {v: min(max(hint.get(v, 0), box[v][0]), box[v][1]) for v in sorted(focus)}
        if all(evaluate(c, guess) for c in checked):
            return SolverResult(Status.SAT, guess, 0, out_prefix)
    search = _Search(conj, budget, frozenset(focus), watch)
    try:
        found = search._any(Box(box))
    except _OutOfBudget:
        return SolverResult(Status.UNKNOWN, steps=search.steps)
    if found is None:
        return SolverResult(Status.UNSAT, steps=search.steps)
    return SolverResult(Status.SAT, dict(sorted(found.items())), search.steps, out_prefix)
