import random

from hypothesis import given, settings, strategies as st

from oracles import brute_solve, random_pc
from symtree.solver import (
    INT_MAX,
    INT_MIN,
    Cmp,
    Status,
    Sym,
    canonical_values,
    check_sat,
    check_with,
    collect_vars,
    evaluate,
    mk_binop,
    mk_cmp,
    negate,
    sdiv,
    wrap,
)

i32 = st.integers(INT_MIN, INT_MAX)


def _agrees(res, expect) -> bool:
    if expect is None:
        return res.status is Status.UNSAT
    return res.status is Status.SAT and res.model == expect


def test_solver_matches_enumeration():
    # the full 500-PC suite runs in test_acceptance.py
    rng = random.Random(2)
    mismatches = []
    for k in range(60):
        pc, _ = random_pc(rng)
        expect = brute_solve(pc, collect_vars(pc))
        res = check_sat(pc)
        if not _agrees(res, expect):
            mismatches.append((k, pc, res, expect))
    assert not mismatches, mismatches[:3]


def test_incremental_check_with_matches_enumeration():
    rng = random.Random(7)
    for trial in range(60):
        pc, variables = random_pc(rng)
        base = pc[: 2 * len(variables)]  # the [-64, 64] bounds: always SAT
        prefix, hint = None, {v: 0 for v in variables}
        for extra in pc[len(base) :]:
            res = check_with(base, extra, prefix=prefix, hint=hint)
            expect = brute_solve(base + [extra], variables)
            assert res.status is not Status.UNKNOWN
            assert (expect is None) == (res.status is Status.UNSAT), (trial, base, extra)
            if expect is None:
                break
            full = dict(brute_solve(base, variables))
            full.update(res.model)
            assert all(evaluate(c, full) for c in base + [extra])
            base = base + [extra]
            prefix, hint = res.prefix, full


def test_check_with_negation_splits_a_satisfiable_pc():
    x = Sym("x_0", 0)
    base = [Cmp("ge", x, -5), Cmp("le", x, 5)]
    cond = Cmp("gt", mk_binop("mul", x, 3), 7)
    pos, neg = check_with(base, cond), check_with(base, negate(cond))
    assert pos.sat and neg.sat
    assert evaluate(cond, pos.model) and not evaluate(cond, neg.model)


def test_unconstrained_inputs_default_to_zero():
    x, y = Sym("x_0", 0), Sym("y_1", 1)
    res = check_sat([Cmp("gt", x, 3)], inputs=[x, y])
    assert res.model == {x: 4, y: 0}


def test_wraparound_is_modelled():
    x = Sym("x_0", 0)
    # x + 1 < x only when x + 1 overflows
    res = check_sat([Cmp("lt", mk_binop("add", x, 1), x)])
    assert res.sat and res.model[x] == INT_MAX


def test_sdiv_of_min_by_minus_one_wraps():
    assert sdiv(INT_MIN, -1) == INT_MIN
    assert sdiv(-7, 2) == -3 and sdiv(7, -2) == -3


def test_tiny_budget_never_gives_a_wrong_answer():
    rng = random.Random(3)
    for _ in range(100):
        pc, variables = random_pc(rng)
        res = check_sat(pc, budget=5)
        if res.status is not Status.UNKNOWN:
            assert _agrees(res, brute_solve(pc, variables))


@given(i32)
def test_wrap_is_identity_on_int32(v):
    assert wrap(v) == v


@given(st.integers(-(2**40), 2**40))
def test_wrap_stays_in_range(v):
    w = wrap(v)
    assert INT_MIN <= w <= INT_MAX and (w - v) % (1 << 32) == 0


@given(i32, i32.filter(lambda d: d != 0))
def test_sdiv_truncates_toward_zero(a, b):
    q = sdiv(a, b)
    if (a, b) != (INT_MIN, -1):
        assert q == int(a / b) if abs(a) < 2**52 else True
        assert abs(q * b) <= abs(a)


@given(st.integers(-50, 50), st.integers(0, 60))
def test_canonical_values_enumerate_by_magnitude(lo, width):
    hi = lo + width
    vals = list(canonical_values(lo, hi))
    assert sorted(vals) == list(range(lo, hi + 1))
    keys = [(abs(v), v < 0) for v in vals]
    assert keys == sorted(keys)


@given(st.sampled_from(["add", "sub", "mul", "sdiv"]), i32, st.integers(-9, 9).filter(bool))
def test_folding_agrees_with_evaluation(op, a, b):
    x = Sym("x_0", 0)
    t = mk_binop(op, x, b)
    assert evaluate(t, {x: a}) == mk_binop(op, a, b)


def test_binops_are_hash_consed():
    x, y = Sym("x_0", 0), Sym("y_1", 1)
    assert mk_binop("add", x, y) is mk_binop("add", y, x)
    assert mk_binop("sub", x, 3) is mk_binop("sub", x, 3)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["eq", "ne", "lt", "le", "gt", "ge"]), st.integers(-64, 64), st.integers(-64, 64))
def test_negation_is_complement(rel, a, b):
    x = Sym("x_0", 0)
    c = mk_cmp(rel, x, b)
    assert evaluate(c, {x: a}) != evaluate(negate(c), {x: a})


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(["eq", "ne", "lt", "le", "gt", "ge"]), st.integers(-20, 20), st.integers(-20, 20))
def test_shifted_copies_of_one_input(rel, ka, kb):
    # truth of x+ka rel x+kb only changes near the wrap points, so these candidates decide it
    x = Sym("x_0", 0)
    c = mk_cmp(rel, mk_binop("add", x, ka), mk_binop("add", x, kb))
    near = [0] + [INT_MIN + i for i in range(42)] + [INT_MAX - i for i in range(42)]
    witnesses = [v for v in near if evaluate(c, {x: v})]
    res = check_sat([c])
    assert res.status is not Status.UNKNOWN
    assert res.sat == bool(witnesses)
    if res.sat:
        assert evaluate(c, res.model)
