import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_ipostdom, brute_postdominators, random_cfg_text
from symtree.analysis import (
    AnalysisError,
    PointerKind,
    ProgramAnalysis,
    classify_pointers,
    compute_post_dominators,
    exp_score,
    unique_blocks,
    unsafe_sites,
)
from symtree.bench import CorpusSpec, gen_program
from symtree.experiments import bundled_program
from symtree.ir import CFG, EXIT, IRError, Location, build_cfg, parse_program
from symtree.replay import replay


def _cfg(seed: int):
    rng = random.Random(seed)
    text = random_cfg_text(rng, rng.randint(1, 9))  # plus EXIT: at most 10 nodes
    return build_cfg(parse_program(text).functions["main"])


def test_postdominators_match_brute_force():
    # the 200-CFG suite runs in test_acceptance.py
    for seed in range(1000, 1050):
        cfg = _cfg(seed)
        assert len(cfg.nodes) <= 10
        pd = compute_post_dominators(cfg)
        brute = brute_postdominators(cfg)
        assert {n: set(s) for n, s in pd.postdoms.items()} == brute, seed
        assert pd.ipostdom == brute_ipostdom(cfg), seed


def test_block_that_cannot_exit_is_rejected():
    text = "func main() {\nentry:\n  sym x\n  br x, spin, out\nspin:\n  jmp spin\nout:\n  exit\n}\n"
    with pytest.raises(IRError, match="cannot reach"):
        parse_program(text)
    succ = {"entry": ("spin", "out"), "spin": ("spin",), "out": (EXIT,), EXIT: ()}
    pred = {"entry": (), "spin": ("entry", "spin"), "out": ("entry",), EXIT: ("out",)}
    cfg = CFG("main", "entry", ("entry", "spin", "out", EXIT), succ, pred)
    with pytest.raises(AnalysisError):
        compute_post_dominators(cfg)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_unique_blocks_are_disjoint_and_stop_at_join(seed):
    cfg = _cfg(seed)
    pd = compute_post_dominators(cfg)
    for b in cfg.nodes:
        succ = cfg.succ[b]
        if len(succ) != 2 or succ[0] == succ[1]:
            continue
        u0 = unique_blocks(cfg, pd, b, succ[0])
        u1 = unique_blocks(cfg, pd, b, succ[1])
        assert not u0 & u1
        assert pd.ipostdom[b] not in u0 | u1
        assert EXIT not in u0 | u1


def test_motivating_classification():
    p = bundled_program("motivating")
    c = classify_pointers(p)
    # p is indexed by gep in both functions; every allocation that flows there is SEQ
    assert c.kind[Location("main", "entry", 3)] == PointerKind.SEQ
    assert unsafe_sites(p, c) == {
        Location("f", "BB2", 0),
        Location("f", "BB5", 1),
        Location("main", "check", 0),
    }


def test_motivating_expansion_scores():
    a = ProgramAnalysis(bundled_program("motivating"))
    assert a.successor_score("f", "BB1", "BB2") == 1
    assert a.successor_score("f", "BB1", "BB3") == 0
    assert a.successor_score("f", "BB3", "BB5") == 1
    assert a.successor_score("f", "BB3", "BB4") == 0
    assert a.successor_score("main", "entry", "check") == 1


def test_exp_score_counts_sites_in_blocks():
    unsafe = frozenset({Location("f", "A", 0), Location("f", "A", 2), Location("g", "A", 0), Location("f", "B", 1)})
    assert exp_score({"A"}, unsafe, "f") == 2
    assert exp_score({"A", "B"}, unsafe) == 4
    assert exp_score(set(), unsafe) == 0


def test_cast_makes_origin_dynamic():
    text = (
        "func main() {\nentry:\n  alloc a, 4\n  cast b, a\n  load v, b\n  alloc c, 1\n  load w, c\n  exit\n}\n"
    )
    p = parse_program(text)
    c = classify_pointers(p)
    assert c.kind[Location("main", "entry", 0)] == PointerKind.DYN
    assert c.kind[Location("main", "entry", 3)] == PointerKind.SAFE
    assert unsafe_sites(p, c) == {Location("main", "entry", 2)}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(-(2**31), 2**31 - 1), min_size=8, max_size=8))
def test_classification_covers_concrete_pointer_flows(seed, inputs):
    # any definition that concretely reaches a gep (cast) must be SEQ (DYN) or worse
    text, _ = gen_program(random.Random(seed), CorpusSpec())
    p = parse_program(text)
    kind = classify_pointers(p).kind
    res = replay(p, inputs)
    for loc in res.gep_origins:
        assert kind[loc] >= PointerKind.SEQ
    for loc in res.cast_origins:
        assert kind[loc] == PointerKind.DYN
