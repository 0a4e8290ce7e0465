"""Schedule-oracle properties: confluence and the two race theorems."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volta_mini import corpus
from volta_mini import symexpr as sx
from volta_mini.frontend import LaunchConfig, elaborate, parse_kernel
from volta_mini.ir import Addr, Load, Program, SetConst, Store, Sync
from volta_mini.numeric import Indeterminate, disjoint, eval_numeric
from volta_mini.oracle import (
    EnumerationLimit,
    enumerate_schedules,
    has_unchecked_race,
    reachable_deadlock,
    unchecked_races,
)
from volta_mini.pipeline import make_symbolic_inputs
from volta_mini.randprog import GenConfig, initial_memory, programs, random_program
from volta_mini.symexec import Machine, run, step, sync_mem

g = Addr("g", 0)


def prog(*threads, size=1, w=32):
    return Program(tuple(tuple(t) for t in threads), {"g": size}, w)


def canon_env(o):
    mem = frozenset((k, sx.canonicalize(v)) for k, v in o.shared.items())
    regs = tuple(frozenset((k, sx.canonicalize(v)) for k, v in r.items()) for r in o.regs)
    return mem, regs


# -- oracle examples -------------------------------------------------------------


def test_race_free_two_threads_single_final():
    p = prog(
        [SetConst("r", sx.ONE), Store(g, "r"), Sync(frozenset({0, 1}))],
        [Sync(frozenset({0, 1})), Load("s", g)],
    )
    outs = enumerate_schedules(p, {})
    assert [o.kind for o in outs] == ["final"]


def test_two_unsynced_stores_race():
    p = prog([SetConst("r", sx.ONE), Store(g, "r")], [SetConst("r", sx.ONE), Store(g, "r")])
    kinds = {o.kind for o in enumerate_schedules(p, {})}
    assert "race" in kinds
    # both orders of the conflicting pair occur in unchecked traces
    (pair,) = unchecked_races(p)
    assert pair.addr == g and {pair.a.tid, pair.b.tid} == {0, 1}


def test_softmax_n2_matches_round_robin():
    cfg = LaunchConfig(2, params={"N": 2})
    p = elaborate(parse_kernel(corpus.path("softmax_naive.mk").read_text()), cfg)
    init = make_symbolic_inputs({"x": 2})
    outs = enumerate_schedules(p, init)
    assert [o.kind for o in outs] == ["final"]
    assert canon_env(outs[0]) == canon_env(run(p, init))


def test_enumeration_limit():
    threads = [[SetConst("r", sx.ONE)] * 6 for _ in range(3)]
    with pytest.raises(EnumerationLimit):
        enumerate_schedules(prog(*threads), {}, limit=10)


def test_reachable_deadlock():
    A, B = frozenset({0, 1, 2}), frozenset({1, 2, 3})
    assert reachable_deadlock(prog([Sync(A)], [Sync(A)], [Sync(B)], [Sync(B)], w=4))
    assert not reachable_deadlock(prog([Sync(frozenset({0, 1}))], []))


# -- confluence and the race theorems on random programs ------------------------


def check_program(p):
    init = initial_memory(p)
    outs = enumerate_schedules(p, init)
    kinds = {o.kind for o in outs}
    finals = [o for o in outs if o.kind == "final"]
    # confluence: never Final mixed with Race, and at most one canonical env
    assert not ("final" in kinds and "race" in kinds)
    assert len({canon_env(o) for o in finals}) <= 1
    if finals:
        assert kinds == {"final"}
    oracle_race = has_unchecked_race(p)
    checked_race = run(p, init).kind == "race"
    return oracle_race, checked_race, kinds


@settings(max_examples=300, deadline=None)
@given(programs())
def test_confluence_and_race_theorems(p):
    oracle_race, checked_race, kinds = check_program(p)
    assert oracle_race == checked_race
    assert ("race" in kinds) == checked_race


@settings(max_examples=100, deadline=None)
@given(programs())
def test_every_policy_finds_the_race(p):
    init = initial_memory(p)
    if not has_unchecked_race(p):
        return
    for sched in ("round-robin", "random:0", "random:1", "random:7"):
        assert run(p, init, sched).kind == "race"


def test_sound_direction_at_warp_size_three():
    # oracle race implies checked race holds for wider warps too
    cfg = GenConfig(warp_size=3)
    rng = random.Random(2024)
    for _ in range(1500):
        p = random_program(rng, cfg)
        if has_unchecked_race(p):
            assert run(p, initial_memory(p)).kind == "race"


def test_transitive_sync_chain_is_flagged():
    # t0 writes g then syncs with t1; t1 then syncs with t2, which reads g.
    # Every unchecked trace orders the write before the read through t1, so
    # there is no race by the trace definition, but the checked dynamics only
    # forgets pairs that synchronize directly and reports one.
    p = prog(
        [SetConst("r", sx.ONE), Store(g, "r"), Sync(frozenset({0, 1}))],
        [Sync(frozenset({0, 1})), Sync(frozenset({1, 2}))],
        [Sync(frozenset({1, 2})), Load("s", g)],
        w=3,
    )
    assert not has_unchecked_race(p)
    assert run(p, {}).kind == "race"


# -- maps commute with execution -------------------------------------------------


def _overlap(u, v):
    return not disjoint(u, v)


@settings(max_examples=150, deadline=None)
@given(programs(), st.randoms(use_true_random=False))
def test_symbolic_then_substitute_equals_concrete(p, rng):
    init = initial_memory(p)
    sym = run(p, init)
    if sym.kind != "final":
        return
    point = {v.value: sx.const(rng.randint(-3, 3)) for v in init.values()}
    conc = run(p, {k: point[v.value] for k, v in init.items()})
    if conc.kind != "final":
        return  # e.g. a denominator that vanishes at this point
    for k, e in sym.shared.items():
        got = conc.shared[k]
        assert not got.free_vars
        try:
            u = eval_numeric(e, {n: c.value for n, c in point.items()}, 128)
            v = eval_numeric(got, {}, 128)
        except Indeterminate:
            continue
        assert _overlap(u, v)
        if got.op == sx.CONST:
            assert sx.substitute(e, point) is got


# -- full-barrier clearing --------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(programs(GenConfig(max_threads=3, n_addrs=2)))
def test_full_barrier_clears_every_conflict(p):
    m = Machine.initial(p, initial_memory(p))
    for t in range(p.n):
        while m.status(t) == "runnable":
            if step(m, t) is not m:
                return
    ev = sync_mem(p.all_tids, m.mem_events)
    for e in ev.values():
        assert all(not s for s in e.readers.values())
        assert not e.writer[1]
