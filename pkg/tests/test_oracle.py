"""Explicit-state oracle: exploration and CTL fixpoints on finite graphs."""

import random

import pytest

from counterctl import ctl as C
from counterctl.oracle import (
    CapExceeded,
    FiniteGraph,
    eg_ids,
    explore,
    oracle_ctl,
    oracle_eg,
    oracle_post_star,
    oracle_pre_k,
    oracle_pre_star,
)
from counterctl.presburger import FALSE, TRUE
from counterctl.system import complete_stuck, make_system
from helpers import f, running_example
from randsys import random_system, reachable_graph


def xs(states):
    return sorted(s["x"] for s in states)


@pytest.fixture(scope="module")
def G():
    return explore(running_example(), f("x = 0"), cap=1000)


def test_running_example_has_101_states(G):
    assert len(G) == 101
    assert xs(G.states) == list(range(101))
    assert G.complete


def test_explore_from_false_is_empty(running):
    assert len(explore(running, FALSE)) == 0


def test_chain_of_length_five():
    ts = [(f"t{i}", i, i + 1, TRUE, f("x' = x")) for i in range(5)]
    M = make_system(range(6), ["x"], ts, init=f("q = 0 && x = 0"))
    assert len(explore(M, M.init)) == 6


def test_cap_is_enforced(running):
    with pytest.raises(CapExceeded):
        explore(running, f("x = 0"), cap=10)


def test_eg_running_example(G):
    assert xs(oracle_ctl(G, C.EG(C.Prop(f("x < 10"))))) == [0, 1, 2, 3, 4]
    assert xs(oracle_eg(G, f("x < 10"))) == [0, 1, 2, 3, 4]


def test_eu_contains_its_target(G):
    target = f("x >= 40 && x <= 60")
    eu = oracle_ctl(G, C.EU(C.Prop(TRUE), C.Prop(target)))
    assert set(s for s in G.states if 40 <= s["x"] <= 60) <= eu


def test_eg_true_on_stuck_free_graph(running):
    Mc = complete_stuck(running)
    Gc = explore(Mc, Mc.init)
    assert oracle_eg(Gc, TRUE) == set(Gc.states)


def test_pre_k_hand_checked(G):
    # x=2 -> 3 -> 4 and x=4 -> 3 -> 4 / 4 -> 5 -> 4
    assert xs(oracle_pre_k(G, f("x = 4"), 2)) == [2, 4]


def test_pre_k_one_step_exact(G):
    # 5 -> 4 would need t1, which is disabled at 5
    assert xs(oracle_pre_k(G, f("x = 4"), 1)) == [3]


def test_pre_k_zero_is_the_set_itself(G):
    phi = f("x >= 7 && x <= 9")
    assert oracle_pre_k(G, phi, 0) == {s for s in G.states if 7 <= s["x"] <= 9}


def test_pre_star_running_example(G):
    assert xs(oracle_pre_star(G, f("x <= 4"))) == [0, 1, 2, 3, 4]


def test_post_star_running_example(G):
    assert xs(oracle_post_star(G, f("x = 0"))) == list(range(101))


def test_ctl_desugaring_is_honoured(G):
    af = oracle_ctl(G, C.AF(C.Prop(f("x >= 50"))))
    assert xs(af) == list(range(5, 101))  # below 5 the run can bounce forever


@pytest.mark.parametrize("seed", range(10))
def test_eg_is_the_limit_of_pre_k(seed):
    M = random_system(random.Random(seed), max_counters=2, max_transitions=4)
    _, G = reachable_graph(M)
    phi_ids = set(range(0, len(G), 2))
    eg = eg_ids(G, phi_ids)
    # states with a phi-path of every length up to |states|
    layer = set(phi_ids)
    for _ in range(len(G) + 1):
        layer = {i for i in phi_ids if any(j in layer for j in G.succ[i])}
    assert eg == layer


@pytest.mark.parametrize("seed", range(6))
def test_results_do_not_depend_on_order(seed):
    M = random_system(random.Random(seed), max_counters=2, max_transitions=4)
    _, G = reachable_graph(M)
    rng = random.Random(seed)
    perm = list(range(len(G)))
    rng.shuffle(perm)
    inv = {old: new for new, old in enumerate(perm)}
    states = [G.states[old] for old in perm]
    succ = [[inv[j] for j in reversed(G.succ[old])] for old in perm]
    H = FiniteGraph(G.system, states, {s: i for i, s in enumerate(states)}, succ)
    psi = C.EG(C.COr(C.Prop(f("x <= 10")), C.EX(C.Prop(f("x >= 3")))))
    assert oracle_ctl(G, psi) == oracle_ctl(H, psi)
    assert oracle_pre_star(G, f("x = 2")) == oracle_pre_star(H, f("x = 2"))
