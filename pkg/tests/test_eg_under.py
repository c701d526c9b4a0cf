"""EG by enumerating flattenings (under-approximation)."""

import random

import pytest

from counterctl import ctl as C
from counterctl.core import PRECISE, UNDER, Budget
from counterctl.eg_under import UnderState, compute_global_under
from counterctl.oracle import eg_ids
from counterctl.presburger import FALSE, TRUE, entails
from counterctl.system import complete_stuck, join, make_system, refine
from helpers import f, same
from randsys import ids_of, random_system, reachable_graph, restrict_ids


@pytest.fixture(scope="module")
def prepared():
    from helpers import running_example

    return C.prepare(running_example())


def test_running_example(prepared):
    r = compute_global_under(prepared.system, f("x < 10"), Budget(wall_clock=10))
    assert r.label is PRECISE
    assert same(r.formula, f("q = 0 && x >= 0 && x < 5"))
    assert r.stats.max_flat_length == 2
    assert r.stats.flattenings_explored == 8


def test_history_ends_with_the_certifying_flattening(prepared):
    r = compute_global_under(prepared.system, f("x < 10"))
    checks = [h["check"] for h in r.stats.history]
    assert checks[-1] == "holds" and set(checks[:-1]) == {"unknown"}


def test_false_is_immediately_precise(prepared):
    r = compute_global_under(prepared.system, FALSE)
    assert r.label is PRECISE and same(r.formula, FALSE)
    assert r.stats.flattenings_explored == 0


def test_all_stuck_is_immediately_precise():
    # phi never enables a transition: the empty flattening already certifies
    M = complete_stuck(make_system([0], ["x"], [("t", 0, 0, f("x >= 5"), f("x' = x + 1"))]))
    r = compute_global_under(M, f("q = 0 && x < 5"))
    assert r.label is PRECISE and same(r.formula, FALSE)


def test_self_loop_with_stable_counter():
    M = complete_stuck(make_system([0], ["x"], [("t", 0, 0, f("x >= 0 && x <= 7"), f("x' = x"))]))
    r = compute_global_under(M, f("q = 0"))
    assert r.label is PRECISE
    assert same(r.formula, f("q = 0 && x >= 0 && x <= 7"))


def test_iteration_budget_gives_under(prepared):
    r = compute_global_under(prepared.system, f("x < 10"), Budget(max_iterations=3))
    assert r.label is UNDER
    assert entails(r.formula, f("q = 0 && x >= 0 && x < 5"))


def test_x_grows_monotonically_inside_phi(prepared):
    phi = f("x < 10")
    state = UnderState()
    compute_global_under(prepared.system, phi, state=state)
    prev = FALSE
    for h in state.history:
        X = join(h["X"])
        assert entails(prev, X)
        assert entails(X, phi)
        prev = X


def test_state_records_progress():
    # the caller-supplied state tracks how far the enumeration got
    from helpers import running_example

    P = C.prepare(running_example())
    state = UnderState()
    first = compute_global_under(P.system, f("x < 10"), Budget(max_iterations=5), state=state)
    assert first.label is UNDER
    assert state.flattenings_explored == 5


@pytest.mark.parametrize("seed", range(16))
def test_under_against_oracle(seed):
    rng = random.Random(seed)
    M = random_system(rng, max_counters=2, max_transitions=4)
    Mc, G = reachable_graph(M)
    P = C.prepare(M, Budget(wall_clock=20))
    phi = rng.choice([f("x <= 12"), f("x >= 2"), TRUE, f("q = 0 || x <= 4")])
    r = compute_global_under(P.system, phi, Budget(wall_clock=15))
    expected = restrict_ids(G, M, eg_ids(G, ids_of(G, Mc, phi)))
    # the under engine reports every state of P.system; compare on reachable ones
    got = ids_of(G, M, r.formula)
    assert got <= expected
    if r.label is PRECISE:
        assert got == expected


def test_refinement_is_applied_inside(prepared):
    # running the engine on the refined system gives the same answer
    phi = f("x < 10")
    a = compute_global_under(prepared.system, phi)
    b = compute_global_under(refine(prepared.system, phi), phi)
    assert same(a.formula, b.formula) and a.label is b.label is PRECISE


def test_flat_system_is_tried_as_a_whole():
    # the system itself is a flattening keeping all traces, so one step suffices
    M = complete_stuck(
        make_system(
            [0, 1],
            ["x"],
            [("a", 0, 0, f("x < 7"), f("x' = x + 1")), ("b", 0, 1, f("x >= 3"), f("x' = 0")), ("c", 1, 1, f("x <= 4"), f("x' = x + 2"))],
        )
    )
    r = compute_global_under(M, f("x <= 5"))
    assert r.label is PRECISE and r.stats.flattenings_explored == 1
