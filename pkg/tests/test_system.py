"""Counter systems: construction, images, refinement, stuck completion."""

import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from counterctl.oracle import explore, successors
from counterctl.presburger import FALSE, TRUE, entails, evaluate, mk_and, mk_or
from counterctl.system import (
    StateVector,
    SystemValidationError,
    TraceSample,
    complete_stuck,
    is_step,
    make_system,
    post_image,
    pre_image,
    refine,
    stuck_states,
)
from helpers import f, same, system
from randsys import random_system


def guards(M):
    return {t.id: t.guard for t in M.transitions}


# --------------------------------------------------------------------------
# refinement


def test_refine_reproduces_refined_running_example(running):
    M1 = refine(running, f("x < 10"))
    g = guards(M1)
    assert same(g["t0"], f("q = 0 && x >= 0 && x < 100 && x < 10"))
    assert same(g["t1"], f("q = 0 && x > 0 && x < 5 && x < 10"))


def test_refine_keeps_init_and_clears_hint(running):
    M = make_system([0], ["x"], [("t", 0, 0, f("x < 3"), f("x' = x + 1"))], init=f("x = 0"), reach_hint=f("x <= 3"), reach_tag="exact")
    M1 = refine(M, f("x > 0"))
    assert M1.init == M.init
    assert M1.reach_hint is None and M1.reach_tag == "absent"


def test_refine_true_is_identity_on_guards(running):
    M1 = refine(running, TRUE)
    for t, t1 in zip(running.transitions, M1.transitions):
        assert same(t.guard, t1.guard)


def test_refine_composes(running):
    a, b = f("x < 10"), f("x >= 2")
    left = refine(refine(running, a), b)
    right = refine(running, mk_and(a, b))
    for t, u in zip(left.transitions, right.transitions):
        assert same(t.guard, u.guard)


# --------------------------------------------------------------------------
# images


def test_pre_image_running_example(running):
    assert same(pre_image(running, f("x <= 2")), f("q = 0 && x >= 0 && x <= 3"))


def test_pre_and_post_of_false(running):
    assert same(pre_image(running, FALSE), FALSE)
    assert same(post_image(running, FALSE), FALSE)


def test_post_image_running_example(running):
    assert same(post_image(running, f("x = 0")), f("q = 0 && x = 1"))


def test_post_distributes_over_or(running):
    a, b = f("x = 0"), f("x >= 3 && x <= 6")
    assert same(post_image(running, mk_or(a, b)), mk_or(post_image(running, a), post_image(running, b)))


def _ids(G, phi):
    return {i for i, s in enumerate(G.states) if evaluate(phi, s)}


@pytest.mark.parametrize("seed", range(8))
def test_images_agree_with_successor_enumeration(seed):
    rng = random.Random(seed)
    M = complete_stuck(random_system(rng, max_counters=2, max_transitions=4))
    G = explore(M, M.init, box={x: (0, 3) for x in M.counters})
    phi = f(" || ".join(f"(q = {s.control} && " + " && ".join(f"{k} = {v}" for k, v in s.counters) + ")" for s in G.states[::3]) or "false")
    target = _ids(G, phi)
    pre = pre_image(M, phi)
    for i, s in enumerate(G.states):
        assert evaluate(pre, s) == any(j in target for j in G.succ[i])
    post = post_image(M, phi)
    expected = {j for i in target for j in G.succ[i]}
    for j in range(len(G.states)):
        if j in expected:
            assert evaluate(post, G.states[j])


# --------------------------------------------------------------------------
# stuck states


def test_stuck_states_running_example(running):
    assert same(stuck_states(running), f("q = 0 && (x < 0 || x >= 100)"))


def test_stuck_states_refined_running_example(running):
    assert same(stuck_states(refine(running, f("x < 10"))), f("q = 0 && (x < 0 || x >= 10)"))


def test_stuck_states_with_unconditional_transition():
    M = make_system([0], ["x"], [("t", 0, 0, TRUE, f("x' = x"))])
    assert same(stuck_states(M), FALSE)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_complete_stuck_leaves_no_stuck_state(seed):
    M = random_system(random.Random(seed), max_counters=2, max_transitions=4)
    assert same(stuck_states(complete_stuck(M)), FALSE)


def test_complete_stuck_gives_x100_one_successor(running):
    Mc = complete_stuck(running)
    s = StateVector.of(0, x=100)
    succ = successors(Mc, s)
    assert len(succ) == 1
    assert succ[0].control not in running.controls and succ[0]["x"] == 100


def test_complete_stuck_keeps_live_traces(running):
    Mc = complete_stuck(running)
    G = explore(running, running.init)
    Gc = explore(Mc, Mc.init)
    live = {s for s in Gc.states if s.control in running.controls}
    assert live == set(G.states)
    for s in G.states:
        if successors(running, s):
            assert set(successors(Mc, s)) == set(successors(running, s))


# --------------------------------------------------------------------------
# semantics, traces, validation


@pytest.mark.parametrize("seed", range(6))
def test_relation_matches_guard_and_action(seed):
    M = random_system(random.Random(seed), max_counters=2, max_transitions=4)
    rng = random.Random(seed)
    for _ in range(6):
        s = StateVector(rng.choice(M.controls), tuple((x, rng.randint(0, 30)) for x in M.counters))
        succ = set(successors(M, s))
        near = [sorted(set(range(s[x] - 3, s[x] + 4)) | set(range(0, 6)) | {s[y] for y in M.counters}) for x in M.counters]
        for q in M.controls:
            for vals in itertools.product(*near):
                t = StateVector(q, tuple(zip(M.counters, vals)))
                assert (t in succ) == is_step(M, s, t)


def _paths(M, start, length):
    """All state sequences of ``length`` states from ``start``."""
    out = [[start]]
    for _ in range(length - 1):
        out = [p + [n] for p in out for n in successors(M, p[-1])]
    return out


def test_refined_traces_are_traces(running):
    phi = f("x < 10")
    M1 = refine(running, phi)
    for x0 in range(0, 12):
        for p in _paths(M1, StateVector.of(0, x=x0), 5):
            TraceSample(running, tuple(p))


def test_traces_inside_phi_survive_refinement(running):
    phi = f("x < 10")
    M1 = refine(running, phi)
    for x0 in range(0, 12):
        for p in _paths(running, StateVector.of(0, x=x0), 5):
            if all(evaluate(phi, s) for s in p[:-1]):
                TraceSample(M1, tuple(p))  # the last state is unconstrained
            elif len(p) > 1:
                with pytest.raises(ValueError):
                    TraceSample(M1, tuple(p))


def test_trace_sample_rejects_non_steps(running):
    with pytest.raises(ValueError):
        TraceSample(running, (StateVector.of(0, x=0), StateVector.of(0, x=2)))
    with pytest.raises(ValueError):
        TraceSample(running, ())


def test_finite_branching_is_enforced():
    with pytest.raises(SystemValidationError):
        make_system([0], ["x"], [("t", 0, 0, TRUE, f("x' >= x"))])
    # bounded between two terms is fine
    M = make_system([0], ["x"], [("t", 0, 0, TRUE, f("x' >= x && x' <= x + 2"))])
    assert len(successors(M, StateVector.of(0, x=0))) == 3


def test_unknown_variables_are_rejected():
    with pytest.raises(SystemValidationError):
        make_system([0], ["x"], [("t", 0, 0, f("y > 0"), f("x' = x"))])
    with pytest.raises(SystemValidationError):
        make_system([0], ["x"], [("t", 0, 1, TRUE, f("x' = x"))])


def test_nat_counters_get_nonnegativity():
    M = system("nat counters x;\ncontrols 0..0;\ninit: true;\ntransition t from 0 to 0 action x' = x - 1;\n")
    assert entails(M.init, f("x >= 0"))
    assert entails(M.transitions[0].guard, f("x >= 0"))


def test_unlisted_counters_keep_their_value():
    M = system("counters x, y;\ncontrols 0..0;\ninit: true;\ntransition t from 0 to 0 action x' = x + 1;\n")
    assert successors(M, StateVector.of(0, x=1, y=7)) == [StateVector.of(0, x=2, y=7)]


def test_reach_hint_exact_must_contain_init():
    with pytest.raises(SystemValidationError):
        make_system([0], ["x"], [("t", 0, 0, TRUE, f("x' = x"))], init=f("x = 0"), reach_hint=f("x >= 1"), reach_tag="exact")
    # an under hint carries no such promise
    make_system([0], ["x"], [("t", 0, 0, TRUE, f("x' = x"))], init=f("x = 0"), reach_hint=f("x >= 1"), reach_tag="under")
