"""CTL layer: syntax, normal form, labels and the recursive checker."""

import random

import pytest

from counterctl import ctl as C
from counterctl.core import (
    OVER,
    PRECISE,
    UNDER,
    ApproxLabel,
    Budget,
    BudgetExceededPrecise,
    LabelConflict,
    lattice_join,
    lattice_negate,
)
from counterctl.oracle import ctl_ids
from counterctl.presburger import TRUE, ParseError, mk_and
from helpers import f, running_example, same
from randsys import ids_of, random_atom, random_system, reachable_graph, restrict_ids


@pytest.fixture(scope="module")
def P():
    return C.prepare(running_example())


# --------------------------------------------------------------------------
# syntax


def test_parse_eg():
    psi = C.parse_property("EG (x < 10)")
    assert isinstance(psi, C.EG) and isinstance(psi.arg, C.Prop)
    assert same(psi.arg.formula, f("x < 10"))


def test_parse_until_and_nesting():
    psi = C.parse_property("A[x >= 0 U EX (x = 3)]")
    assert isinstance(psi, C.AU) and isinstance(psi.rhs, C.EX)
    psi = C.parse_property("E[true U !EG x < 4]")
    assert isinstance(psi, C.EU) and isinstance(psi.rhs, C.CNot)


def test_precedence():
    psi = C.parse_property("EX x = 1 && EF x = 2 -> AG x >= 0 || AF x = 9")
    assert isinstance(psi, C.CImplies)
    assert isinstance(psi.lhs, C.CAnd) and isinstance(psi.rhs, C.COr)


def test_state_formulas_stay_props():
    # arithmetic in parentheses is a state formula, not a sub-property
    psi = C.parse_property("(x + 1) * 2 <= 8 && q = 0")
    assert isinstance(psi, C.Prop)
    assert same(psi.formula, f("2 * x + 2 <= 8 && q = 0"))


@pytest.mark.parametrize("text", ["EG", "x < 3 U x > 4", "E[x < 3 x > 4]", "EG (x < )", "x < EX 3"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        C.parse_property(text)


def test_str_round_trips():
    for text in ["EG (x < 10)", "A[x >= 0 U x = 3]", "!(EX (x = 1)) || AG (x >= 0)", "EF (x = 2) -> AF (x = 9)"]:
        psi = C.parse_property(text)
        assert C.parse_property(str(psi)) == psi


# --------------------------------------------------------------------------
# normal form


def test_enf_only_uses_existential_operators():
    psi = C.parse_property("AG (x >= 0) && A[x < 5 U AX x = 3] -> AF EF x = 1")
    seen = []

    def walk(p):
        seen.append(type(p))
        for k in ("arg", "lhs", "rhs"):
            if hasattr(p, k):
                walk(getattr(p, k))

    walk(C.to_enf(psi))
    assert set(seen) <= set(C.ENF_TYPES)


def _ax(G, a):
    return {i for i in range(len(G)) if all(j in a for j in G.succ[i])}


def _af(G, a):
    z = set(a)
    while True:
        nxt = z | {i for i in range(len(G)) if G.succ[i] and all(j in z for j in G.succ[i])}
        if nxt == z:
            return z
        z = nxt


def _ag(G, a):
    z = set(a)
    while True:
        nxt = {i for i in z if all(j in z for j in G.succ[i])}
        if nxt == z:
            return z
        z = nxt


def _au(G, a, b):
    z = set(b)
    while True:
        nxt = z | {i for i in a if G.succ[i] and all(j in z for j in G.succ[i])}
        if nxt == z:
            return z
        z = nxt


@pytest.mark.parametrize("seed", range(10))
def test_enf_matches_universal_semantics(seed):
    rng = random.Random(seed)
    M = random_system(rng, max_counters=2, max_transitions=4)
    Mc, G = reachable_graph(M)
    p = C.Prop(random_atom(rng, list(M.counters)))
    q = C.Prop(random_atom(rng, list(M.counters)))
    a, b = ctl_ids(G, p), ctl_ids(G, q)
    assert ctl_ids(G, C.to_enf(C.AX(p))) == _ax(G, a)
    assert ctl_ids(G, C.to_enf(C.AF(p))) == _af(G, a)
    assert ctl_ids(G, C.to_enf(C.AG(p))) == _ag(G, a)
    assert ctl_ids(G, C.to_enf(C.AU(p, q))) == _au(G, a, b)
    assert ctl_ids(G, C.to_enf(C.CAnd(C.EX(p), q))) == ctl_ids(G, C.EX(p)) & b
    assert ctl_ids(G, C.to_enf(C.CImplies(C.EX(p), q))) == (set(range(len(G))) - ctl_ids(G, C.EX(p))) | b


# --------------------------------------------------------------------------
# labels


def test_lattice_join():
    assert lattice_join(PRECISE, UNDER) is UNDER
    assert lattice_join(OVER, PRECISE) is OVER
    assert lattice_join(UNDER, UNDER) is UNDER
    assert lattice_join(PRECISE, PRECISE) is PRECISE
    with pytest.raises(LabelConflict):
        lattice_join(UNDER, OVER)


def test_lattice_negate_and_order():
    assert lattice_negate(UNDER) is OVER and lattice_negate(OVER) is UNDER
    assert lattice_negate(PRECISE) is PRECISE
    assert PRECISE.leq(UNDER) and PRECISE.leq(OVER) and not UNDER.leq(OVER)
    assert ApproxLabel.parse(" Over ") is OVER


# --------------------------------------------------------------------------
# checking


def test_eg_running_example(P):
    for label in (PRECISE, UNDER, OVER):
        r = C.sat(P, C.parse_property("EG (x < 10)"), label)
        assert r.label is PRECISE
        assert same(r.formula, f("q = 0 && x >= 0 && x < 5"))


def test_engine_choice_for_precise(P):
    a = C.sat(P, C.parse_property("EG (x < 10)"), engine="under")
    b = C.sat(P, C.parse_property("EG (x < 10)"), engine="over")
    assert same(a.formula, b.formula)
    assert a.stats.flattenings_explored > 0 and b.stats.iterations > 0


def test_true_is_reach(P):
    r = C.sat(P, C.parse_property("true"))
    assert r.label is PRECISE and same(r.formula, f("q = 0 && x >= 0 && x <= 100"))
    assert r.stats.reach_tag == "exact"


def test_negated_eg(P):
    r = C.sat(P, C.parse_property("!EG (x < 10)"))
    assert same(r.formula, f("q = 0 && x >= 5 && x <= 100"))


def test_af_running_example(P):
    r = C.sat(P, C.parse_property("AF (x >= 50)"))
    assert r.label is PRECISE and same(r.formula, f("q = 0 && x >= 5 && x <= 100"))


def test_ex_and_eu(P):
    assert same(C.sat(P, C.parse_property("EX (x <= 2)")).formula, f("q = 0 && x >= 0 && x <= 3"))
    r = C.sat(P, C.parse_property("E[x < 50 U x = 50]"))
    assert same(r.formula, f("q = 0 && x >= 0 && x <= 50"))


def test_compute_until(P):
    # the raw routine also covers the added dead control, so look at q = 0
    r = C.compute_until(P, f("x < 50"), f("x = 50"))
    assert r.label is PRECISE
    assert same(mk_and(r.formula, f("q = 0")), f("q = 0 && x >= 0 && x <= 50"))
    # only phi1 states may be crossed, so nothing below 50 gets in here
    r = C.compute_until(P, f("x > 60"), f("x = 50"))
    assert same(mk_and(r.formula, f("q = 0")), f("q = 0 && x = 50"))


def test_compute_global(P):
    for label in (PRECISE, UNDER, OVER):
        r = C.compute_global(P, f("x < 10"), label)
        assert r.label is PRECISE
        assert same(r.formula, f("q = 0 && x >= 0 && x < 5"))


def test_dead_control_is_not_reported(P):
    # stuck completion adds a control; results only speak about real ones
    r = C.sat(P, C.parse_property("EG true"))
    assert same(r.formula, f("q = 0 && x >= 0 && x <= 100"))


def test_check_shortcut():
    r = C.check(running_example(), C.parse_property("EG (x < 10)"))
    assert r.label is PRECISE and same(r.formula, f("q = 0 && x >= 0 && x < 5"))


def test_precise_with_no_time_left_raises():
    # backwards from x = 0 the step x' = x + y gives x = -n * y for every n,
    # which no finite union describes, so pre* never converges
    from counterctl.system import make_system

    M = make_system([0], ["x", "y"], [("add", 0, 0, TRUE, f("x' = x + y"))], init=TRUE)
    P = C.prepare(M, Budget(wall_clock=5))
    with pytest.raises(BudgetExceededPrecise):
        C.sat(P, C.parse_property("EF (x = 0)"), PRECISE, Budget(wall_clock=0.5))
    # an under request gets the partial answer instead
    r = C.sat(P, C.parse_property("EF (x = 0)"), UNDER, Budget(wall_clock=0.5))
    assert r.label is UNDER


@pytest.mark.parametrize("seed", range(12))
def test_labels_are_sound_under_tiny_budgets(seed):
    rng = random.Random(seed)
    from randsys import random_ctl

    M = random_system(rng, max_counters=2, max_transitions=4)
    Mc, G = reachable_graph(M)
    P = C.prepare(M, Budget(wall_clock=20))
    psi = random_ctl(rng, M, 2)
    expected = restrict_ids(G, M, ctl_ids(G, C.to_enf(psi)))
    for label in (UNDER, OVER):
        r = C.sat(P, psi, label, Budget(wall_clock=0.05, max_iterations=1))
        assert r.label is PRECISE or r.label is label
        got = ids_of(G, M, r.formula)
        if r.label is UNDER:
            assert got <= expected
        elif r.label is OVER:
            assert got >= expected
        else:
            assert got == expected
