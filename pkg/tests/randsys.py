"""Random bounded counter systems and CTL properties for oracle comparison.

Guards confine every counter to [0, BOUND] before a step, so each step
leaves counters within a couple of units of that box and the reachable
graph stays small.
"""

from __future__ import annotations

import random

from counterctl import ctl as C
from counterctl.oracle import explore
from counterctl.presburger import (
    CONTROL,
    TRUE,
    LinearTerm,
    conj,
    disj,
    divides,
    eq,
    ge,
    le,
    primed,
)
from counterctl.system import CounterSystem, complete_stuck, make_system

BOUND = 30
NAMES = ("x", "y", "z")


def _var(n):
    return LinearTerm.var(n)


def random_atom(rng: random.Random, counters, controls=None):
    kind = rng.choice(["le", "ge", "eq", "sum", "div", "ctl"] if controls else ["le", "ge", "eq", "sum", "div"])
    x = rng.choice(counters)
    c = rng.randint(0, BOUND)
    if kind == "le":
        return le(x, c)
    if kind == "ge":
        return ge(x, c)
    if kind == "eq":
        return eq(x, rng.randint(0, 10))
    if kind == "sum" and len(counters) > 1:
        y = rng.choice([v for v in counters if v != x])
        return le(_var(x) - _var(y), rng.randint(-5, 5))
    if kind == "div":
        return divides(rng.choice([2, 3]), _var(x))
    if kind == "ctl" and controls:
        return eq(CONTROL, rng.choice(controls))
    return ge(x, c)


def random_action(rng: random.Random, counters):
    parts = []
    for x in counters:
        r = rng.random()
        if r < 0.45:
            parts.append(eq(primed(x), _var(x) + rng.choice([-2, -1, 1, 1, 2, 3])))
        elif r < 0.6:
            parts.append(eq(primed(x), rng.randint(0, 5)))
        elif r < 0.7 and len(counters) > 1:
            y = rng.choice([v for v in counters if v != x])
            parts.append(eq(primed(x), _var(y)))
        elif r < 0.78:
            # two possible successors
            parts.append(conj(ge(primed(x), _var(x)), le(primed(x), _var(x) + 1)))
        # otherwise x is unchanged (implicit)
    return conj(*parts) if parts else TRUE


def random_system(rng: random.Random, max_counters: int = 3, max_transitions: int = 6) -> CounterSystem:
    n = rng.randint(1, max_counters)
    counters = list(NAMES[:n])
    nctl = rng.randint(1, 3)
    controls = list(range(nctl))
    box = [conj(ge(x, 0), le(x, BOUND)) for x in counters]
    ts = []
    for i in range(rng.randint(1, max_transitions)):
        src, tgt = rng.choice(controls), rng.choice(controls)
        extra = [random_atom(rng, counters) for _ in range(rng.randint(0, 2))]
        guard = conj(*box, *extra)
        ts.append((f"t{i}", src, tgt, guard, random_action(rng, counters)))
    init = conj(eq(CONTROL, 0), *(conj(ge(x, 0), le(x, rng.randint(0, 3))) for x in counters))
    return make_system(controls, counters, ts, init=init)


def random_flat(rng: random.Random) -> CounterSystem:
    """A chain of controls, some carrying a translating self-loop."""
    n = rng.randint(2, 4)
    box = conj(ge("x", 0), le("x", 8), ge("y", 0), le("y", 8))
    ts = []
    for c in range(n):
        if rng.random() < 0.7:
            dx, dy = rng.choice([(1, 0), (0, 1), (1, -1), (-1, 2), (2, 1)])
            ts.append((f"l{c}", c, c, box, conj(eq(primed("x"), _var("x") + dx), eq(primed("y"), _var("y") + dy))))
        if c + 1 < n:
            step = rng.choice([eq(primed("x"), _var("x")), eq(primed("x"), _var("x") + 1), eq(primed("y"), 0)])
            ts.append((f"e{c}", c, c + 1, le("x", 9), step))
    return make_system(range(n), ["x", "y"], ts)


def random_ctl(rng: random.Random, M: CounterSystem, depth: int = 3):
    """Random property in the existential fragment, nesting depth <= ``depth``."""
    if depth == 0 or rng.random() < 0.2:
        a = random_atom(rng, list(M.counters), list(M.controls))
        if rng.random() < 0.3:
            a = disj(a, random_atom(rng, list(M.counters)))
        return C.Prop(a)
    op = rng.choice(["not", "or", "ex", "eu", "eg", "eg", "eu"])
    if op == "not":
        return C.CNot(random_ctl(rng, M, depth - 1))
    if op == "or":
        return C.COr(random_ctl(rng, M, depth - 1), random_ctl(rng, M, depth - 1))
    if op == "ex":
        return C.EX(random_ctl(rng, M, depth - 1))
    if op == "eu":
        return C.EU(random_ctl(rng, M, depth - 1), random_ctl(rng, M, depth - 1))
    return C.EG(random_ctl(rng, M, depth - 1))


def reachable_graph(M: CounterSystem):
    """Explicit graph of the stuck-completed system from its initial states."""
    Mc = complete_stuck(M)
    box = {x: (0, 3) for x in Mc.counters}
    return Mc, explore(Mc, Mc.init, box=box)


def restrict_ids(G, M: CounterSystem, ids):
    own = set(M.controls)
    return {i for i in ids if G.states[i].control in own}


def ids_of(G, M: CounterSystem, f) -> set[int]:
    from counterctl.oracle import holds

    own = set(M.controls)
    return {i for i, s in enumerate(G.states) if s.control in own and holds(f, s.env())}
