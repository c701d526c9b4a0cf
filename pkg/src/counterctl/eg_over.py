"""Shrinking over-approximation of EG(phi) through grow1/grow2.

``Y`` collects states proven to have no infinite trace inside ``phi``.
Internally the engine keeps the complement ``W`` (valid states not in
``Y``) per control, which is what every formula below is phrased over:

* grow1: states of ``W`` whose successors all lie in ``Y``;
* grow2: states of ``W`` that reach grow1 but never reach a state with two
  or more distinct successors in ``W``. Such a state follows a unique path
  inside ``W`` that ends in grow1, so every trace from it leaves ``phi``
  or gets stuck.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Optional

from .core import OVER, PRECISE, Budget, CheckResult, Stats
from .presburger import TRUE, Formula, LinearTerm, ResourceExhausted, gt, lt
from .presburger import dnf as D
from .reach import ControlGraph, pre_star_parts
from .system import (
    CounterSystem,
    Transition,
    enabled,
    join,
    pre_t,
    primed_map,
    refine,
    split,
    state_space,
)

log = logging.getLogger(__name__)

Parts = dict[int, D.Dnf]


@dataclass
class OverState:
    Y: Formula = TRUE
    iteration: int = 0
    expansions: int = 0
    history: list[dict[str, Any]] = field(default_factory=list)


def _valid(M1: CounterSystem) -> Parts:
    return split(M1, state_space(M1))


def _complement(M1: CounterSystem, Y: Formula) -> Parts:
    valid = _valid(M1)
    y = split(M1, Y)
    return {c: D.and_not(valid[c], y[c]) for c in M1.controls}


def _parts_pre(M1: CounterSystem, S: Parts) -> Parts:
    out: dict[int, list] = {c: [] for c in M1.controls}
    for t in M1.transitions:
        if S.get(t.target):
            out[t.source].append(pre_t(t, S[t.target]))
    return {c: D.disjoin(*ds) for c, ds in out.items()}


def grow1_parts(M1: CounterSystem, W: Parts) -> Parts:
    """States of ``W`` without a successor in ``W``."""
    pre = _parts_pre(M1, W)
    return {c: D.and_not(W[c], pre[c]) for c in M1.controls}


def _two_distinct(ti: Transition, tj: Transition, Wt: D.Dnf) -> D.Dnf:
    """States with a ``ti``-successor and a different ``tj``-successor, both in ``Wt``.

    Both transitions share source and target control.
    """
    xs = list(ti.counters)
    p1 = primed_map(xs, 1)
    p2 = primed_map(xs, 2)
    a = D.conjoin(ti.rel, D.rename(Wt, p1))
    b = D.conjoin(D.rename(tj.rel, {p1[x]: p2[x] for x in xs}), D.rename(Wt, p2))
    differ = D.disjoin(*(
        D.from_atoms(op(LinearTerm.var(p1[x]), LinearTerm.var(p2[x])))
        for x in xs for op in (lt, gt)
    ))
    body = D.conjoin(D.conjoin(a, b), differ)
    return D.exists(body, list(p1.values()) + list(p2.values()))


def not_atmost_one_parts(M1: CounterSystem, W: Parts) -> Parts:
    """States with at least two distinct successors in ``W``."""
    out: dict[int, list] = {c: [] for c in M1.controls}
    ts = M1.transitions
    for i, ti in enumerate(ts):
        for tj in ts[i:]:
            if ti.source != tj.source:
                continue
            if ti.target != tj.target:
                if W.get(ti.target) and W.get(tj.target):
                    out[ti.source].append(D.conjoin(pre_t(ti, W[ti.target]), pre_t(tj, W[tj.target])))
                continue
            if ti is tj and ti.updates is not None:
                continue  # a functional transition has one successor
            if W.get(ti.target):
                out[ti.source].append(_two_distinct(ti, tj, W[ti.target]))
    return {c: D.disjoin(*ds) for c, ds in out.items()}


def grow1(M1: CounterSystem, Y: Formula) -> Formula:
    """Valid states outside ``Y`` whose successors all lie in ``Y``."""
    return join(grow1_parts(M1, _complement(M1, Y)))


def atmost_one_succ_outside(M1: CounterSystem, Y: Formula) -> Formula:
    """Valid states with at most one successor outside ``Y``."""
    bad = not_atmost_one_parts(M1, _complement(M1, Y))
    valid = _valid(M1)
    return join({c: D.and_not(valid[c], bad[c]) for c in M1.controls})


def grow2_parts(M1: CounterSystem, W: Parts, g1: Parts, budget: Budget) -> Parts:
    """``W`` states reaching ``g1`` but no state with two successors in ``W``.

    Both pre* queries must converge; otherwise nothing is added this round.
    """
    empty = {c: D.DNF_FALSE for c in M1.controls}
    if not any(g1.values()):
        return empty
    G = ControlGraph.of(M1)
    bad = not_atmost_one_parts(M1, W)
    reach_bad = pre_star_parts(G, bad, budget)
    if not reach_bad.precise:
        return empty
    reach_g1 = pre_star_parts(G, g1, budget)
    if not reach_g1.precise:
        return empty
    return {
        c: D.and_not(D.conjoin(W[c], reach_g1.parts[c]), reach_bad.parts[c]) for c in M1.controls
    }


def grow2(M1: CounterSystem, Y: Formula, budget: Optional[Budget] = None) -> Formula:
    budget = (budget or Budget()).start()
    W = _complement(M1, Y)
    return join(grow2_parts(M1, W, grow1_parts(M1, W), budget))


def compute_global_over(
    M: CounterSystem,
    phi: Formula,
    budget: Optional[Budget] = None,
    reach: Optional[Formula] = None,
    state: Optional[OverState] = None,
) -> CheckResult:
    """Over-approximation of EG(``phi``) in ``M``, intersected with ``reach``.

    ``reach`` defaults to the system's reach hint when present. ``stats.iterations``
    counts evaluations of the loop guard; ``budget.max_iterations`` bounds
    the number of expansions of ``Y``.
    """
    budget = (budget or Budget()).start()
    state = state if state is not None else OverState()
    stats = Stats()
    t0 = time.monotonic()
    if reach is None:
        reach = M.reach_hint if M.reach_hint is not None else TRUE
    M1 = refine(M, phi)
    valid = _valid(M1)

    def finish(W: Parts, label):
        state.Y = join({c: D.and_not(valid[c], W.get(c, D.DNF_FALSE)) for c in M1.controls})
        r = split(M1, reach)
        stats.iterations = state.iteration
        stats.elapsed = time.monotonic() - t0
        stats.history = state.history
        stats.notes.append(f"expansions={state.expansions}")
        return CheckResult(join({c: D.conjoin(r[c], W[c]) for c in M1.controls}), label, stats)

    try:
        with budget.qe():
            ph = split(M1, phi)
            en = enabled(M1)
            W = {c: D.conjoin(D.conjoin(valid[c], ph[c]), en[c]) for c in M1.controls}
    except ResourceExhausted:
        # nothing proven yet: every valid phi state is still a candidate
        W = {c: D.conjoin(valid[c], split(M1, phi)[c]) for c in M1.controls}
        stats.notes.append("budget exhausted during initialisation")
        return finish(W, OVER)

    while True:
        if budget.expired():
            stats.notes.append("budget exhausted")
            return finish(W, OVER)
        state.iteration += 1
        try:
            with budget.qe():
                g1 = grow1_parts(M1, W)
                g2 = grow2_parts(M1, W, g1, budget)
                grow = {c: D.disjoin(g1[c], g2[c]) for c in M1.controls}
                nonempty = any(D.is_sat(d) for d in grow.values())
        except ResourceExhausted:
            stats.notes.append("budget exhausted")
            return finish(W, OVER)
        state.history.append(
            {
                "iteration": state.iteration,
                "grow1": g1,
                "grow2": g2,
                "W": dict(W),
                "Y": {c: D.and_not(valid[c], W[c]) for c in M1.controls},
            }
        )
        if not nonempty:
            return finish(W, PRECISE)
        if budget.iterations_exhausted(state.expansions):
            stats.notes.append("iteration limit reached")
            return finish(W, OVER)
        try:
            with budget.qe():
                W = {c: D.and_not(W[c], grow[c]) for c in M1.controls}
        except ResourceExhausted:
            stats.notes.append("budget exhausted")
            # W before this expansion is still a sound over-approximation
            return finish(W, OVER)
        state.expansions += 1
