"""Growing under-approximation of EG(phi) through flattenings.

Flattenings of the refined system are visited by increasing length. Each
one contributes the states with traces of every length inside it, plus
everything in it that reaches the current set. The search stops with a
precise answer once some flattening is shown to exhibit every trace of
the refined system from the states not yet collected.

Work is cached per connected component of a flattening: a flattening of
length k mostly consists of components already met at smaller lengths.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Optional

from .core import PRECISE, UNDER, Budget, CheckResult, Stats
from .flatten import (
    HOLDS,
    Flattening,
    component,
    enumerate_by_length,
    identity_flattening,
    root_needs,
    trace_inclusion_parts,
)
from .presburger import FALSE, Formula, ResourceExhausted
from .presburger import dnf as D
from .reach import NotAccelerable, forall_k_closure_dnf, pre_k_parts, pre_star_parts
from .system import CounterSystem, join, refine, split

log = logging.getLogger(__name__)

Parts = dict[int, D.Dnf]


@dataclass
class UnderState:
    X: Formula = FALSE
    flat_length: int = 0
    flattenings_explored: int = 0
    history: list[dict[str, Any]] = field(default_factory=list)


def _by_origin(G, parts: Parts) -> Parts:
    out: dict[int, list] = {}
    for loc, d in parts.items():
        if d:
            out.setdefault(G.origin[loc], []).append(d)
    return {o: D.disjoin(*ds) for o, ds in out.items()}


def _freeze(parts: Parts):
    return tuple(sorted((c, d) for c, d in parts.items() if d))


class _Engine:
    def __init__(self, M1: CounterSystem, phi_at: Parts, budget: Budget):
        self.M1 = M1
        self.phi_at = phi_at
        self.budget = budget
        self.closures: dict[Any, Optional[Parts]] = {}
        self.stars: dict[Any, Parts] = {}
        self.not_accelerable = 0

    def closure(self, form) -> Optional[Parts]:
        """States with traces of all lengths in one component; None if skipped."""
        if form not in self.closures:
            G = component(self.M1, form).graph
            try:
                with self.budget.qe():
                    pk = pre_k_parts(G, {loc: self.phi_at.get(G.origin[loc], D.DNF_FALSE) for loc in G.locations})
                    merged = _by_origin(G, pk)
                    self.closures[form] = {o: forall_k_closure_dnf(d) for o, d in merged.items()}
            except NotAccelerable as e:
                log.debug("skipping component: %s", e)
                self.not_accelerable += 1
                self.closures[form] = None
            except ResourceExhausted:
                if self.budget.expired():
                    raise
                self.closures[form] = None
        return self.closures[form]

    def pre_star(self, form, X: Parts) -> Parts:
        key = (form, _freeze(X))
        if key not in self.stars:
            G = component(self.M1, form).graph
            start = {loc: X.get(G.origin[loc], D.DNF_FALSE) for loc in G.locations}
            res = pre_star_parts(G, start, self.budget)
            # partial results are still genuine predecessors
            self.stars[key] = _by_origin(G, res.parts)
        return self.stars[key]


def _union(a: Parts, b: Parts) -> Parts:
    out = dict(a)
    for c, d in b.items():
        if not d:
            continue
        if c in out and out[c]:
            if D.entails(d, out[c]):
                continue
            out[c] = D.reduce(D.disjoin(out[c], d), semantic=True)
        else:
            out[c] = d
    return out


def _minus(phi_at: Parts, X: Parts) -> Parts:
    return {c: D.and_not(d, X[c]) if X.get(c) else d for c, d in phi_at.items()}


def compute_global_under(
    M: CounterSystem, phi: Formula, budget: Optional[Budget] = None, state: Optional[UnderState] = None
) -> CheckResult:
    """Under-approximation of EG(``phi``) in ``M`` (assumed stuck-free).

    ``budget.max_iterations`` bounds the number of flattenings processed and
    ``budget.max_flat_length`` their length. Returns ``precise`` only after
    a successful trace-inclusion check.
    """
    budget = (budget or Budget()).start()
    state = state if state is not None else UnderState()
    stats = Stats()
    t0 = time.monotonic()

    def finish(X: Parts, label):
        state.X = join(X)
        stats.flattenings_explored = state.flattenings_explored
        stats.max_flat_length = state.flat_length
        stats.elapsed = time.monotonic() - t0
        stats.history = state.history
        return CheckResult(state.X, label, stats)

    M1 = refine(M, phi)
    try:
        with budget.qe():
            phi_at = {c: d for c, d in split(M1, phi).items()}
    except ResourceExhausted:
        return finish({}, UNDER)
    X: Parts = {}
    if not any(phi_at.values()):
        return finish(X, PRECISE)
    eng = _Engine(M1, phi_at, budget)

    pending: dict[Any, tuple] = {}  # phi - X and its root needs, for the current X

    def check(G) -> bool:
        key = _freeze(X)
        if key not in pending:
            try:
                with budget.qe():
                    rest = _minus(phi_at, X)
            except ResourceExhausted:
                return False
            needs = root_needs(M1, rest, budget)
            if needs is None:
                return False
            pending.clear()
            pending[key] = (rest, needs)
        rest, needs = pending[key]
        return trace_inclusion_parts(M1, G, rest, budget, needs) == HOLDS

    # the empty flattening: every phi state is stuck in M1
    empty = Flattening(M1, {}, ())
    if check(empty.graph):
        return finish(X, PRECISE)

    def process(N: Flattening) -> bool:
        nonlocal X
        state.flat_length = N.length
        state.flattenings_explored += 1
        newX = dict(X)
        skipped = False
        for form in N.key:
            star = eng.pre_star(form, X)
            with budget.qe():
                newX = _union(newX, star)
        for form in N.key:
            cl = eng.closure(form)
            if cl is None:
                skipped = True
                continue
            with budget.qe():
                newX = _union(newX, cl)
        # X changes only once the whole flattening is processed
        X = newX
        if skipped:
            stats.not_accelerable = eng.not_accelerable
            state.history.append(_record(state, N, X, "skipped"))
            return False
        holds = check(N.graph)
        state.history.append(_record(state, N, X, "holds" if holds else "unknown"))
        return holds

    try:
        # a flat system is a flattening of itself, and one that keeps every trace
        own = identity_flattening(M1)
        if own is not None and process(own):
            stats.not_accelerable = eng.not_accelerable
            return finish(X, PRECISE)
        for N in enumerate_by_length(M1, budget.max_flat_length):
            if budget.expired() or budget.iterations_exhausted(state.flattenings_explored):
                stats.notes.append("budget exhausted")
                break
            if process(N):
                stats.not_accelerable = eng.not_accelerable
                return finish(X, PRECISE)
    except ResourceExhausted:
        stats.notes.append("budget exhausted")
    stats.not_accelerable = eng.not_accelerable
    return finish(X, UNDER)


def _record(state: UnderState, N: Flattening, X: Parts, check: str) -> dict[str, Any]:
    return {
        "flattening": state.flattenings_explored,
        "length": N.length,
        "shape": str(N),
        "X": X,
        "check": check,
    }
