"""Counter systems: transitions, one-step images, refinement, stuck states.

A transition stores its guard and action twice: as user-facing formulas
(with ``q = source`` and ``q' = target`` conjoined) and as a DNF relation
over counters only, with the control variable already fixed. The image
functions on single transitions work on the latter, so callers that track
control locations explicitly (``reach``, flattenings) never pay for
eliminating ``q``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

from .presburger import (
    CONTROL,
    TRUE,
    LinearTerm,
    conj,
    disj,
    entails,
    eq,
    free_vars,
    ge,
    primed,
)
from .presburger import dnf as D
from .presburger.formula import EQ, LE, Formula
from .presburger.qe import evaluate, from_dnf, to_dnf

log = logging.getLogger(__name__)

REACH_TAGS = ("exact", "over", "under", "absent")


class SystemValidationError(ValueError):
    """Malformed counter system (bad variables, unbounded branching, ...)."""


@dataclass(frozen=True)
class StateVector:
    control: int
    counters: tuple[tuple[str, int], ...]

    @classmethod
    def of(cls, control: int, **values: int) -> "StateVector":
        return cls(control, tuple(values.items()))

    def __getitem__(self, name: str) -> int:
        if name == CONTROL:
            return self.control
        for k, v in self.counters:
            if k == name:
                return v
        raise KeyError(name)

    def env(self) -> dict[str, int]:
        out = dict(self.counters)
        out[CONTROL] = self.control
        return out

    def __str__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.counters)
        return f"<q={self.control}; {inner}>"


@dataclass(frozen=True, eq=False)
class Transition:
    id: str
    source: int
    target: int
    guard: Formula
    action: Formula
    # counters-only views with q fixed; filled by make_transition
    guard_c: D.Dnf = field(repr=False, default=D.DNF_TRUE)
    rel: D.Dnf = field(repr=False, default=D.DNF_TRUE)
    # x' = term(x) for every counter when the action is functional
    updates: Optional[tuple[tuple[str, LinearTerm], ...]] = field(repr=False, default=None)
    counters: tuple[str, ...] = field(repr=False, default=())

    @property
    def is_functional(self) -> bool:
        return self.updates is not None

    def update_map(self) -> dict[str, LinearTerm]:
        assert self.updates is not None
        return dict(self.updates)

    def with_guard(self, extra: Formula) -> "Transition":
        return make_transition(
            self.id, self.source, self.target, conj(self.guard, extra), self.action, self.counters,
            _user_action=False,
        )


def _counter_only(d: D.Dnf, source: int, target: Optional[int]) -> D.Dnf:
    mapping = {CONTROL: LinearTerm.constant(source)}
    if target is not None:
        mapping[primed(CONTROL)] = LinearTerm.constant(target)
    return D.substitute(d, mapping)


def _branch_ok(c: D.Conj, counters: Sequence[str]) -> bool:
    """Every primed counter pinned by a unit equality or boxed by two bounds
    in which it is the only primed variable."""
    pset = {primed(x) for x in counters}
    for x in counters:
        px = primed(x)
        has_lo = has_hi = False
        for a in c:
            k = a.term.coeff(px)
            if not k:
                continue
            others = (a.term.variables & pset) - {px}
            if others:
                continue
            if a.kind == EQ:
                has_lo = has_hi = True
            elif a.kind == LE:
                if k > 0:
                    has_hi = True
                else:
                    has_lo = True
        if not (has_lo and has_hi):
            return False
    return True


def _functional_updates(rel: D.Dnf, counters: Sequence[str]):
    if len(rel) != 1:
        return None
    (c,) = rel
    pset = {primed(x) for x in counters}
    ups = {}
    for a in c:
        if a.kind != EQ:
            return None
        pv = [v for v in a.term.variables if v in pset]
        if len(pv) != 1:
            return None
        k = a.term.coeff(pv[0])
        if abs(k) != 1:
            return None
        rest = a.term.without(pv[0])
        # k*x' + rest = 0  ->  x' = -rest/k
        ups[pv[0][:-1]] = rest.scale(-k)
    if set(ups) != set(counters):
        return None
    return tuple((x, ups[x]) for x in counters)


def make_transition(
    id: str,
    source: int,
    target: int,
    guard: Formula,
    action: Formula,
    counters: Sequence[str],
    _user_action: bool = True,
) -> Transition:
    """Build a transition, conjoining ``q = source`` and ``q' = target``.

    Primed counters that the action does not mention keep their value.
    Raises :class:`SystemValidationError` when a variable is unknown or the
    action does not bound every primed counter.
    """
    counters = tuple(counters)
    allowed = set(counters) | {CONTROL}
    bad = free_vars(guard) - allowed
    if bad:
        raise SystemValidationError(f"transition {id}: guard mentions unknown {sorted(bad)}")
    allowed_act = allowed | {primed(v) for v in allowed}
    bad = free_vars(action) - allowed_act
    if bad:
        raise SystemValidationError(f"transition {id}: action mentions unknown {sorted(bad)}")
    if _user_action:
        if primed(CONTROL) in free_vars(action):
            raise SystemValidationError(f"transition {id}: action must not constrain q'")
        mentioned = free_vars(action)
        idents = [eq(primed(x), x) for x in counters if primed(x) not in mentioned]
        action = conj(action, *idents, eq(primed(CONTROL), target))
        guard = conj(guard, eq(CONTROL, source))
    g = guard
    guard_c = _counter_only(to_dnf(g), source, None)
    rel = D.conjoin(guard_c, _counter_only(to_dnf(action), source, target))
    for c in rel:
        if not _branch_ok(c, counters):
            raise SystemValidationError(
                f"transition {id}: action must fix or bound every primed counter"
            )
    return Transition(
        id=id,
        source=source,
        target=target,
        guard=g,
        action=action,
        guard_c=guard_c,
        rel=rel,
        updates=_functional_updates(_counter_only(to_dnf(action), source, target), counters),
        counters=counters,
    )


@dataclass(frozen=True)
class CounterSystem:
    controls: tuple[int, ...]
    counters: tuple[str, ...]
    transitions: tuple[Transition, ...]
    init: Formula = TRUE
    reach_hint: Optional[Formula] = None
    reach_tag: str = "absent"
    nat: tuple[str, ...] = ()

    def __post_init__(self):
        cs = set(self.controls)
        for t in self.transitions:
            if t.source not in cs or t.target not in cs:
                raise SystemValidationError(f"transition {t.id} leaves the control set")
        if self.reach_tag not in REACH_TAGS:
            raise SystemValidationError(f"bad reach tag {self.reach_tag!r}")
        if CONTROL in self.counters:
            raise SystemValidationError("'q' is reserved for the control state")
        bad = free_vars(self.init) - set(self.counters) - {CONTROL}
        if bad:
            raise SystemValidationError(f"init mentions unknown {sorted(bad)}")
        if self.reach_tag == "exact" and not entails(self.init, self.reach_hint):
            raise SystemValidationError("an exact reach hint must contain every initial state")

    @property
    def variables(self) -> tuple[str, ...]:
        return (CONTROL,) + self.counters

    def transition(self, id: str) -> Transition:
        for t in self.transitions:
            if t.id == id:
                return t
        raise KeyError(id)

    def outgoing(self, control: int) -> list[Transition]:
        return [t for t in self.transitions if t.source == control]


def make_system(
    controls: Iterable[int],
    counters: Sequence[str],
    transitions: Iterable[tuple],
    init: Formula = TRUE,
    reach_hint: Optional[Formula] = None,
    reach_tag: str = "absent",
    nat: Iterable[str] = (),
) -> CounterSystem:
    """Convenience constructor from ``(id, src, tgt, guard, action)`` tuples.

    Counters listed in ``nat`` get ``x >= 0`` conjoined to init and guards.
    """
    counters = tuple(counters)
    nat = tuple(n for n in counters if n in set(nat))
    nonneg = conj(*(ge(x, 0) for x in nat))
    ts = []
    for tid, src, tgt, g, a in transitions:
        ts.append(make_transition(tid, src, tgt, conj(g, nonneg), a, counters))
    if reach_hint is None and reach_tag != "absent":
        raise SystemValidationError("reach tag given without a formula")
    return CounterSystem(
        controls=tuple(sorted(set(controls))),
        counters=counters,
        transitions=tuple(ts),
        init=conj(init, nonneg),
        reach_hint=reach_hint,
        reach_tag=reach_tag if reach_hint is not None else "absent",
        nat=nat,
    )


# --------------------------------------------------------------------------
# helpers over counters-only DNFs


def primed_map(counters: Iterable[str], times: int = 1) -> dict[str, str]:
    return {x: primed(x, times) for x in counters}


def pre_t(t: Transition, s: D.Dnf) -> D.Dnf:
    """States at ``t.source`` with a ``t``-successor in ``s`` (counters only)."""
    if not s:
        return D.DNF_FALSE
    if t.updates is not None:
        return D.conjoin(t.guard_c, D.substitute(s, dict(t.updates)))
    sp = D.rename(s, primed_map(t.counters))
    return D.exists(D.conjoin(t.rel, sp), [primed(x) for x in t.counters])


def post_t(t: Transition, s: D.Dnf) -> D.Dnf:
    """Successors at ``t.target`` of states ``s`` at ``t.source``."""
    if not s:
        return D.DNF_FALSE
    d = D.exists(D.conjoin(t.rel, s), list(t.counters))
    return D.rename(d, {primed(x): x for x in t.counters})


def at_control(phi: Formula, control: int) -> D.Dnf:
    """``phi`` restricted to one control state, as a counters-only DNF."""
    return D.substitute(to_dnf(phi), {CONTROL: LinearTerm.constant(control)})


def split(M: CounterSystem, phi: Formula) -> dict[int, D.Dnf]:
    return {c: at_control(phi, c) for c in M.controls}


def join(parts: Mapping[int, D.Dnf]) -> Formula:
    pieces = []
    for c in sorted(parts):
        d = parts[c]
        if d:
            pieces.append(D.conjoin(D.from_atoms(eq(CONTROL, c)), d))
    return from_dnf(D.disjoin(*pieces))


# --------------------------------------------------------------------------
# operations


def refine(M: CounterSystem, phi: Formula) -> CounterSystem:
    """Conjoin ``phi`` into every guard; the reach hint is dropped."""
    ts = tuple(t.with_guard(phi) for t in M.transitions)
    return replace(M, transitions=ts, reach_hint=None, reach_tag="absent")


def pre_image(M: CounterSystem, phi: Formula) -> Formula:
    parts: dict[int, list] = {}
    cache: dict[int, D.Dnf] = {}
    for t in M.transitions:
        if t.target not in cache:
            cache[t.target] = at_control(phi, t.target)
        parts.setdefault(t.source, []).append(pre_t(t, cache[t.target]))
    return join({c: D.disjoin(*ds) for c, ds in parts.items()})


def post_image(M: CounterSystem, phi: Formula) -> Formula:
    parts: dict[int, list] = {}
    cache: dict[int, D.Dnf] = {}
    for t in M.transitions:
        if t.source not in cache:
            cache[t.source] = at_control(phi, t.source)
        parts.setdefault(t.target, []).append(post_t(t, cache[t.source]))
    return join({c: D.disjoin(*ds) for c, ds in parts.items()})


def state_space(M: CounterSystem) -> Formula:
    """Valid states: a declared control and nonnegative ``nat`` counters."""
    return conj(
        disj(*(eq(CONTROL, c) for c in M.controls)),
        *(ge(x, 0) for x in M.nat),
    )


def enabled(M: CounterSystem) -> dict[int, D.Dnf]:
    """Per control, the counter valuations where some transition is enabled."""
    out: dict[int, list] = {c: [] for c in M.controls}
    for t in M.transitions:
        out[t.source].append(t.guard_c)
    return {c: D.disjoin(*ds) for c, ds in out.items()}


def stuck_parts(M: CounterSystem) -> dict[int, D.Dnf]:
    nonneg = D.from_atoms(*(ge(x, 0) for x in M.nat)) if M.nat else D.DNF_TRUE
    return {c: D.and_not(nonneg, g) for c, g in enabled(M).items()}


def stuck_states(M: CounterSystem) -> Formula:
    """Valid states with no enabled transition."""
    return join(stuck_parts(M))


DEAD_PREFIX = "dead"


def complete_stuck(M: CounterSystem) -> CounterSystem:
    """Send every stuck state to a fresh control with a self-loop.

    The fresh control is ``max(controls) + 1``; counters keep their values.
    ``init`` is restricted to the original controls.
    """
    d = max(M.controls) + 1
    ident = TRUE
    ts = list(M.transitions)
    parts = stuck_parts(M)
    for c in M.controls:
        g = from_dnf(parts[c])
        ts.append(make_transition(f"{DEAD_PREFIX}{c}", c, d, g, ident, M.counters))
    ts.append(make_transition(f"{DEAD_PREFIX}_loop", d, d, TRUE, ident, M.counters))
    # init formulas may leave q free; keep them off the fresh control
    init = conj(M.init, disj(*(eq(CONTROL, c) for c in M.controls)))
    return replace(M, controls=M.controls + (d,), transitions=tuple(ts), init=init)


def is_step(M: CounterSystem, s: StateVector, t: StateVector) -> bool:
    return any(
        evaluate(tr.guard, s) and evaluate(tr.action, s, t) for tr in M.transitions
    )


@dataclass(frozen=True)
class TraceSample:
    system: CounterSystem = field(repr=False)
    states: tuple[StateVector, ...]

    def __post_init__(self):
        if not self.states:
            raise ValueError("a trace has at least one state")
        for a, b in zip(self.states, self.states[1:]):
            if not is_step(self.system, a, b):
                raise ValueError(f"no transition from {a} to {b}")
