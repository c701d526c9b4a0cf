"""Explicit-state bounded model checker used as a test oracle.

Nothing here goes through the DNF engine: formulas are evaluated on their
syntax tree, and successor candidates come from interval propagation over
the atoms of each action. The symbolic engine and this module therefore
only share the formula AST and the system data structures.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .presburger.formula import (
    CONTROL,
    EQ,
    FALSE,
    LE,
    And,
    Atom,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    _Const,
    primed,
)
from .system import CounterSystem, StateVector

DEFAULT_CAP = 100_000
QUANT_WINDOW = 64


class CapExceeded(RuntimeError):
    pass


class Unbounded(ValueError):
    """A variable has no finite candidate range."""


def holds(f: Formula, env: dict) -> bool:
    """Truth value on the syntax tree.

    Quantified variables are enumerated over [-QUANT_WINDOW, QUANT_WINDOW];
    system formulas handed to the oracle are quantifier-free in practice.
    """
    if isinstance(f, Atom):
        return f.holds(env)
    if isinstance(f, _Const):
        return f.value
    if isinstance(f, And):
        return all(holds(a, env) for a in f.args)
    if isinstance(f, Or):
        return any(holds(a, env) for a in f.args)
    if isinstance(f, Not):
        return not holds(f.arg, env)
    if isinstance(f, Implies):
        return (not holds(f.lhs, env)) or holds(f.rhs, env)
    rng = range(-QUANT_WINDOW, QUANT_WINDOW + 1)
    if isinstance(f, Exists):
        return any(holds(f.body, {**env, f.var: v}) for v in rng)
    if isinstance(f, Forall):
        return all(holds(f.body, {**env, f.var: v}) for v in rng)
    raise TypeError(f)


def _signed_atoms(f: Formula, positive: bool = True):
    """Atoms with the polarity under which they occur."""
    if isinstance(f, Atom):
        yield f, positive
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from _signed_atoms(a, positive)
    elif isinstance(f, Not):
        yield from _signed_atoms(f.arg, not positive)
    elif isinstance(f, Implies):
        yield from _signed_atoms(f.lhs, not positive)
        yield from _signed_atoms(f.rhs, positive)


def candidate_box(f: Formula, unknowns: list[str], env: dict) -> dict[str, tuple[int, int]]:
    """Interval hull of the values ``unknowns`` can take in models of ``f``.

    Every atom contributes bounds for an unknown once the other unknowns in
    it are boxed. The hull is sound for formulas in which each disjunct
    bounds every unknown on both sides, which is exactly the
    finite-branching shape enforced on actions.
    """
    lo: dict[str, list[int]] = {u: [] for u in unknowns}
    hi: dict[str, list[int]] = {u: [] for u in unknowns}
    box: dict[str, tuple[int, int]] = {}
    atoms = []
    for a, pos in _signed_atoms(f):
        if a.kind == LE:
            t = a.term if pos else (-a.term + 1)
            atoms.append(("le", t))
        elif a.kind == EQ and pos:
            atoms.append(("eq", a.term))
    uset = set(unknowns)
    done: set = set()
    for _ in range(len(unknowns) + 1):
        progress = False
        for idx, (kind, t) in enumerate(atoms):
            vs = [v for v in t.variables if v in uset]
            if any(v not in uset and v not in env for v in t.variables):
                continue
            for u in vs:
                if (idx, u) in done:
                    continue
                others = [v for v in vs if v != u]
                if any(v not in box for v in others):
                    continue
                k = t.coeff(u)
                # k*u + rest <= 0 where rest ranges over an interval
                rest_lo = rest_hi = 0
                for v, c in t.coeffs:
                    if v == u:
                        continue
                    if v in uset:
                        a, b = box[v]
                        rest_lo += min(c * a, c * b)
                        rest_hi += max(c * a, c * b)
                    else:
                        rest_lo += c * env[v]
                        rest_hi += c * env[v]
                rest_lo += t.const
                rest_hi += t.const
                done.add((idx, u))
                progress = True
                if kind == "le":
                    if k > 0:
                        hi[u].append(math.floor(Fraction(-rest_lo, k)))
                    else:
                        lo[u].append(math.ceil(Fraction(rest_lo, -k)))
                else:
                    a_, b_ = sorted((Fraction(-rest_lo, k), Fraction(-rest_hi, k)))
                    lo[u].append(math.floor(a_))
                    hi[u].append(math.ceil(b_))
        for u in unknowns:
            if u not in box and lo[u] and hi[u]:
                box[u] = (min(lo[u]), max(hi[u]))
                progress = True
        if not progress:
            break
    # final hull over every collected bound
    out = {}
    for u in unknowns:
        if not lo[u] or not hi[u]:
            raise Unbounded(u)
        out[u] = (min(lo[u]), max(hi[u]))
    return out


@dataclass
class FiniteGraph:
    system: CounterSystem
    states: list[StateVector]
    index: dict[StateVector, int]
    succ: list[list[int]]
    complete: bool = True
    pred: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.pred:
            self.pred = [[] for _ in self.states]
            for i, ss in enumerate(self.succ):
                for j in ss:
                    self.pred[j].append(i)

    def __len__(self):
        return len(self.states)

    def ids(self, states: Iterable[StateVector]) -> set[int]:
        return {self.index[s] for s in states}

    def vectors(self, ids: Iterable[int]) -> set[StateVector]:
        return {self.states[i] for i in ids}

    def sat_ids(self, f: Formula) -> set[int]:
        return {i for i, s in enumerate(self.states) if holds(f, s.env())}


def _vec(M: CounterSystem, q: int, vals) -> StateVector:
    return StateVector(q, tuple(zip(M.counters, vals)))


def successors(M: CounterSystem, s: StateVector) -> list[StateVector]:
    env = s.env()
    out = []
    seen = set()
    pnames = [primed(x) for x in M.counters]
    for t in M.transitions:
        if t.source != s.control or not holds(t.guard, env):
            continue
        env2 = dict(env)
        env2[primed(CONTROL)] = t.target
        box = candidate_box(t.action, pnames, env2)
        ranges = [range(box[p][0], box[p][1] + 1) for p in pnames]
        for vals in itertools.product(*ranges):
            for p, v in zip(pnames, vals):
                env2[p] = v
            if holds(t.action, env2):
                n = _vec(M, t.target, vals)
                if n not in seen:
                    seen.add(n)
                    out.append(n)
    return out


def seed_states(
    M: CounterSystem, f: Formula, box: Optional[dict[str, tuple[int, int]]] = None
) -> list[StateVector]:
    """States satisfying ``f``, enumerated over an explicit box.

    Without ``box`` the counters' ranges are derived from ``f`` itself.
    """
    if f == FALSE:
        return []
    if box is None:
        box = candidate_box(f, list(M.counters), {})
    ranges = [range(box[x][0], box[x][1] + 1) for x in M.counters]
    out = []
    for q in M.controls:
        for vals in itertools.product(*ranges):
            s = _vec(M, q, vals)
            if holds(f, s.env()):
                out.append(s)
    return out


def explore(
    M: CounterSystem,
    start: Formula,
    cap: int = DEFAULT_CAP,
    box: Optional[dict[str, tuple[int, int]]] = None,
) -> FiniteGraph:
    """Forward closure of the states satisfying ``start``."""
    seeds = seed_states(M, start, box)
    index: dict[StateVector, int] = {}
    states: list[StateVector] = []
    succ: list[list[int]] = []
    queue = deque()
    for s in seeds:
        if s not in index:
            index[s] = len(states)
            states.append(s)
            succ.append([])
            queue.append(s)
    while queue:
        s = queue.popleft()
        i = index[s]
        for n in successors(M, s):
            if n not in index:
                if len(states) >= cap:
                    raise CapExceeded(f"more than {cap} states")
                index[n] = len(states)
                states.append(n)
                succ.append([])
                queue.append(n)
            succ[i].append(index[n])
    return FiniteGraph(M, states, index, succ, complete=True)


# --------------------------------------------------------------------------
# fixpoints over ids


def ex_ids(G: FiniteGraph, target: set[int]) -> set[int]:
    out = set()
    for j in target:
        out.update(G.pred[j])
    return out


def eu_ids(G: FiniteGraph, a: set[int], b: set[int]) -> set[int]:
    result = set(b)
    queue = deque(b)
    while queue:
        j = queue.popleft()
        for i in G.pred[j]:
            if i not in result and i in a:
                result.add(i)
                queue.append(i)
    return result


def eg_ids(G: FiniteGraph, a: set[int]) -> set[int]:
    # remove states of a without a successor in the current set
    z = set(a)
    count = {i: sum(1 for j in G.succ[i] if j in z) for i in z}
    queue = deque(i for i in z if count[i] == 0)
    while queue:
        i = queue.popleft()
        if i not in z:
            continue
        z.discard(i)
        for p in G.pred[i]:
            if p in z:
                count[p] -= 1
                if count[p] == 0:
                    queue.append(p)
    return z


def ctl_ids(G: FiniteGraph, psi) -> set[int]:
    from . import ctl as C

    if isinstance(psi, C.Prop):
        return G.sat_ids(psi.formula)
    if isinstance(psi, C.CNot):
        return set(range(len(G))) - ctl_ids(G, psi.arg)
    if isinstance(psi, C.COr):
        return ctl_ids(G, psi.lhs) | ctl_ids(G, psi.rhs)
    if isinstance(psi, C.EX):
        return ex_ids(G, ctl_ids(G, psi.arg))
    if isinstance(psi, C.EU):
        return eu_ids(G, ctl_ids(G, psi.lhs), ctl_ids(G, psi.rhs))
    if isinstance(psi, C.EG):
        return eg_ids(G, ctl_ids(G, psi.arg))
    # surface operators are desugared first
    return ctl_ids(G, C.to_enf(psi))


def oracle_ctl(G: FiniteGraph, psi) -> set[StateVector]:
    return G.vectors(ctl_ids(G, psi))


def oracle_pre_k(G: FiniteGraph, phi: Formula, k: int) -> set[StateVector]:
    layer = G.sat_ids(phi)
    for _ in range(k):
        layer = ex_ids(G, layer)
    return G.vectors(layer)


def oracle_pre_star(G: FiniteGraph, phi: Formula) -> set[StateVector]:
    return G.vectors(eu_ids(G, set(range(len(G))), G.sat_ids(phi)))


def oracle_post_star(G: FiniteGraph, phi: Formula) -> set[StateVector]:
    start = G.sat_ids(phi)
    seen = set(start)
    queue = deque(start)
    while queue:
        i = queue.popleft()
        for j in G.succ[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return G.vectors(seen)


def oracle_eg(G: FiniteGraph, phi: Formula) -> set[StateVector]:
    return G.vectors(eg_ids(G, G.sat_ids(phi)))
