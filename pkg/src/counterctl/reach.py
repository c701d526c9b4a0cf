"""Reachability: cycle acceleration, pre*/post*, pre^k on flat graphs.

All fixpoints run over a :class:`ControlGraph` whose locations each carry
an origin control number. A plain system is the graph where every control
is its own origin; a flattening has several locations per origin. Sets are
kept per location as counters-only DNFs and only turned back into formulas
over ``q`` at the end.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import networkx as nx

from .core import PRECISE, UNDER, Budget, CheckResult, Stats
from .presburger import (
    CONTROL,
    LinearTerm,
    ResourceExhausted,
    conj,
    disj,
    eq,
    ge,
    le,
    primed,
)
from .presburger import dnf as D
from .presburger.formula import DIV, NDIV, Formula, fresh_name
from .presburger.qe import from_dnf, to_dnf
from .system import CounterSystem, Transition, at_control, post_t, pre_t

log = logging.getLogger(__name__)

MAX_CYCLES = 64
K = "k"


class NotAccelerable(Exception):
    """A cycle outside the translation class; also usable as a value."""

    def __init__(self, cycle, reason: str):
        super().__init__(reason)
        self.cycle = cycle
        self.reason = reason


@dataclass(frozen=True)
class Edge:
    name: str
    src: int
    dst: int
    transition: Transition


@dataclass(eq=False)
class ControlGraph:
    locations: tuple[int, ...]
    origin: dict[int, int]
    edges: tuple[Edge, ...]
    counters: tuple[str, ...]
    _accels: Optional[dict] = field(default=None, repr=False)

    @classmethod
    def of(cls, M: CounterSystem) -> "ControlGraph":
        return cls(
            locations=tuple(M.controls),
            origin={c: c for c in M.controls},
            edges=tuple(Edge(t.id, t.source, t.target, t) for t in M.transitions),
            counters=M.counters,
        )

    def out_edges(self, loc: int) -> list[Edge]:
        return [e for e in self.edges if e.src == loc]

    def in_edges(self, loc: int) -> list[Edge]:
        return [e for e in self.edges if e.dst == loc]

    def digraph(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(self.locations)
        for i, e in enumerate(self.edges):
            g.add_edge(e.src, e.dst, key=i)
        return g

    def split(self, phi: Formula) -> dict[int, D.Dnf]:
        cache: dict[int, D.Dnf] = {}
        out = {}
        for loc in self.locations:
            o = self.origin[loc]
            if o not in cache:
                cache[o] = at_control(phi, o)
            out[loc] = cache[o]
        return out

    def join(self, parts: Mapping[int, D.Dnf]) -> Formula:
        by_origin: dict[int, list] = {}
        for loc, d in parts.items():
            if d:
                by_origin.setdefault(self.origin[loc], []).append(d)
        pieces = []
        for o in sorted(by_origin):
            pieces.append(D.conjoin(D.from_atoms(eq(CONTROL, o)), D.disjoin(*by_origin[o])))
        return from_dnf(D.disjoin(*pieces))

    def accelerations(self) -> dict[int, list["AcceleratedCycle"]]:
        """Accelerations of every simple cycle, keyed by entry location.

        Running out of resources propagates and leaves nothing cached.
        """
        if self._accels is None:
            acc: dict[int, list] = {loc: [] for loc in self.locations}
            for cyc in simple_cycles(self):
                for r in range(len(cyc)):
                    rot = cyc[r:] + cyc[:r]
                    try:
                        a = accelerate_edges(rot, self.counters)
                    except NotAccelerable:
                        continue
                    acc[rot[0].src].append(a)
            self._accels = acc
        return self._accels


def simple_cycles(G: ControlGraph, limit: int = MAX_CYCLES) -> list[list[Edge]]:
    """Simple cycles as edge lists, expanded over parallel edges."""
    dg = nx.DiGraph()
    dg.add_nodes_from(G.locations)
    between: dict[tuple[int, int], list[Edge]] = {}
    for e in G.edges:
        dg.add_edge(e.src, e.dst)
        between.setdefault((e.src, e.dst), []).append(e)
    out: list[list[Edge]] = []
    node_cycles = sorted(
        (_rotate_min(c) for c in nx.simple_cycles(dg)), key=lambda c: (len(c), c)
    )
    for nodes in node_cycles:
        pairs = [(nodes[i], nodes[(i + 1) % len(nodes)]) for i in range(len(nodes))]
        combos = [[]]
        for p in pairs:
            combos = [c + [e] for c in combos for e in between[p]]
        for c in combos:
            out.append(c)
            if len(out) >= limit:
                return out
    return out


def _rotate_min(nodes: list) -> list:
    i = nodes.index(min(nodes))
    return nodes[i:] + nodes[:i]


# --------------------------------------------------------------------------
# acceleration


@dataclass(frozen=True, eq=False)
class AcceleratedCycle:
    """``n`` full iterations of a translating cycle.

    ``gall`` is a DNF over the counters and :attr:`nvar` stating that every
    one of the first ``n >= 1`` iterations is enabled from ``x``.
    """

    cycle: tuple[Edge, ...]
    displacement: tuple[tuple[str, int], ...]
    nvar: str
    gall: D.Dnf
    counters: tuple[str, ...]

    @property
    def entry(self) -> int:
        return self.cycle[0].src

    @property
    def length(self) -> int:
        return len(self.cycle)

    def shift(self, sign: int) -> dict[str, LinearTerm]:
        """``x := x + sign * n * d``."""
        n = self.nvar
        return {
            x: LinearTerm([(x, 1), (n, sign * d)]) for x, d in self.displacement if d
        }

    def pre(self, s: D.Dnf) -> D.Dnf:
        """Entry states with ``n >= 1`` iterations ending in ``s``."""
        if not s:
            return D.DNF_FALSE
        d = D.conjoin(self.gall, D.substitute(s, self.shift(+1)))
        return D.exists(d, [self.nvar])

    def post(self, s: D.Dnf) -> D.Dnf:
        if not s:
            return D.DNF_FALSE
        back = self.shift(-1)
        d = D.conjoin(D.substitute(s, back), D.substitute(self.gall, back))
        return D.exists(d, [self.nvar])

    @property
    def param_relation(self) -> Formula:
        """Relation between entry state and the state after ``n`` iterations."""
        n = self.nvar
        q0 = self.cycle[0].transition.source
        ident = conj(*(eq(primed(x), x) for x in self.counters))
        step = conj(*(eq(primed(x), LinearTerm([(x, 1), (n, d)])) for x, d in self.displacement))
        body = disj(
            conj(eq(n, 0), ident),
            conj(ge(n, 1), from_dnf(self.gall), step),
        )
        return conj(eq(CONTROL, q0), eq(primed(CONTROL), q0), body)


def accelerate_cycle(cycle: Sequence[Transition]):
    """Acceleration of a cycle of transitions, or a :class:`NotAccelerable`
    value when the cycle is outside the translation class."""
    edges = [Edge(t.id, t.source, t.target, t) for t in cycle]
    counters = cycle[0].counters if cycle else ()
    try:
        return accelerate_edges(edges, counters)
    except NotAccelerable as e:
        return e


def accelerate_edges(edges: Sequence[Edge], counters: Sequence[str]) -> AcceleratedCycle:
    edges = tuple(edges)
    counters = tuple(counters)
    if not edges:
        raise NotAccelerable(edges, "empty cycle")
    for a, b in zip(edges, edges[1:] + edges[:1]):
        if a.dst != b.src:
            raise NotAccelerable(edges, "edges do not form a cycle")
    cur = {x: LinearTerm.var(x) for x in counters}
    guard = D.DNF_TRUE
    for e in edges:
        t = e.transition
        if t.updates is None:
            raise NotAccelerable(edges, f"{t.id} is not functional")
        guard = D.conjoin(guard, D.substitute(t.guard_c, cur))
        ups = dict(t.updates)
        cur = {x: ups[x].substitute(cur) for x in counters}
    disp = []
    for x in counters:
        term = cur[x] - LinearTerm.var(x)
        if not term.is_constant():
            raise NotAccelerable(edges, f"composed update of {x} is not a translation")
        disp.append((x, term.const))
    n = fresh_name("n", counters)
    gall = _all_iterations(guard, tuple(disp), n, counters)
    return AcceleratedCycle(edges, tuple(disp), n, gall, counters)


def _all_iterations(g: D.Dnf, disp, n: str, counters) -> D.Dnf:
    """``n >= 1`` and ``g(x + i*d)`` for every ``0 <= i < n``."""
    n_pos = D.from_atoms(ge(n, 1))
    if not g:
        return D.DNF_FALSE
    last = {x: LinearTerm([(x, 1), (n, d)], -d) for x, d in disp if d}
    if len(g) == 1 and all(a.kind not in (DIV, NDIV) for a in g[0]):
        # a convex guard holds on the whole segment iff at both ends
        return D.conjoin(n_pos, D.conjoin(g, D.substitute(g, last)))
    i = fresh_name("i", list(counters) + [n])
    at_i = {x: LinearTerm([(x, 1), (i, d)]) for x, d in disp if d}
    ctx = D.conjoin(
        D.conjoin(n_pos, g), D.from_atoms(ge(i, 1), le(LinearTerm([(i, 1), (n, -1)], 1), 0))
    )
    bad = D.exists(D.and_not(ctx, D.substitute(g, at_i)), [i])
    return D.and_not(D.conjoin(n_pos, g), bad)


# --------------------------------------------------------------------------
# pre* and post*


def _graph(M: Union[CounterSystem, ControlGraph]) -> ControlGraph:
    return M if isinstance(M, ControlGraph) else ControlGraph.of(M)


COMPACT_THRESHOLD = 4


@dataclass
class FixpointResult:
    parts: dict[int, D.Dnf]
    precise: bool
    iterations: int


def _star(
    G: ControlGraph,
    start: Mapping[int, D.Dnf],
    budget: Budget,
    forward: bool,
    accelerate: bool = True,
) -> FixpointResult:
    budget = budget.start()
    R = {loc: start.get(loc, D.DNF_FALSE) for loc in G.locations}
    F = dict(R)
    try:
        with budget.qe():
            accels = G.accelerations() if accelerate else {}
    except ResourceExhausted:
        return FixpointResult(R, False, 0)
    it = 0
    while any(F.values()):
        if budget.iterations_exhausted(it) or budget.expired():
            return FixpointResult(R, False, it)
        try:
            with budget.qe():
                new: dict[int, list] = {loc: [] for loc in G.locations}
                for e in G.edges:
                    if forward:
                        if F[e.src]:
                            new[e.dst].append(post_t(e.transition, F[e.src]))
                    elif F[e.dst]:
                        new[e.src].append(pre_t(e.transition, F[e.dst]))
                for loc, accs in accels.items():
                    if not F[loc]:
                        continue
                    for a in accs:
                        new[loc].append(a.post(F[loc]) if forward else a.pre(F[loc]))
                nextF = {}
                for loc in G.locations:
                    nextF[loc] = D.and_not(D.disjoin(*new[loc]), R[loc]) if new[loc] else D.DNF_FALSE
        except ResourceExhausted:
            return FixpointResult(R, False, it)
        it += 1
        F = nextF
        R = {loc: D.disjoin(R[loc], F[loc]) if F[loc] else R[loc] for loc in G.locations}
        try:
            with budget.qe():
                R = {loc: _compact(d) if F[loc] else d for loc, d in R.items()}
        except ResourceExhausted:
            return FixpointResult(R, False, it)
    return FixpointResult(R, True, it)


def _compact(d: D.Dnf) -> D.Dnf:
    """Merge fragments so later differences stay small."""
    return D.reduce(d, semantic=True) if len(d) > COMPACT_THRESHOLD else d


def pre_star_parts(G: ControlGraph, start, budget: Budget) -> FixpointResult:
    return _star(G, start, budget, forward=False)


def post_star_parts(G: ControlGraph, start, budget: Budget) -> FixpointResult:
    return _star(G, start, budget, forward=True)


def _star_result(M, phi: Formula, budget: Optional[Budget], forward: bool) -> CheckResult:
    G = _graph(M)
    t0 = time.monotonic()
    res = _star(G, G.split(phi), budget or Budget(), forward)
    stats = Stats(iterations=res.iterations, elapsed=time.monotonic() - t0)
    return CheckResult(G.join(res.parts), PRECISE if res.precise else UNDER, stats)


def pre_star(M, phi: Formula, budget: Optional[Budget] = None) -> CheckResult:
    """States that reach ``phi`` in zero or more steps (``under`` on stop)."""
    return _star_result(M, phi, budget, forward=False)


def post_star(M, phi: Formula, budget: Optional[Budget] = None) -> CheckResult:
    """States reachable from ``phi`` in zero or more steps."""
    return _star_result(M, phi, budget, forward=True)


# --------------------------------------------------------------------------
# pre^k on flat graphs


def _shift_k(d: D.Dnf, by) -> D.Dnf:
    """``d[k := k - by]`` where ``by`` is an int or a LinearTerm."""
    return D.substitute(d, {K: LinearTerm.var(K) - by})


def cycle_sccs(G: ControlGraph):
    """SCCs in reverse topological order, each with its cycle (or None).

    Raises ValueError if some SCC is not a single simple cycle.
    """
    dg = G.digraph()
    cond = nx.condensation(nx.DiGraph(dg))
    order = list(reversed(list(nx.topological_sort(cond))))
    out = []
    for c in order:
        members = sorted(cond.nodes[c]["members"])
        inner = [e for e in G.edges if e.src in members and e.dst in members]
        if not inner:
            out.append((members, None))
            continue
        if len(inner) != len(members):
            raise ValueError("control graph is not flat")
        # walk the cycle from its smallest location
        nxt = {}
        for e in inner:
            if e.src in nxt:
                raise ValueError("control graph is not flat")
            nxt[e.src] = e
        cyc = []
        loc = members[0]
        for _ in members:
            e = nxt[loc]
            cyc.append(e)
            loc = e.dst
        out.append((members, cyc))
    return out


def is_flat(G: ControlGraph) -> bool:
    try:
        cycle_sccs(G)
        return True
    except ValueError:
        return False


def pre_k_parts(G: ControlGraph, phi_parts: Mapping[int, D.Dnf]) -> dict[int, D.Dnf]:
    """Per location, ``pre^k`` as a DNF over counters and ``k``.

    Raises :class:`NotAccelerable` when a cycle resists acceleration and
    ``ValueError`` when ``G`` is not flat.
    """
    if K in G.counters:
        raise ValueError(f"counter name {K!r} clashes with the step variable")
    k0 = D.from_atoms(eq(K, 0))
    PK: dict[int, D.Dnf] = {}

    def out_of(loc: int, skip: Optional[Edge]) -> D.Dnf:
        parts = [D.conjoin(k0, phi_parts.get(loc, D.DNF_FALSE))]
        for e in G.out_edges(loc):
            if e is skip:
                continue
            parts.append(pre_t(e.transition, _shift_k(PK[e.dst], 1)))
        return D.disjoin(*parts)

    for members, cyc in cycle_sccs(G):
        if cyc is None:
            (loc,) = members
            PK[loc] = out_of(loc, None)
            continue
        m = len(cyc)
        outs = [out_of(e.src, e) for e in cyc]
        # exits[i]: from cycle position i, walk r < m cycle steps then leave
        exits = list(outs)
        for _ in range(m - 1):
            exits = [
                D.disjoin(outs[i], pre_t(cyc[i].transition, _shift_k(exits[(i + 1) % m], 1)))
                for i in range(m)
            ]
        for i in range(m):
            rot = cyc[i:] + cyc[:i]
            acc = accelerate_edges(rot, G.counters)
            n = acc.nvar
            moved = D.substitute(exits[i], {**acc.shift(+1), K: LinearTerm([(K, 1), (n, -m)])})
            looped = D.exists(D.conjoin(acc.gall, moved), [n])
            PK[cyc[i].src] = D.disjoin(exits[i], looped)
    return PK


def pre_k_flat(N, phi: Formula) -> Formula:
    """``pre^k`` of ``phi`` in a flat graph, with ``k`` free."""
    G = _graph(N)
    return G.join(pre_k_parts(G, G.split(phi)))


def forall_k_closure_dnf(f: D.Dnf) -> D.Dnf:
    """``forall k >= 0. f`` for a DNF over counters and ``k``."""
    f0 = D.substitute(f, {K: LinearTerm.constant(0)})
    if not f0:
        return D.DNF_FALSE
    ctx = D.conjoin(f0, D.from_atoms(ge(K, 0)))
    bad = D.exists(D.and_not(ctx, f), [K])
    return D.and_not(f0, bad)


def forall_k_closure(f: Formula) -> Formula:
    return from_dnf(forall_k_closure_dnf(to_dnf(f)))
