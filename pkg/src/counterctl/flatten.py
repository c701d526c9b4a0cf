"""Flattenings: enumeration by length and the trace-inclusion check.

A flattening is a flat graph of *copies* of the controls of a system, each
edge being a copy of one of its transitions. Copies keep the origin control
number inside all formulas, so sets computed on a flattening are directly
sets of states of the original system.

Enumeration is breadth-first on the number of edges: every flattening of
length k minus one of its edges is a flattening of length k-1 (dropping an
edge never breaks flatness), so extending each level by one edge in every
possible way reaches every flattening. Isomorphic copies are merged through
a canonical form.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional

import networkx as nx

from .core import Budget
from .presburger import Formula, ResourceExhausted
from .presburger import dnf as D
from .reach import ControlGraph, Edge, is_flat, post_star_parts
from .system import CounterSystem, Transition, at_control

log = logging.getLogger(__name__)

HOLDS = "holds"
UNKNOWN = "unknown"

PERMUTATION_CAP = 5040
SUBFLATTENING_CAP = 256


# raw shape: origins per copy and (src, dst, transition index) edges
Shape = tuple[tuple[int, ...], tuple[tuple[int, int, int], ...]]


@dataclass(eq=False)
class Flattening:
    origin_system: CounterSystem = field(repr=False)
    copy_of_control: dict[int, int]
    edges: tuple[tuple[int, int, int], ...]  # (src copy, dst copy, transition index)
    key: tuple = ()  # canonical form, one entry per connected component
    _graph: Optional[ControlGraph] = field(default=None, repr=False)

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def copy_of_transition(self) -> dict[str, str]:
        return {e.name: e.transition.id for e in self.graph.edges}

    @property
    def graph(self) -> ControlGraph:
        if self._graph is None:
            ts = self.origin_system.transitions
            es = []
            for i, (s, d, ti) in enumerate(self.edges):
                es.append(Edge(f"{ts[ti].id}_{i}", s, d, ts[ti]))
            self._graph = ControlGraph(
                locations=tuple(sorted(self.copy_of_control)),
                origin=dict(self.copy_of_control),
                edges=tuple(es),
                counters=self.origin_system.counters,
            )
        return self._graph

    @property
    def has_cycle(self) -> bool:
        return any(True for _ in nx.simple_cycles(nx.DiGraph(self.graph.digraph())))

    def is_flat(self) -> bool:
        return is_flat(self.graph)

    def to_text(self) -> str:
        from .sysfile import print_system

        g = self.graph
        edges = [(e.name, e.src, e.dst, e.transition) for e in g.edges]
        head = "# copies: " + ", ".join(f"{c}->{o}" for c, o in sorted(g.origin.items()))
        return head + "\n" + print_system(self.origin_system, controls=g.locations, edges=edges)

    def __str__(self):
        ts = self.origin_system.transitions
        parts = [f"{s}-{ts[t].id}->{d}" for s, d, t in self.edges]
        return f"Flattening[{', '.join(parts)}; copies {self.copy_of_control}]"


# --------------------------------------------------------------------------
# canonical forms


def _components(nodes, edges):
    g = nx.MultiGraph()
    g.add_nodes_from(nodes)
    for s, d, _ in edges:
        g.add_edge(s, d)
    return [sorted(c) for c in nx.connected_components(g)]


def _refine_colors(nodes, origin, edges):
    color = {}
    for v in nodes:
        outs = sorted(t for s, d, t in edges if s == v)
        ins = sorted(t for s, d, t in edges if d == v)
        color[v] = (origin[v], tuple(outs), tuple(ins))
    ranks = _rank(color)
    for _ in range(len(nodes)):
        sig = {}
        for v in nodes:
            outs = sorted((t, ranks[d]) for s, d, t in edges if s == v)
            ins = sorted((t, ranks[s]) for s, d, t in edges if d == v)
            sig[v] = (ranks[v], tuple(outs), tuple(ins))
        new = _rank(sig)
        if len(set(new.values())) == len(set(ranks.values())):
            return new
        ranks = new
    return ranks


def _rank(color):
    order = {c: i for i, c in enumerate(sorted(set(color.values())))}
    return {v: order[c] for v, c in color.items()}


def _component_form(nodes, origin, edges):
    ranks = _refine_colors(nodes, origin, edges)
    classes: dict[int, list] = {}
    for v in nodes:
        classes.setdefault(ranks[v], []).append(v)
    keys = sorted(classes)
    total = 1
    for k in keys:
        for i in range(2, len(classes[k]) + 1):
            total *= i
    perms_per_class = [
        itertools.permutations(classes[k]) if total <= PERMUTATION_CAP else [tuple(classes[k])]
        for k in keys
    ]
    best = None
    for combo in itertools.product(*perms_per_class):
        order = [v for grp in combo for v in grp]
        idx = {v: i for i, v in enumerate(order)}
        form = (
            tuple(origin[v] for v in order),
            tuple(sorted((idx[s], idx[d], t) for s, d, t in edges)),
        )
        if best is None or form < best:
            best = form
    return best


def canonical(shape: Shape):
    """Canonical key of a flattening shape, invariant under copy renaming."""
    origins, edges = shape
    nodes = sorted({s for s, _, _ in edges} | {d for _, d, _ in edges})
    origin = {v: origins[v] for v in nodes}
    forms = []
    for comp in _components(nodes, edges):
        cset = set(comp)
        ces = [e for e in edges if e[0] in cset]
        forms.append(_component_form(comp, origin, ces))
    return tuple(sorted(forms))


def _from_canonical(key) -> Shape:
    origins: list[int] = []
    edges = []
    for comp_origins, comp_edges in key:
        base = len(origins)
        origins.extend(comp_origins)
        edges.extend((s + base, d + base, t) for s, d, t in comp_edges)
    return tuple(origins), tuple(edges)


def _flat(origins, edges) -> bool:
    g = nx.DiGraph()
    g.add_nodes_from(range(len(origins)))
    for s, d, _ in edges:
        g.add_edge(s, d)
    for comp in nx.strongly_connected_components(g):
        inner = [e for e in edges if e[0] in comp and e[1] in comp]
        if inner and len(inner) != len(comp):
            return False
    return True


def _extensions(shape: Shape, ts: tuple[Transition, ...], usable: list[int]) -> Iterator[Shape]:
    origins, edges = shape
    have = set(edges)
    for ti in usable:
        t = ts[ti]
        srcs = [c for c, o in enumerate(origins) if o == t.source] + [None]
        for s in srcs:
            dsts = [c for c, o in enumerate(origins) if o == t.target] + [None]
            if s is None and t.source == t.target:
                dsts.append("self")
            for d in dsts:
                new_origins = list(origins)
                if s is None:
                    s_ = len(new_origins)
                    new_origins.append(t.source)
                else:
                    s_ = s
                if d == "self":
                    d_ = s_
                elif d is None:
                    d_ = len(new_origins)
                    new_origins.append(t.target)
                else:
                    d_ = d
                e = (s_, d_, ti)
                if e in have:
                    continue
                new_edges = edges + (e,)
                if _flat(new_origins, new_edges):
                    yield tuple(new_origins), new_edges


def usable_transitions(M1: CounterSystem) -> list[int]:
    """Indices of transitions whose guard is satisfiable."""
    return [i for i, t in enumerate(M1.transitions) if D.is_sat(t.rel)]


def enumerate_by_length(M1: CounterSystem, max_length: Optional[int] = None) -> Iterator[Flattening]:
    """All flattenings in increasing order of length, deterministic.

    Within a length, flattenings with fewer copies come first.
    """
    ts = M1.transitions
    usable = usable_transitions(M1)
    level = [canonical(((), ()))]
    length = 0
    while max_length is None or length < max_length:
        nxt = set()
        for key in level:
            for ext in _extensions(_from_canonical(key), ts, usable):
                nxt.add(canonical(ext))
        if not nxt:
            return
        length += 1
        level = sorted(nxt, key=_order)
        for key in level:
            yield _make(M1, key)


def _order(key):
    # within one length: fewest copies first, then fewest components; shapes
    # close to the system itself are the likeliest trace flattenings
    return (sum(len(origins) for origins, _ in key), len(key), key)


def _make(M1: CounterSystem, key) -> Flattening:
    origins, edges = _from_canonical(key)
    return Flattening(M1, {i: o for i, o in enumerate(origins)}, edges, key)


def identity_flattening(M1: CounterSystem) -> Optional[Flattening]:
    """``M1`` itself, one copy per control, if its usable part is flat."""
    usable = usable_transitions(M1)
    if not usable:
        return None
    index = {c: i for i, c in enumerate(M1.controls)}
    edges = tuple((index[M1.transitions[t].source], index[M1.transitions[t].target], t) for t in usable)
    origins = tuple(M1.controls)
    if not _flat(origins, edges):
        return None
    return _make(M1, canonical((origins, edges)))


def component(M1: CounterSystem, form) -> Flattening:
    """The one-component flattening with canonical component ``form``."""
    return _make(M1, (form,))


def enumerate_flattenings(M1: CounterSystem, length: int) -> list[Flattening]:
    """Every flattening with exactly ``length`` edges, up to isomorphism."""
    if length < 1:
        raise ValueError("length must be positive")
    return [f for f in enumerate_by_length(M1, length) if f.length == length]


# --------------------------------------------------------------------------
# trace inclusion


def _sub_flattenings(G: ControlGraph) -> Iterator[ControlGraph]:
    """Subgraphs keeping exactly one edge per (copy, origin transition)."""
    groups: dict[tuple, list[Edge]] = {}
    for e in G.edges:
        groups.setdefault((e.src, e.transition.id), []).append(e)
    keys = sorted(groups)
    choices = [groups[k] for k in keys]
    for n, pick in enumerate(itertools.product(*choices)):
        if n >= SUBFLATTENING_CAP:
            return
        yield ControlGraph(G.locations, G.origin, tuple(pick), G.counters)


def trace_inclusion_check(
    M1: CounterSystem, N: Flattening, phi: Formula, budget: Optional[Budget] = None
) -> str:
    """``holds`` if every trace of ``M1`` from ``phi`` is a trace of ``N``.

    Sufficient condition: pick one copy per origin control as the root for
    the ``phi`` states there and keep one edge per (copy, transition); if
    no state reachable at a copy enables a transition that the copy lacks,
    every trace can be replayed in the flattening. Controls with no copy
    at all act as an edgeless root. Anything short of a certificate,
    including an imprecise post*, gives ``unknown``.
    """
    budget = (budget or Budget()).start()
    try:
        with budget.qe():
            phi_at = {c: at_control(phi, c) for c in M1.controls}
    except ResourceExhausted:
        return UNKNOWN
    return trace_inclusion_parts(M1, N.graph, phi_at, budget)


def root_needs(M1: CounterSystem, phi_at, budget: Budget) -> Optional[dict[int, frozenset[str]]]:
    """Per control, the transitions some ``phi`` state there enables.

    A root copy lacking one of them can never certify, whatever the rest of
    the flattening looks like. None if the budget ran out.
    """
    needs: dict[int, frozenset[str]] = {}
    try:
        with budget.qe():
            for c, d in phi_at.items():
                if d:
                    needs[c] = frozenset(
                        t.id for t in M1.transitions if t.source == c and D.is_sat(D.conjoin(d, t.guard_c))
                    )
    except ResourceExhausted:
        return None
    return needs


def trace_inclusion_parts(
    M1: CounterSystem, G: ControlGraph, phi_at, budget: Budget, needs: Optional[dict] = None
) -> str:
    """:func:`trace_inclusion_check` with ``phi`` given per control.

    ``needs`` is the result of :func:`root_needs` for ``phi_at`` when the
    caller checks many flattenings against the same set.
    """
    live = {c for c, d in phi_at.items() if d}
    if not live:
        return HOLDS
    if needs is None:
        needs = root_needs(M1, phi_at, budget)
        if needs is None:
            return UNKNOWN
    out_by_origin: dict[int, list[Transition]] = {}
    for t in M1.transitions:
        out_by_origin.setdefault(t.source, []).append(t)

    # a root must offer every transition its phi states enable; a control
    # without copies acts as an edgeless root
    outgoing: dict[int, set[str]] = {loc: set() for loc in G.locations}
    for e in G.edges:
        outgoing[e.src].add(e.transition.id)
    copies: dict[int, list[int]] = {c: [] for c in M1.controls}
    for loc in G.locations:
        if needs.get(G.origin[loc], frozenset()) <= outgoing[loc]:
            copies[G.origin[loc]].append(loc)
    for c in live:
        if needs[c] and not copies[c]:
            return UNKNOWN

    root_choices = [copies[c] for c in sorted(live) if copies[c]]
    rooted = [c for c in sorted(live) if copies[c]]
    for sub in _sub_flattenings(G):
        for roots in itertools.product(*root_choices):
            if budget.expired():
                return UNKNOWN
            start = {loc: phi_at[c] for c, loc in zip(rooted, roots)}
            res = post_star_parts(sub, start, budget)
            if not res.precise:
                continue
            if _closed(sub, res.parts, out_by_origin, budget):
                return HOLDS
    return UNKNOWN


def _closed(sub: ControlGraph, R, out_by_origin, budget: Budget) -> bool:
    present = {(e.src, e.transition.id) for e in sub.edges}
    try:
        with budget.qe():
            for loc in sub.locations:
                if not R.get(loc):
                    continue
                for t in out_by_origin.get(sub.origin[loc], []):
                    if (loc, t.id) in present:
                        continue
                    if D.is_sat(D.conjoin(R[loc], t.guard_c)):
                        return False
    except ResourceExhausted:
        return False
    return True
