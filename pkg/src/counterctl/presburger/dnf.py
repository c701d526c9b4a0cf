"""Disjunctive normal form engine.

A conjunct is a ``frozenset`` of normalised :class:`Atom` literals and a DNF
is a tuple of conjuncts. Existential elimination works conjunct by
conjunct: equalities are substituted away, one-sided or unit-coefficient
bound sets use the exact Fourier-Motzkin shadow, and everything else goes
through Cooper's method with divisibility atoms.

All procedures charge a node budget held in a context variable so that a
caller can turn runaway elimination into :class:`ResourceExhausted`.
"""

from __future__ import annotations

import contextlib
import contextvars
import math
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Optional

from .formula import (
    DIV,
    EQ,
    FALSE,
    LE,
    NDIV,
    TRUE,
    And,
    Atom,
    Formula,
    LinearTerm,
    Or,
    make_atom,
)

Conj = frozenset
Dnf = tuple

DNF_TRUE: Dnf = (frozenset(),)
DNF_FALSE: Dnf = ()


class ResourceExhausted(RuntimeError):
    """Raised when a decision procedure exceeds its node or time budget."""


@dataclass
class Limits:
    node_limit: Optional[int] = None
    deadline: Optional[float] = None
    nodes: int = 0

    def charge(self, n: int = 1) -> None:
        self.nodes += n
        if self.node_limit is not None and self.nodes > self.node_limit:
            raise ResourceExhausted(f"node limit {self.node_limit} exceeded")
        if self.deadline is not None and (self.nodes & 63) == 0:
            if time.monotonic() > self.deadline:
                raise ResourceExhausted("deadline passed")


_LIMITS: contextvars.ContextVar[Optional[Limits]] = contextvars.ContextVar(
    "presburger_limits", default=None
)


@contextlib.contextmanager
def limits(node_limit: Optional[int] = None, deadline: Optional[float] = None) -> Iterator[Limits]:
    """Install QE limits for the dynamic extent of the block.

    Nested scopes keep the tighter of the two deadlines.
    """
    outer = _LIMITS.get()
    if outer is not None and outer.deadline is not None:
        deadline = outer.deadline if deadline is None else min(deadline, outer.deadline)
    lim = Limits(node_limit=node_limit, deadline=deadline)
    token = _LIMITS.set(lim)
    try:
        yield lim
    finally:
        _LIMITS.reset(token)
        if outer is not None:
            outer.nodes += lim.nodes


def _charge(n: int = 1) -> None:
    lim = _LIMITS.get()
    if lim is not None:
        lim.charge(n)


def check_deadline() -> None:
    lim = _LIMITS.get()
    if lim is not None and lim.deadline is not None and time.monotonic() > lim.deadline:
        raise ResourceExhausted("deadline passed")


# --------------------------------------------------------------------------
# literals and conjuncts


def atom_key(a: Atom):
    return (a.kind, a.term.coeffs, a.term.const, a.divisor)


def conj_key(c: Conj):
    return tuple(sorted(atom_key(a) for a in c))


def conj_vars(c: Conj) -> set[str]:
    out: set[str] = set()
    for a in c:
        out |= a.term.variables
    return out


def dnf_vars(d: Dnf) -> set[str]:
    out: set[str] = set()
    for c in d:
        out |= conj_vars(c)
    return out


def _linear_part(t: LinearTerm):
    return t.coeffs


def simplify_conj(atoms: Iterable[Formula]) -> Optional[Conj]:
    """Normalise a conjunction of literals; ``None`` means unsatisfiable."""
    pending = list(atoms)
    while True:
        result = _simplify_once(pending)
        if result is None or result[1] is False:
            return None if result is None else frozenset(result[0])
        pending = result[0]


def _simplify_once(pending):
    atoms: list[Atom] = []
    for a in pending:
        if a is TRUE or a == TRUE:
            continue
        if a is FALSE or a == FALSE:
            return None
        atoms.append(a)

    # substitute single-variable points everywhere
    points: dict[str, int] = {}
    for a in atoms:
        if a.kind == EQ and len(a.term.coeffs) == 1:
            v, c = a.term.coeffs[0]
            # normalised: c == 1
            val = -a.term.const
            if v in points and points[v] != val:
                return None
            points[v] = val
    if points:
        mapping = {v: LinearTerm.constant(x) for v, x in points.items()}
        out: list[Formula] = []
        changed = False
        for a in atoms:
            if a.kind == EQ and len(a.term.coeffs) == 1:
                out.append(a)
                continue
            if a.term.variables & points.keys():
                b = a.substitute(mapping)
                changed = True
                if b is FALSE or b == FALSE:
                    return None
                if b is TRUE or b == TRUE:
                    continue
                out.append(b)
            else:
                out.append(a)
        if changed:
            return out, True
        atoms = out  # type: ignore[assignment]

    les: dict[tuple, int] = {}
    eqs: dict[tuple, int] = {}
    divs: dict[tuple, set[int]] = {}
    ndivs: dict[tuple, set[int]] = {}
    for a in atoms:
        lp = a.term.coeffs
        c = a.term.const
        if a.kind == LE:
            if lp not in les or c > les[lp]:
                les[lp] = c
        elif a.kind == EQ:
            if lp in eqs and eqs[lp] != c:
                return None
            eqs[lp] = c
        elif a.kind == DIV:
            divs.setdefault((a.divisor, lp), set()).add(c)
        else:
            ndivs.setdefault((a.divisor, lp), set()).add(c)

    new_eq = False
    # opposite LE pairs
    for lp in list(les):
        if lp not in les:
            continue
        neg_lp = tuple((v, -c) for v, c in lp)
        if neg_lp in les:
            c1, c2 = les[lp], les[neg_lp]
            # lp <= -c1 and lp >= c2
            if c2 > -c1:
                return None
            if c2 == -c1:
                del les[lp]
                del les[neg_lp]
                eq_atom = make_atom(EQ, LinearTerm(lp, c1))
                lp2 = eq_atom.term.coeffs
                if lp2 in eqs and eqs[lp2] != eq_atom.term.const:
                    return None
                eqs[lp2] = eq_atom.term.const
                new_eq = True

    # LE against EQ of the same linear part
    for lp, ce in eqs.items():
        neg_lp = tuple((v, -c) for v, c in lp)
        # lp + ce = 0 -> lp = -ce
        if lp in les:
            if -ce + les[lp] > 0:
                return None
            del les[lp]
        if neg_lp in les:
            if ce + les[neg_lp] > 0:
                return None
            del les[neg_lp]

    out_atoms: list[Atom] = []
    for lp, c in les.items():
        out_atoms.append(Atom(LE, LinearTerm(lp, c)))
    for lp, c in eqs.items():
        out_atoms.append(Atom(EQ, LinearTerm(lp, c)))
    eq_values = {}
    for lp, c in eqs.items():
        eq_values[lp] = -c
        eq_values[tuple((v, -k) for v, k in lp)] = c
    for (d, lp), consts in divs.items():
        if lp in eq_values:
            for c in consts:
                if (eq_values[lp] + c) % d:
                    return None
            continue
        if len(consts) > 1:
            return None
        (c,) = consts
        if c in ndivs.get((d, lp), ()):
            return None
        out_atoms.append(Atom(DIV, LinearTerm(lp, c), d))
    for (d, lp), consts in ndivs.items():
        if lp in eq_values:
            for c in consts:
                if (eq_values[lp] + c) % d == 0:
                    return None
            continue
        dconsts = divs.get((d, lp))
        if dconsts:
            continue  # the positive residue already rules these out
        if len(consts) == d:
            return None
        for c in consts:
            out_atoms.append(Atom(NDIV, LinearTerm(lp, c), d))
    return out_atoms, new_eq


def conj_from_atoms(atoms: Iterable[Formula]) -> Optional[Conj]:
    return simplify_conj(atoms)


# --------------------------------------------------------------------------
# elimination of one variable from a conjunct


def _substitute_conj(atoms: Iterable[Atom], mapping: Mapping[str, LinearTerm]) -> list[Formula]:
    return [a.substitute(mapping) for a in atoms]


def _elim_cost(c: Conj, v: str) -> tuple[int, int]:
    """Rough cost of eliminating ``v``: (class, size)."""
    lowers = uppers = 0
    has_div = False
    best_eq = None
    all_lower_unit = all_upper_unit = True
    coeff_lcm = 1
    for a in c:
        k = a.term.coeff(v)
        if not k:
            continue
        coeff_lcm = coeff_lcm * abs(k) // math.gcd(coeff_lcm, abs(k))
        if a.kind == EQ:
            if best_eq is None or abs(k) < best_eq:
                best_eq = abs(k)
        elif a.kind == LE:
            if k < 0:
                lowers += 1
                all_lower_unit &= k == -1
            else:
                uppers += 1
                all_upper_unit &= k == 1
        else:
            has_div = True
    if best_eq is not None:
        return (0 if best_eq == 1 else 1, 0)
    if not has_div:
        if lowers == 0 or uppers == 0:
            return (0, 0)
        if all_lower_unit or all_upper_unit:
            return (2, lowers * uppers)
    return (3, min(lowers, uppers) * coeff_lcm * 4 + 1)


def eliminate_var(c: Conj, v: str) -> list[Conj]:
    """Disjuncts equivalent to ``exists v. c``."""
    with_v = [a for a in c if a.term.coeff(v)]
    if not with_v:
        return [c]
    without = [a for a in c if not a.term.coeff(v)]

    eqs = [a for a in with_v if a.kind == EQ]
    if eqs:
        e = min(eqs, key=lambda a: (abs(a.term.coeff(v)), atom_key(a)))
        a = e.term.coeff(v)
        r = e.term.without(v)
        others = [x for x in with_v if x is not e]
        if abs(a) == 1:
            s = r.scale(-a)
            new = _substitute_conj(others, {v: s})
        else:
            sa = 1 if a > 0 else -1
            A = abs(a)
            new = [make_atom(DIV, r, A)]
            for x in others:
                k = x.term.coeff(v)
                u = x.term.without(v)
                t = r.scale(-k * sa) + u.scale(A)
                if x.kind in (LE, EQ):
                    new.append(make_atom(x.kind, t))
                else:
                    new.append(make_atom(x.kind, t, x.divisor * A))
        _charge()
        res = simplify_conj(without + new)
        return [] if res is None else [res]

    lowers = [a for a in with_v if a.kind == LE and a.term.coeff(v) < 0]
    uppers = [a for a in with_v if a.kind == LE and a.term.coeff(v) > 0]
    divs = [a for a in with_v if a.kind in (DIV, NDIV)]

    if not divs:
        if not lowers or not uppers:
            _charge()
            res = simplify_conj(without)
            return [] if res is None else [res]
        if all(a.term.coeff(v) == -1 for a in lowers) or all(
            a.term.coeff(v) == 1 for a in uppers
        ):
            new = []
            for lo in lowers:
                A = -lo.term.coeff(v)
                ul = lo.term.without(v)  # A v >= ul
                for up in uppers:
                    B = up.term.coeff(v)
                    uu = up.term.without(v)  # B v <= -uu
                    new.append(make_atom(LE, ul.scale(B) + uu.scale(A)))
            _charge(len(new))
            res = simplify_conj(without + new)
            return [] if res is None else [res]

    return _cooper(without, with_v, v)


def _cooper(without: list[Atom], with_v: list[Atom], v: str) -> list[Conj]:
    L = 1
    for a in with_v:
        k = abs(a.term.coeff(v))
        L = L * k // math.gcd(L, k)
    scaled: list[Formula] = []
    for a in with_v:
        k = a.term.coeff(v)
        m = L // abs(k)
        sign = 1 if k > 0 else -1
        t = a.term.without(v).scale(m) + LinearTerm.var(v, sign)
        if a.kind == LE:
            scaled.append(make_atom(LE, t))
        else:
            scaled.append(make_atom(a.kind, t, a.divisor * m))
    if L > 1:
        scaled.append(make_atom(DIV, LinearTerm.var(v), L))
    # constant truth values may appear after scaling
    atoms: list[Atom] = []
    for s in scaled:
        if s is FALSE or s == FALSE:
            return []
        if s is TRUE or s == TRUE:
            continue
        atoms.append(s)  # type: ignore[arg-type]

    delta = 1
    for a in atoms:
        if a.kind in (DIV, NDIV) and a.term.coeff(v):
            delta = delta * a.divisor // math.gcd(delta, a.divisor)
    lowers = [a for a in atoms if a.kind == LE and a.term.coeff(v) < 0]
    uppers = [a for a in atoms if a.kind == LE and a.term.coeff(v) > 0]
    divs = [a for a in atoms if a.kind in (DIV, NDIV) and a.term.coeff(v)]
    plain = [a for a in atoms if not a.term.coeff(v)]

    candidates: list[LinearTerm] = []
    keep: list[Atom]
    if not lowers or not uppers:
        # unbounded on one side: only the periodic constraints matter
        keep = divs
        candidates = [LinearTerm.constant(j) for j in range(delta)]
    elif len(lowers) <= len(uppers):
        keep = lowers + uppers + divs
        for lo in lowers:
            base = lo.term.without(v)  # -v + base <= 0  ->  v >= base
            candidates.extend(base + j for j in range(delta))
    else:
        keep = lowers + uppers + divs
        for up in uppers:
            base = -up.term.without(v)  # v <= base
            candidates.extend(base - j for j in range(delta))

    out: list[Conj] = []
    seen = set()
    for cand in candidates:
        _charge()
        res = simplify_conj(without + plain + _substitute_conj(keep, {v: cand}))
        if res is not None and res not in seen:
            seen.add(res)
            out.append(res)
    return out


def eliminate_vars(c: Conj, vars: Iterable[str]) -> list[Conj]:
    todo = set(vars) & conj_vars(c)
    if not todo:
        return [c]
    v = min(todo, key=lambda x: (_elim_cost(c, x), x))
    out: list[Conj] = []
    seen = set()
    for sub in eliminate_var(c, v):
        for r in eliminate_vars(sub, todo - {v}):
            if r not in seen:
                seen.add(r)
                out.append(r)
    return out


@lru_cache(maxsize=400_000)
def conj_sat(c: Conj) -> bool:
    if not c:
        return True
    vs = conj_vars(c)
    v = min(vs, key=lambda x: (_elim_cost(c, x), x))
    for sub in eliminate_var(c, v):
        if conj_sat(sub):
            return True
    return False


# --------------------------------------------------------------------------
# DNF operations


SEMANTIC_REDUCE_MAX = 5000


def reduce(d: Iterable[Conj], semantic: bool = False) -> Dnf:
    """Drop unsatisfiable and subsumed conjuncts; canonical order."""
    items = []
    seen = set()
    for c in d:
        if c is None or c in seen:
            continue
        seen.add(c)
        if not conj_sat(c):
            continue
        if not c:
            return DNF_TRUE
        items.append(c)
    items.sort(key=lambda c: (len(c), conj_key(c)))
    kept: list[Conj] = []
    for c in items:
        if any(k <= c for k in kept):
            continue
        kept.append(c)
    if semantic and 1 < len(kept) <= SEMANTIC_REDUCE_MAX:
        kept = _semantic_reduce(kept)
    kept.sort(key=conj_key)
    return tuple(kept)


SEMANTIC_SUBSUMPTION_MAX = 40
BOUNDS_SUBSUMPTION_MAX = 400


def _semantic_reduce(kept: list[Conj]) -> list[Conj]:
    kept = list(kept)
    changed = True
    while changed:
        changed = False
        # subsumption; the semantic test is reserved for short lists
        if len(kept) <= BOUNDS_SUBSUMPTION_MAX:
            small = len(kept) <= SEMANTIC_SUBSUMPTION_MAX
            i = 0
            while i < len(kept):
                c = kept[i]
                if any(
                    j != i and (_bounds_entail(c, o) or (small and conj_entails(c, o)))
                    for j, o in enumerate(kept)
                ):
                    del kept[i]
                    changed = True
                else:
                    i += 1
        merged = _merge_pass(kept)
        if merged is not None:
            kept = merged
            changed = True
    return kept


def _merge_pass(kept: list[Conj]) -> Optional[list[Conj]]:
    """One round of hull merges among conjuncts that agree off one direction.

    Returns None when nothing merged.
    """
    buckets: dict[tuple, list[int]] = {}
    for idx, c in enumerate(kept):
        les, rest = _bounds_view(c)
        dirs = {_direction(lp) for lp in les}
        for d in dirs:
            others = frozenset((lp, k) for lp, k in les.items() if _direction(lp) != d)
            buckets.setdefault((rest, d, others), []).append(idx)
    dead: set[int] = set()
    added: list[Conj] = []
    for members in buckets.values():
        live = [i for i in members if i not in dead]
        for a_pos, i in enumerate(live):
            if i in dead:
                continue
            for j in live[a_pos + 1 :]:
                if j in dead:
                    continue
                h = _hull(kept[i], kept[j])
                if h is not None:
                    dead.update((i, j))
                    added.append(h)
                    break
    if not added:
        return None
    return [c for idx, c in enumerate(kept) if idx not in dead] + added


@lru_cache(maxsize=100_000)
def _bounds_view(c: Conj):
    """LE constants per linear part (equalities split in two), other atoms."""
    les: dict[tuple, int] = {}
    rest = set()
    for x in c:
        if x.kind == LE:
            les[x.term.coeffs] = x.term.const
        elif x.kind == EQ:
            les[x.term.coeffs] = x.term.const
            neg_t = -x.term
            les[neg_t.coeffs] = neg_t.const
        else:
            rest.add(x)
    return les, frozenset(rest)


def _bounds_entail(a: Conj, b: Conj) -> bool:
    """Cheap sufficient test for ``a`` entailing ``b``: every bound of ``b`` is
    matched by an equal or tighter bound of ``a``."""
    la, ra = _bounds_view(a)
    lb, rb = _bounds_view(b)
    if not rb <= ra:
        return False
    for lp, k in lb.items():
        ka = la.get(lp)
        if ka is None or ka < k:
            return False
    return True


def _direction(coeffs: tuple) -> tuple:
    neg_c = tuple((v, -c) for v, c in coeffs)
    return min(coeffs, neg_c)


@lru_cache(maxsize=200_000)
def _hull(a: Conj, b: Conj) -> Optional[Conj]:
    """A conjunct equivalent to ``a or b`` when their common-direction
    bounding hull happens to be exact.

    Only pairs whose differing bounds all lie along one direction are tried;
    other exact hulls exist but are rare and costly to confirm.
    """
    la, ra = _bounds_view(a)
    lb, rb = _bounds_view(b)
    if ra != rb:
        return None
    differ = {_direction(lp) for lp in la.keys() | lb.keys() if la.get(lp) != lb.get(lp)}
    if len(differ) > 1:
        return None
    cand = set(ra)
    for lp in la.keys() & lb.keys():
        cand.add(Atom(LE, LinearTerm._raw(lp, min(la[lp], lb[lp]))))
    h = simplify_conj(cand)
    if h is None or h == a or h == b:
        return None
    if and_not((h,), (a, b)) == DNF_FALSE:
        return h
    return None


@lru_cache(maxsize=200_000)
def conj_entails(a: Conj, b: Conj) -> bool:
    if b <= a:
        return True
    return not _conj_minus(a, b)


def _conj_minus(p: Conj, b: Conj) -> list[Conj]:
    """Disjoint pieces of ``p and not b``, pruned by satisfiability."""
    pb = simplify_conj(p | b)
    if pb is None or not conj_sat(pb):
        return [p]
    out = []
    prefix: Optional[Conj] = p
    for lit in sorted(b, key=atom_key):
        if lit in prefix:
            continue
        for nl in lit.negated():
            _charge()
            q = simplify_conj(prefix | {nl})
            if q is not None and conj_sat(q):
                out.append(q)
        prefix = simplify_conj(prefix | {lit})
        if prefix is None:
            break
    return out


def and_not(a: Dnf, b: Dnf) -> Dnf:
    """``a and not b`` in DNF."""
    if not b or not a:
        return reduce(a)
    if DNF_TRUE == b or any(not c for c in b):
        return DNF_FALSE
    result: list[Conj] = []
    for p in a:
        pieces = [p]
        for c in b:
            nxt = []
            for piece in pieces:
                nxt.extend(_conj_minus(piece, c))
            pieces = nxt
            if not pieces:
                break
        result.extend(pieces)
    return reduce(result)


def complement(d: Dnf) -> Dnf:
    return and_not(DNF_TRUE, d)


def conjoin(a: Dnf, b: Dnf) -> Dnf:
    out = []
    for x in a:
        for y in b:
            _charge()
            c = simplify_conj(x | y)
            if c is not None:
                out.append(c)
    return reduce(out)


def disjoin(*ds: Dnf) -> Dnf:
    return reduce(c for d in ds for c in d)


def exists(d: Dnf, vars: Iterable[str]) -> Dnf:
    vars = list(vars)
    out = []
    for c in d:
        out.extend(eliminate_vars(c, vars))
    return reduce(out)


def forall(d: Dnf, vars: Iterable[str]) -> Dnf:
    return complement(exists(complement(d), vars))


def substitute(d: Dnf, mapping: Mapping[str, LinearTerm]) -> Dnf:
    out = []
    for c in d:
        if conj_vars(c) & mapping.keys():
            res = simplify_conj(a.substitute(mapping) for a in c)
            if res is not None:
                out.append(res)
        else:
            out.append(c)
    return reduce(out)


def rename(d: Dnf, mapping: Mapping[str, str]) -> Dnf:
    return substitute(d, {v: LinearTerm.var(w) for v, w in mapping.items()})


def entails(a: Dnf, b: Dnf) -> bool:
    return not and_not(a, b)


def equivalent(a: Dnf, b: Dnf) -> bool:
    return entails(a, b) and entails(b, a)


def is_sat(d: Dnf) -> bool:
    return any(conj_sat(c) for c in d)


def literal(f: Formula) -> Dnf:
    if f is TRUE or f == TRUE:
        return DNF_TRUE
    if f is FALSE or f == FALSE:
        return DNF_FALSE
    assert isinstance(f, Atom)
    return (frozenset((f,)),)


def from_atoms(*atoms: Formula) -> Dnf:
    c = simplify_conj(atoms)
    return DNF_FALSE if c is None else reduce([c])


def to_formula(d: Dnf) -> Formula:
    if not d:
        return FALSE
    disjuncts = []
    for c in sorted(d, key=conj_key):
        lits = sorted(c, key=atom_key)
        if not lits:
            return TRUE
        disjuncts.append(lits[0] if len(lits) == 1 else And(tuple(lits)))
    f = disjuncts[0] if len(disjuncts) == 1 else Or(tuple(disjuncts))
    object.__setattr__(f, "_dnf", tuple(d))
    return f


# --------------------------------------------------------------------------
# models


def _bounds_1d(c: Conj, v: str):
    lo = hi = None
    mod = []
    for a in c:
        k = a.term.coeff(v)
        if not k:
            continue
        r = a.term.const
        if a.kind == LE:
            # k v + r <= 0
            if k > 0:
                b = (-r) // k
                hi = b if hi is None else min(hi, b)
            else:
                # -|k| v + r <= 0  ->  v >= ceil(r/|k|)
                b = -((-r) // (-k))
                lo = b if lo is None else max(lo, b)
        elif a.kind == EQ:
            if r % k == 0:
                b = -r // k
                lo = b if lo is None else max(lo, b)
                hi = b if hi is None else min(hi, b)
        else:
            mod.append(a.divisor)
    period = 1
    for m in mod:
        period = period * m // math.gcd(period, m)
    return lo, hi, period


def model(c: Conj, order: Optional[list[str]] = None) -> Optional[dict[str, int]]:
    """A satisfying integer assignment of a conjunct, or ``None``."""
    if not conj_sat(c):
        return None
    vs = sorted(conj_vars(c)) if order is None else [v for v in order if v in conj_vars(c)]
    vs += sorted(conj_vars(c) - set(vs))
    env: dict[str, int] = {}
    cur = c
    for i, v in enumerate(vs):
        rest = vs[i + 1 :]
        proj = [p for p in eliminate_vars(cur, rest) if conj_sat(p)]
        chosen = None
        for p in proj:
            lo, hi, period = _bounds_1d(p, v)
            if lo is not None:
                window = range(lo, lo + period + 1)
            elif hi is not None:
                window = range(hi, hi - period - 1, -1)
            else:
                window = sorted(range(-period, period + 1), key=abs)
            for x in window:
                nxt = simplify_conj(a.substitute({v: LinearTerm.constant(x)}) for a in cur)
                if nxt is not None and conj_sat(nxt):
                    chosen = (x, nxt)
                    break
            if chosen:
                break
        if chosen is None:  # pragma: no cover - guarded by conj_sat
            raise AssertionError("model construction failed on a satisfiable conjunct")
        env[v] = chosen[0]
        cur = chosen[1]
    return env
