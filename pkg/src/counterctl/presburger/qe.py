"""Quantifier elimination and decision procedures on formulas.

Every formula is lowered to a DNF (see :mod:`.dnf`) on demand and the DNF
is cached on the formula object, so repeated queries on the same formula
are cheap.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Optional

from . import dnf as D
from .formula import (
    And,
    Atom,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    UnboundVariable,
    _Const,
    free_vars,
    primed,
)


def to_dnf(f: Formula) -> D.Dnf:
    cached = f._dnf
    if cached is not None:
        return cached
    D.check_deadline()
    if isinstance(f, _Const):
        out = D.DNF_TRUE if f.value else D.DNF_FALSE
    elif isinstance(f, Atom):
        out = D.literal(f)
    elif isinstance(f, Not):
        out = D.complement(to_dnf(f.arg))
    elif isinstance(f, And):
        out = D.DNF_TRUE
        # cheapest first keeps intermediate products small
        parts = sorted((to_dnf(a) for a in f.args), key=len)
        for p in parts:
            out = D.conjoin(out, p)
            if not out:
                break
    elif isinstance(f, Or):
        out = D.disjoin(*(to_dnf(a) for a in f.args))
    elif isinstance(f, Implies):
        out = D.disjoin(D.complement(to_dnf(f.lhs)), to_dnf(f.rhs))
    elif isinstance(f, Exists):
        out = D.exists(to_dnf(f.body), [f.var])
    elif isinstance(f, Forall):
        out = D.forall(to_dnf(f.body), [f.var])
    else:
        raise TypeError(f"not a formula: {f!r}")
    object.__setattr__(f, "_dnf", out)
    return out


def from_dnf(d: D.Dnf) -> Formula:
    return D.to_formula(d)


def eliminate_quantifiers(f: Formula) -> Formula:
    """Quantifier-free equivalent of ``f`` (a DNF over LE/EQ/DIV literals)."""
    return from_dnf(to_dnf(f))


def is_satisfiable(f: Formula) -> bool:
    return D.is_sat(to_dnf(f))


def witness(f: Formula, order: Optional[list[str]] = None) -> Optional[dict[str, int]]:
    """A satisfying assignment of the free variables of ``f``, or ``None``.

    Variables that do not constrain the result are set to 0.
    """
    d = to_dnf(f)
    for c in d:
        m = D.model(c, order)
        if m is not None:
            for v in free_vars(f):
                m.setdefault(v, 0)
            return m
    return None


def entails(f1: Formula, f2: Formula) -> bool:
    return D.entails(to_dnf(f1), to_dnf(f2))


def equivalent(f1: Formula, f2: Formula) -> bool:
    a, b = to_dnf(f1), to_dnf(f2)
    return D.entails(a, b) and D.entails(b, a)


def is_valid(f: Formula) -> bool:
    return not D.complement(to_dnf(f))


def simplify(f: Formula) -> Formula:
    """Equivalent quantifier-free formula with redundant disjuncts merged.

    The result is a fixpoint: simplifying it again returns an equal formula.
    """
    d = to_dnf(f)
    prev = None
    while d != prev:
        prev = d
        d = D.reduce(d, semantic=True)
    return from_dnf(d)


def mk_and(*fs: Formula) -> Formula:
    """Conjunction computed in DNF; cheaper than building an ``And`` node
    when the operands are already lowered."""
    out = D.DNF_TRUE
    for f in sorted(fs, key=lambda g: len(to_dnf(g))):
        out = D.conjoin(out, to_dnf(f))
        if not out:
            break
    return from_dnf(out)


def mk_or(*fs: Formula) -> Formula:
    return from_dnf(D.disjoin(*(to_dnf(f) for f in fs)))


def mk_not(f: Formula) -> Formula:
    return from_dnf(D.complement(to_dnf(f)))


def mk_diff(a: Formula, b: Formula) -> Formula:
    """``a and not b``."""
    return from_dnf(D.and_not(to_dnf(a), to_dnf(b)))


def mk_exists(vars: Iterable[str], f: Formula) -> Formula:
    return from_dnf(D.exists(to_dnf(f), list(vars)))


def mk_forall(vars: Iterable[str], f: Formula) -> Formula:
    return from_dnf(D.forall(to_dnf(f), list(vars)))


def mk_subst(f: Formula, mapping: Mapping) -> Formula:
    from .formula import as_term

    m = {v: as_term(t) for v, t in mapping.items()}
    return from_dnf(D.substitute(to_dnf(f), m))


def state_env(s, s_primed=None) -> dict[str, int]:
    """Variable assignment for a state (and optionally a successor state).

    ``s`` may be a mapping or any object with ``control`` and ``counters``.
    """
    env: dict[str, int] = {}
    for src, prime in ((s, False), (s_primed, True)):
        if src is None:
            continue
        if isinstance(src, Mapping):
            items = dict(src)
        else:
            items = dict(src.counters)
            items["q"] = src.control
        for k, v in items.items():
            env[primed(k) if prime else k] = v
    return env


def evaluate(f: Formula, s, s_primed=None) -> bool:
    """Truth value of ``f`` at state ``s`` (and successor ``s_primed``)."""
    env = state_env(s, s_primed)
    missing = free_vars(f) - env.keys()
    if missing:
        raise UnboundVariable(sorted(missing)[0])
    from .formula import eval_qf, is_quantifier_free, substitute

    if is_quantifier_free(f):
        return eval_qf(f, env)
    g = substitute(f, {v: env[v] for v in free_vars(f)})
    return is_satisfiable(g)
