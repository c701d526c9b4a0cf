"""CTL over counter systems with approximation labels.

Properties are trees over state formulas. The checker works on the
existential fragment (``Prop``, ``CNot``, ``COr``, ``EX``, ``EU``, ``EG``);
universal operators and ``&&``/``->`` are surface syntax removed by
:func:`to_enf`.

Every result carries a label from {under, precise, over}. A request for
``under`` or ``over`` allows the engines to stop early; negation flips the
requested direction for its argument.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .core import (
    OVER,
    PRECISE,
    UNDER,
    ApproxLabel,
    BudgetExceededPrecise,
    Budget,
    CheckResult,
    LabelConflict,  # noqa: F401  (re-exported)
    lattice_join,
    lattice_negate,
)
from .eg_over import compute_global_over
from .eg_under import compute_global_under
from .presburger import (
    CONTROL,
    FALSE,
    TRUE,
    Formula,
    ResourceExhausted,
    conj,
    disj,
    eq,
    limits,
    mk_and,
    mk_not,
    mk_or,
    neg,
    simplify,
    to_text,
)
from .presburger.syntax import ParseError, Parser, tokenize
from .reach import post_star, pre_star
from .system import CounterSystem, complete_stuck, pre_image, refine, state_space

log = logging.getLogger(__name__)

__all__ = [
    "ApproxLabel",
    "CheckResult",
    "Prop",
    "CNot",
    "COr",
    "CAnd",
    "CImplies",
    "EX",
    "EU",
    "EG",
    "EF",
    "AX",
    "AF",
    "AG",
    "AU",
    "to_enf",
    "parse_property",
    "Prepared",
    "prepare",
    "sat",
    "check",
    "compute_until",
    "compute_global",
]


# --------------------------------------------------------------------------
# syntax


@dataclass(frozen=True)
class Prop:
    formula: Formula

    def __str__(self):
        return f"({to_text(self.formula)})"


@dataclass(frozen=True)
class CNot:
    arg: "Ctl"

    def __str__(self):
        return f"!{self.arg}"


@dataclass(frozen=True)
class COr:
    lhs: "Ctl"
    rhs: "Ctl"

    def __str__(self):
        return f"({self.lhs} || {self.rhs})"


@dataclass(frozen=True)
class CAnd:
    lhs: "Ctl"
    rhs: "Ctl"

    def __str__(self):
        return f"({self.lhs} && {self.rhs})"


@dataclass(frozen=True)
class CImplies:
    lhs: "Ctl"
    rhs: "Ctl"

    def __str__(self):
        return f"({self.lhs} -> {self.rhs})"


@dataclass(frozen=True)
class EX:
    arg: "Ctl"

    def __str__(self):
        return f"EX {self.arg}"


@dataclass(frozen=True)
class EG:
    arg: "Ctl"

    def __str__(self):
        return f"EG {self.arg}"


@dataclass(frozen=True)
class EF:
    arg: "Ctl"

    def __str__(self):
        return f"EF {self.arg}"


@dataclass(frozen=True)
class AX:
    arg: "Ctl"

    def __str__(self):
        return f"AX {self.arg}"


@dataclass(frozen=True)
class AF:
    arg: "Ctl"

    def __str__(self):
        return f"AF {self.arg}"


@dataclass(frozen=True)
class AG:
    arg: "Ctl"

    def __str__(self):
        return f"AG {self.arg}"


@dataclass(frozen=True)
class EU:
    lhs: "Ctl"
    rhs: "Ctl"

    def __str__(self):
        return f"E[{self.lhs} U {self.rhs}]"


@dataclass(frozen=True)
class AU:
    lhs: "Ctl"
    rhs: "Ctl"

    def __str__(self):
        return f"A[{self.lhs} U {self.rhs}]"


Ctl = Union[Prop, CNot, COr, CAnd, CImplies, EX, EG, EF, AX, AF, AG, EU, AU]
ENF_TYPES = (Prop, CNot, COr, EX, EU, EG)


def _not(a):
    if isinstance(a, Prop):
        return Prop(neg(a.formula))
    if isinstance(a, CNot):
        return a.arg
    return CNot(a)


def _or(a, b):
    if isinstance(a, Prop) and isinstance(b, Prop):
        return Prop(disj(a.formula, b.formula))
    return COr(a, b)


def _and(a, b):
    if isinstance(a, Prop) and isinstance(b, Prop):
        return Prop(conj(a.formula, b.formula))
    return _not(_or(_not(a), _not(b)))


def to_enf(psi) -> Ctl:
    """Rewrite into the existential fragment.

    AX p = !EX !p, EF p = E[true U p], AG p = !EF !p, AF p = !EG !p,
    A[p U q] = !(E[!q U (!p && !q)] || EG !q).
    """
    if isinstance(psi, Prop):
        return psi
    if isinstance(psi, CNot):
        return _not(to_enf(psi.arg))
    if isinstance(psi, COr):
        return _or(to_enf(psi.lhs), to_enf(psi.rhs))
    if isinstance(psi, CAnd):
        return _and(to_enf(psi.lhs), to_enf(psi.rhs))
    if isinstance(psi, CImplies):
        return _or(_not(to_enf(psi.lhs)), to_enf(psi.rhs))
    if isinstance(psi, EX):
        return EX(to_enf(psi.arg))
    if isinstance(psi, EG):
        return EG(to_enf(psi.arg))
    if isinstance(psi, EU):
        return EU(to_enf(psi.lhs), to_enf(psi.rhs))
    if isinstance(psi, EF):
        return EU(Prop(TRUE), to_enf(psi.arg))
    if isinstance(psi, AX):
        return _not(EX(_not(to_enf(psi.arg))))
    if isinstance(psi, AG):
        return _not(EU(Prop(TRUE), _not(to_enf(psi.arg))))
    if isinstance(psi, AF):
        return _not(EG(_not(to_enf(psi.arg))))
    if isinstance(psi, AU):
        p, q = to_enf(psi.lhs), to_enf(psi.rhs)
        nq = _not(q)
        return _not(_or(EU(nq, _and(_not(p), nq)), EG(nq)))
    if isinstance(psi, Formula):
        return Prop(psi)
    raise TypeError(f"not a CTL formula: {psi!r}")


def size(psi) -> int:
    if isinstance(psi, Prop):
        return 1
    if isinstance(psi, (CNot, EX, EG, EF, AX, AF, AG)):
        return 1 + size(psi.arg)
    return 1 + size(psi.lhs) + size(psi.rhs)


TEMPORAL = {"EX", "EG", "EF", "AX", "AG", "AF", "E", "A", "U"}
_UNARY = {"EX": EX, "EG": EG, "EF": EF, "AX": AX, "AG": AG, "AF": AF}
_ARITH = {"<", "<=", ">", ">=", "=", "!=", "+", "-", "*"}


class PropertyParser(Parser):
    """Property grammar layered over the formula parser.

    ``->`` binds weakest (right-associative), then ``||``, then ``&&``;
    prefix operators bind tightest, as in ``EX p && q``.
    """

    def property(self):
        psi = self.implication()
        if not self.at_end():
            raise self.error(f"unexpected {self.tok.text!r}")
        return psi

    def implication(self):
        lhs = self.disjunction()
        if self.accept("->") or self.accept("=>"):
            return CImplies(lhs, self.implication())
        return lhs

    def disjunction(self):
        lhs = self.conjunction()
        while self.accept("||"):
            lhs = _or_keep(lhs, self.conjunction())
        return lhs

    def conjunction(self):
        lhs = self.prefix()
        while self.accept("&&"):
            lhs = _and_keep(lhs, self.prefix())
        return lhs

    def prefix(self):
        t = self.tok
        if t.text == "!":
            self.i += 1
            arg = self.prefix()
            return Prop(neg(arg.formula)) if isinstance(arg, Prop) else CNot(arg)
        if t.text in _UNARY:
            self.i += 1
            return _UNARY[t.text](self.prefix())
        if t.text in ("E", "A"):
            self.i += 1
            self.expect("[")
            lhs = self.implication()
            self.expect("U")
            rhs = self.implication()
            self.expect("]")
            return EU(lhs, rhs) if t.text == "E" else AU(lhs, rhs)
        if t.text == "U":
            raise self.error("'U' outside E[...] or A[...]")
        if t.text == "(":
            save = self.i
            self.i += 1
            try:
                psi = self.implication()
                self.expect(")")
                if self.tok.text not in _ARITH:
                    return psi
                first = None
            except ParseError as e:
                first = e
            self.i = save
            try:
                return Prop(Parser.unary(self))
            except ParseError as second:
                if first is not None and (first.line, first.column) > (second.line, second.column):
                    raise first from None
                raise
        if t.kind == "ident" and t.text in TEMPORAL:
            raise self.error(f"misplaced {t.text!r}")
        return Prop(Parser.unary(self))

    def chain(self):
        if self.tok.text in TEMPORAL:
            raise self.error(f"temporal operator {self.tok.text!r} inside a state formula")
        return super().chain()


def _or_keep(a, b):
    if isinstance(a, Prop) and isinstance(b, Prop):
        return Prop(disj(a.formula, b.formula))
    return COr(a, b)


def _and_keep(a, b):
    if isinstance(a, Prop) and isinstance(b, Prop):
        return Prop(conj(a.formula, b.formula))
    return CAnd(a, b)


def parse_property(text: str):
    """Parse a property such as ``EG (x < 10)`` or ``A[p U q]`` (surface syntax)."""
    return PropertyParser(text, tokenize(text)).property()


# --------------------------------------------------------------------------
# checking


@dataclass
class Prepared:
    """A stuck-free system whose guards are refined with ``reach``."""

    system: CounterSystem
    reach: Formula
    reach_tag: str
    original: CounterSystem


def prepare(M: CounterSystem, budget: Optional[Budget] = None) -> Prepared:
    """Complete stuck states, resolve the reachable set and refine guards.

    A reach hint tagged ``exact`` or ``over`` is used as given. Otherwise
    post*(init) is computed; if that is cut short the state space itself
    stands in, since only a superset of the reachable states keeps every
    label sound. ``reach_tag`` records what happened.
    """
    budget = (budget or Budget()).start()
    Mc = complete_stuck(M)
    if M.reach_hint is not None and M.reach_tag in ("exact", "over"):
        reach, tag = conj(M.reach_hint, state_space(Mc)), M.reach_tag
    else:
        r = post_star(Mc, Mc.init, budget.share(0.25))
        if r.precise:
            reach, tag = _tidy(r.formula), "exact"
        else:
            reach, tag = state_space(Mc), "under"
    return Prepared(refine(Mc, reach), reach, tag, M)


def check(M: CounterSystem, psi, label: ApproxLabel = PRECISE, budget: Optional[Budget] = None) -> CheckResult:
    """Prepare ``M`` and evaluate ``psi`` (any surface syntax) on it."""
    budget = (budget or Budget()).start()
    P = prepare(M, budget)
    return sat(P, psi, label, budget)


def sat(
    M: Union[CounterSystem, Prepared],
    psi,
    label: ApproxLabel = PRECISE,
    budget: Optional[Budget] = None,
    engine: str = "auto",
    observer: Optional[Callable[..., None]] = None,
) -> CheckResult:
    """Labelled set of reachable states satisfying ``psi``.

    ``M`` is prepared first unless it already is. ``engine`` picks the EG
    routine used for precise requests (``auto`` means the over routine);
    under and over requests always use the routine of their direction.
    ``observer(event, **info)`` is told about every EG evaluation, with
    event ``"eg-start"`` (before) and ``"eg-done"`` (after).
    """
    budget = (budget or Budget()).start()
    t0 = time.monotonic()
    P = M if isinstance(M, Prepared) else prepare(M, budget)
    psi = to_enf(psi)
    ctx = _Ctx(P, engine, observer or (lambda event, **info: None))
    res = _sat(ctx, psi, label, budget)
    # the control added by complete_stuck is not a state of the input system
    own = disj(*(eq(CONTROL, c) for c in P.original.controls))
    res.formula = _tidy(mk_and(res.formula, own))
    res.stats.reach_tag = P.reach_tag
    res.stats.elapsed = time.monotonic() - t0
    return res


TIDY_SECONDS = 1.0


def _tidy(f: Formula) -> Formula:
    """Merge fragments of the answer if that is quick; same set either way."""
    try:
        with limits(deadline=time.monotonic() + TIDY_SECONDS):
            return simplify(f)
    except ResourceExhausted:
        return f


def _split(budget: Budget, part: int, whole: int) -> Budget:
    return budget.share(part / max(whole, 1))


@dataclass
class _Ctx:
    P: Prepared
    engine: str
    observer: Callable[..., None]


def _sat(ctx: _Ctx, psi, label: ApproxLabel, budget: Budget) -> CheckResult:
    P = ctx.P
    if isinstance(psi, Prop):
        return CheckResult(mk_and(P.reach, psi.formula), PRECISE)
    total = size(psi)
    if isinstance(psi, CNot):
        r = _sat(ctx, psi.arg, lattice_negate(label), budget)
        f = _bounded(P, label, budget, lambda: mk_and(P.reach, mk_not(r.formula)))
        if f is None:
            return _fallback(P, label, r.stats)
        return CheckResult(f, lattice_negate(r.label), r.stats)
    if isinstance(psi, COr):
        a = _sat(ctx, psi.lhs, label, _split(budget, size(psi.lhs), total))
        b = _sat(ctx, psi.rhs, label, _split(budget, size(psi.rhs), total - size(psi.lhs)))
        return CheckResult(mk_or(a.formula, b.formula), lattice_join(a.label, b.label), a.stats.merge(b.stats))
    if isinstance(psi, EX):
        a = _sat(ctx, psi.arg, label, budget)
        f = _bounded(P, label, budget, lambda: pre_image(P.system, a.formula))
        if f is None:
            return _fallback(P, label, a.stats)
        return CheckResult(f, a.label, a.stats)
    if isinstance(psi, EU):
        a = _sat(ctx, psi.lhs, label, _split(budget, size(psi.lhs), total))
        b = _sat(ctx, psi.rhs, label, _split(budget, size(psi.rhs), total - size(psi.lhs)))
        u = compute_until(P, a.formula, b.formula, label, budget)
        lab = lattice_join(lattice_join(a.label, b.label), u.label)
        return CheckResult(u.formula, lab, a.stats.merge(b.stats).merge(u.stats))
    if isinstance(psi, EG):
        a = _sat(ctx, psi.arg, label, _split(budget, size(psi.arg), total))
        ctx.observer("eg-start", system=P.system, phi=a.formula, label=label)
        g = compute_global(P, a.formula, label, budget, ctx.engine)
        ctx.observer("eg-done", system=P.system, phi=a.formula, label=label, result=g)
        return CheckResult(g.formula, lattice_join(a.label, g.label), a.stats.merge(g.stats))
    raise TypeError(f"not in existential normal form: {psi!r}")


def _bounded(P: Prepared, label: ApproxLabel, budget: Budget, compute: Callable[[], Formula]) -> Optional[Formula]:
    """Run a formula operation within the budget; None if it ran out.

    Precise requests may use up to the global wall clock.
    """
    b = budget.unbounded() if label is PRECISE else budget
    try:
        with b.qe():
            return compute()
    except ResourceExhausted:
        if label is PRECISE:
            raise BudgetExceededPrecise("global time limit reached during a set operation") from None
        return None


def _fallback(P: Prepared, label: ApproxLabel, stats) -> CheckResult:
    """The trivial answer on the requested side."""
    stats.notes.append("budget exhausted in a set operation")
    if label is OVER:
        return CheckResult(P.reach, OVER, stats)
    return CheckResult(FALSE, UNDER, stats)


def _system(M) -> tuple[CounterSystem, Formula]:
    if isinstance(M, Prepared):
        return M.system, M.reach
    return M, state_space(M)


def compute_until(
    M: Union[CounterSystem, Prepared],
    phi1: Formula,
    phi2: Formula,
    label: ApproxLabel = PRECISE,
    budget: Optional[Budget] = None,
) -> CheckResult:
    """E[phi1 U phi2]: backward closure of ``phi2`` inside ``phi1``."""
    budget = (budget or Budget()).start()
    S, reach = _system(M)
    M1 = refine(S, phi1)
    run_budget = budget.unbounded() if label is PRECISE else budget
    r = pre_star(M1, phi2, run_budget)
    if r.precise:
        return r
    if label is PRECISE:
        raise BudgetExceededPrecise("global time limit reached during an until computation")
    if label is UNDER:
        return r
    over = mk_and(reach, mk_or(phi1, phi2))
    return CheckResult(over, OVER, r.stats)


def compute_global(
    M: Union[CounterSystem, Prepared],
    phi: Formula,
    label: ApproxLabel = PRECISE,
    budget: Optional[Budget] = None,
    engine: str = "auto",
) -> CheckResult:
    """EG(phi), dispatched on the requested label."""
    budget = (budget or Budget()).start()
    S, reach = _system(M)
    if label is UNDER:
        return compute_global_under(S, phi, budget)
    if label is OVER:
        return compute_global_over(S, phi, budget, reach=reach)
    unb = budget.unbounded()
    if engine == "under":
        r = compute_global_under(S, phi, unb)
    else:
        r = compute_global_over(S, phi, unb, reach=reach)
    if not r.precise:
        raise BudgetExceededPrecise("global time limit reached during an EG computation")
    return r
