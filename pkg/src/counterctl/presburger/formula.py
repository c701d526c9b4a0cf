"""Linear terms, atoms and the Presburger formula AST.

Formulas are immutable. Atoms are normalised at construction:

* ``LE``   ``t <= 0``
* ``EQ``   ``t = 0``
* ``DIV``  ``d | t``   (d >= 2)
* ``NDIV`` ``not (d | t)``, used for negation normal form

The smart constructors (:func:`le`, :func:`eq`, ...) may return ``TRUE`` or
``FALSE`` when the atom is ground or trivially decided.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping, Union

LE = "le"
EQ = "eq"
DIV = "div"
NDIV = "ndiv"

CONTROL = "q"
PRIME = "'"


class UnboundVariable(KeyError):
    pass


def primed(name: str, times: int = 1) -> str:
    return name + PRIME * times


def unprimed(name: str) -> str:
    return name.rstrip(PRIME)


def prime_count(name: str) -> int:
    return len(name) - len(name.rstrip(PRIME))


def fresh_name(base: str, avoid: Iterable[str]) -> str:
    avoid = set(avoid)
    base = unprimed(base)
    i = 0
    while f"{base}_{i}" in avoid:
        i += 1
    return f"{base}_{i}"


class LinearTerm:
    """Sum of integer multiples of variables plus a constant."""

    __slots__ = ("coeffs", "const", "_hash")

    def __init__(self, coeffs: Mapping[str, int] | Iterable[tuple[str, int]] = (), const: int = 0):
        items = coeffs.items() if hasattr(coeffs, "items") else coeffs
        acc: dict[str, int] = {}
        for v, c in items:
            acc[v] = acc.get(v, 0) + c
        self.coeffs = tuple(sorted((v, c) for v, c in acc.items() if c != 0))
        self.const = const
        self._hash = None

    @classmethod
    def _raw(cls, coeffs: tuple, const: int) -> "LinearTerm":
        """Build from an already sorted, duplicate-free, nonzero tuple."""
        t = cls.__new__(cls)
        t.coeffs = coeffs
        t.const = const
        t._hash = None
        return t

    @classmethod
    def var(cls, name: str, coeff: int = 1) -> "LinearTerm":
        return cls(((name, coeff),))

    @classmethod
    def constant(cls, value: int) -> "LinearTerm":
        return cls((), value)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.coeffs, self.const))
        return self._hash

    def __eq__(self, other):
        return (
            isinstance(other, LinearTerm)
            and self.const == other.const
            and self.coeffs == other.coeffs
        )

    def __repr__(self):
        return f"LinearTerm({term_text(self)!r})"

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.coeffs)

    def coeff(self, name: str) -> int:
        for v, c in self.coeffs:
            if v == name:
                return c
        return 0

    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other) -> "LinearTerm":
        if isinstance(other, int):
            return LinearTerm._raw(self.coeffs, self.const + other)
        return LinearTerm(self.coeffs + other.coeffs, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "LinearTerm":
        return LinearTerm._raw(tuple((v, -c) for v, c in self.coeffs), -self.const)

    def __sub__(self, other) -> "LinearTerm":
        if isinstance(other, int):
            return LinearTerm._raw(self.coeffs, self.const - other)
        return self + (-other)

    def __rsub__(self, other) -> "LinearTerm":
        return (-self) + other

    def scale(self, k: int) -> "LinearTerm":
        if k == 1:
            return self
        return LinearTerm(((v, c * k) for v, c in self.coeffs), self.const * k)

    __mul__ = scale
    __rmul__ = scale

    def without(self, name: str) -> "LinearTerm":
        return LinearTerm._raw(tuple((v, c) for v, c in self.coeffs if v != name), self.const)

    def substitute(self, mapping: Mapping[str, "LinearTerm"]) -> "LinearTerm":
        if not any(v in mapping for v, _ in self.coeffs):
            return self
        out = LinearTerm((), self.const)
        rest = []
        for v, c in self.coeffs:
            if v in mapping:
                out = out + mapping[v].scale(c)
            else:
                rest.append((v, c))
        return out + LinearTerm(rest)

    def evaluate(self, env: Mapping[str, int]) -> int:
        total = self.const
        for v, c in self.coeffs:
            try:
                total += c * env[v]
            except KeyError:
                raise UnboundVariable(v) from None
        return total


TermLike = Union[LinearTerm, int, str]


def as_term(x: TermLike) -> LinearTerm:
    if isinstance(x, LinearTerm):
        return x
    if isinstance(x, int):
        return LinearTerm.constant(x)
    return LinearTerm.var(x)


# --------------------------------------------------------------------------
# AST


class Formula:
    __slots__ = ("_dnf", "_hash")

    def __and__(self, other: "Formula") -> "Formula":
        return conj(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return disj(self, other)

    def __invert__(self) -> "Formula":
        return neg(self)

    def _key(self):
        raise NotImplementedError

    def __hash__(self):
        h = getattr(self, "_hash", None)
        if h is None:
            h = hash((type(self).__name__, self._key()))
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __setattr__(self, name, value):
        raise AttributeError("formulas are immutable")

    def __repr__(self):
        from .syntax import to_text

        return f"{type(self).__name__}({to_text(self)!r})"

    def __str__(self):
        from .syntax import to_text

        return to_text(self)


def _init(obj, **fields):
    for k, v in fields.items():
        object.__setattr__(obj, k, v)
    object.__setattr__(obj, "_hash", None)
    object.__setattr__(obj, "_dnf", None)


class _Const(Formula):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        _init(self, value=value)

    def _key(self):
        return self.value

    def __bool__(self):
        return self.value


TRUE = _Const(True)
FALSE = _Const(False)


def _sort_key(a: "Atom"):
    return (a.kind, a.term.coeffs, a.term.const, a.divisor)


class Atom(Formula):
    """Normalised atomic constraint; build through :func:`make_atom`."""

    __slots__ = ("kind", "term", "divisor")

    def __init__(self, kind: str, term: LinearTerm, divisor: int = 0):
        _init(self, kind=kind, term=term, divisor=divisor)

    def _key(self):
        return (self.kind, self.term.coeffs, self.term.const, self.divisor)

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash(self._key())
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other):
        return isinstance(other, Atom) and self._key() == other._key()

    def __lt__(self, other):
        return _sort_key(self) < _sort_key(other)

    @property
    def variables(self) -> frozenset[str]:
        return self.term.variables

    def holds(self, env: Mapping[str, int]) -> bool:
        v = self.term.evaluate(env)
        if self.kind == LE:
            return v <= 0
        if self.kind == EQ:
            return v == 0
        if self.kind == DIV:
            return v % self.divisor == 0
        return v % self.divisor != 0

    def negated(self) -> tuple["Atom", ...]:
        """Literals whose disjunction is the negation of this atom."""
        t = self.term
        if self.kind == LE:
            return _lits(le(-t + 1))
        if self.kind == EQ:
            return _lits(le(t + 1)) + _lits(le(-t + 1))
        if self.kind == DIV:
            return _lits(make_atom(NDIV, t, self.divisor))
        return _lits(make_atom(DIV, t, self.divisor))

    def substitute(self, mapping: Mapping[str, LinearTerm]) -> Formula:
        t = self.term.substitute(mapping)
        if t is self.term:
            return self
        return make_atom(self.kind, t, self.divisor)


def _lits(f: Formula) -> tuple[Atom, ...]:
    # Used only by Atom.negated where the result of negation cannot be FALSE
    # unless the atom was TRUE, which normalised atoms never are.
    if isinstance(f, Atom):
        return (f,)
    if f is TRUE:
        return ()
    raise AssertionError("negation of a normalised atom collapsed to FALSE")


def _gcd_coeffs(coeffs) -> int:
    g = 0
    for _, c in coeffs:
        g = math.gcd(g, c)
    return g


def make_atom(kind: str, term: LinearTerm, divisor: int = 0) -> Formula:
    if kind == LE:
        if not term.coeffs:
            return TRUE if term.const <= 0 else FALSE
        g = _gcd_coeffs(term.coeffs)
        if g > 1:
            term = LinearTerm(((v, c // g) for v, c in term.coeffs), -((-term.const) // g))
        return Atom(LE, term)
    if kind == EQ:
        if not term.coeffs:
            return TRUE if term.const == 0 else FALSE
        g = _gcd_coeffs(term.coeffs)
        if term.const % g:
            return FALSE
        if g > 1:
            term = LinearTerm(((v, c // g) for v, c in term.coeffs), term.const // g)
        if term.coeffs[0][1] < 0:
            term = -term
        return Atom(EQ, term)
    if kind in (DIV, NDIV):
        d = abs(divisor)
        if d == 0:
            raise ValueError("divisor must be nonzero")
        positive = kind == DIV
        if d == 1:
            return TRUE if positive else FALSE
        coeffs = [(v, c % d) for v, c in term.coeffs]
        coeffs = [(v, c) for v, c in coeffs if c]
        const = term.const % d
        if not coeffs:
            return TRUE if (const == 0) == positive else FALSE
        g = math.gcd(d, _gcd_coeffs(coeffs))
        if const % g:
            return FALSE if positive else TRUE
        if g > 1:
            d //= g
            coeffs = [(v, c // g) for v, c in coeffs]
            const //= g
        if d == 1:
            return TRUE if positive else FALSE
        return Atom(kind, LinearTerm(coeffs, const), d)
    raise ValueError(f"unknown atom kind {kind!r}")


class Not(Formula):
    __slots__ = ("arg",)

    def __init__(self, arg: Formula):
        _init(self, arg=arg)

    def _key(self):
        return self.arg


class And(Formula):
    __slots__ = ("args",)

    def __init__(self, args: tuple[Formula, ...]):
        _init(self, args=tuple(args))

    def _key(self):
        return self.args


class Or(Formula):
    __slots__ = ("args",)

    def __init__(self, args: tuple[Formula, ...]):
        _init(self, args=tuple(args))

    def _key(self):
        return self.args


class Implies(Formula):
    __slots__ = ("lhs", "rhs")

    def __init__(self, lhs: Formula, rhs: Formula):
        _init(self, lhs=lhs, rhs=rhs)

    def _key(self):
        return (self.lhs, self.rhs)


class Exists(Formula):
    __slots__ = ("var", "body")

    def __init__(self, var: str, body: Formula):
        _init(self, var=var, body=body)

    def _key(self):
        return (self.var, self.body)


class Forall(Formula):
    __slots__ = ("var", "body")

    def __init__(self, var: str, body: Formula):
        _init(self, var=var, body=body)

    def _key(self):
        return (self.var, self.body)


# --------------------------------------------------------------------------
# builders


def le(lhs: TermLike, rhs: TermLike = 0) -> Formula:
    """``lhs <= rhs``."""
    return make_atom(LE, as_term(lhs) - as_term(rhs))


def lt(lhs: TermLike, rhs: TermLike = 0) -> Formula:
    return make_atom(LE, as_term(lhs) - as_term(rhs) + 1)


def ge(lhs: TermLike, rhs: TermLike = 0) -> Formula:
    return le(rhs, lhs)


def gt(lhs: TermLike, rhs: TermLike = 0) -> Formula:
    return lt(rhs, lhs)


def eq(lhs: TermLike, rhs: TermLike = 0) -> Formula:
    return make_atom(EQ, as_term(lhs) - as_term(rhs))


def ne(lhs: TermLike, rhs: TermLike = 0) -> Formula:
    t = as_term(lhs) - as_term(rhs)
    return disj(make_atom(LE, t + 1), make_atom(LE, -t + 1))


def divides(d: int, t: TermLike) -> Formula:
    return make_atom(DIV, as_term(t), d)


def conj(*args: Formula) -> Formula:
    out: list[Formula] = []
    for a in args:
        if a is FALSE or a == FALSE:
            return FALSE
        if a is TRUE or a == TRUE:
            continue
        if isinstance(a, And):
            out.extend(a.args)
        else:
            out.append(a)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(*args: Formula) -> Formula:
    out: list[Formula] = []
    for a in args:
        if a is TRUE or a == TRUE:
            return TRUE
        if a is FALSE or a == FALSE:
            continue
        if isinstance(a, Or):
            out.extend(a.args)
        else:
            out.append(a)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def neg(f: Formula) -> Formula:
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    return Implies(a, b)


def exists(vars: str | Iterable[str], body: Formula) -> Formula:
    if isinstance(vars, str):
        vars = [vars]
    for v in reversed(list(vars)):
        body = Exists(v, body)
    return body


def forall(vars: str | Iterable[str], body: Formula) -> Formula:
    if isinstance(vars, str):
        vars = [vars]
    for v in reversed(list(vars)):
        body = Forall(v, body)
    return body


# --------------------------------------------------------------------------
# traversal


def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return f.variables
    if isinstance(f, _Const):
        return frozenset()
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for a in f.args:
            out |= free_vars(a)
        return frozenset(out)
    if isinstance(f, Implies):
        return free_vars(f.lhs) | free_vars(f.rhs)
    if isinstance(f, (Exists, Forall)):
        return free_vars(f.body) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def all_vars(f: Formula) -> frozenset[str]:
    """Free and bound variable names."""
    if isinstance(f, (Exists, Forall)):
        return all_vars(f.body) | {f.var}
    if isinstance(f, Not):
        return all_vars(f.arg)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for a in f.args:
            out |= all_vars(a)
        return frozenset(out)
    if isinstance(f, Implies):
        return all_vars(f.lhs) | all_vars(f.rhs)
    return free_vars(f)


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, (Exists, Forall)):
        return False
    if isinstance(f, Not):
        return is_quantifier_free(f.arg)
    if isinstance(f, (And, Or)):
        return all(is_quantifier_free(a) for a in f.args)
    if isinstance(f, Implies):
        return is_quantifier_free(f.lhs) and is_quantifier_free(f.rhs)
    return True


def substitute(f: Formula, renaming: Mapping[str, TermLike]) -> Formula:
    """Capture-avoiding substitution of variables by variables or terms."""
    mapping = {v: as_term(t) for v, t in renaming.items()}
    mapping = {v: t for v, t in mapping.items() if t != LinearTerm.var(v)}
    if not mapping:
        return f
    return _subst(f, mapping)


def _subst(f: Formula, mapping: dict[str, LinearTerm]) -> Formula:
    if not mapping:
        return f
    if isinstance(f, Atom):
        return f.substitute(mapping)
    if isinstance(f, _Const):
        return f
    if isinstance(f, Not):
        return neg(_subst(f.arg, mapping))
    if isinstance(f, And):
        return conj(*(_subst(a, mapping) for a in f.args))
    if isinstance(f, Or):
        return disj(*(_subst(a, mapping) for a in f.args))
    if isinstance(f, Implies):
        return Implies(_subst(f.lhs, mapping), _subst(f.rhs, mapping))
    if isinstance(f, (Exists, Forall)):
        inner = {v: t for v, t in mapping.items() if v != f.var}
        body_free = free_vars(f.body)
        inner = {v: t for v, t in inner.items() if v in body_free}
        if not inner:
            return f
        incoming = set()
        for t in inner.values():
            incoming |= t.variables
        var, body = f.var, f.body
        if var in incoming:
            new = fresh_name(var, all_vars(body) | incoming | set(inner))
            body = _subst(body, {var: LinearTerm.var(new)})
            var = new
        return type(f)(var, _subst(body, inner))
    raise TypeError(f"not a formula: {f!r}")


def rename(f: Formula, renaming: Mapping[str, str]) -> Formula:
    return substitute(f, {v: LinearTerm.var(w) for v, w in renaming.items()})


def atoms_of(f: Formula) -> list[Atom]:
    if isinstance(f, Atom):
        return [f]
    if isinstance(f, Not):
        return atoms_of(f.arg)
    if isinstance(f, (And, Or)):
        return [a for x in f.args for a in atoms_of(x)]
    if isinstance(f, Implies):
        return atoms_of(f.lhs) + atoms_of(f.rhs)
    if isinstance(f, (Exists, Forall)):
        return atoms_of(f.body)
    return []


def size(f: Formula) -> int:
    if isinstance(f, Not):
        return 1 + size(f.arg)
    if isinstance(f, (And, Or)):
        return 1 + sum(size(a) for a in f.args)
    if isinstance(f, Implies):
        return 1 + size(f.lhs) + size(f.rhs)
    if isinstance(f, (Exists, Forall)):
        return 1 + size(f.body)
    return 1


def eval_qf(f: Formula, env: Mapping[str, int]) -> bool:
    """Truth value of a quantifier-free formula."""
    if isinstance(f, Atom):
        return f.holds(env)
    if isinstance(f, _Const):
        return f.value
    if isinstance(f, Not):
        return not eval_qf(f.arg, env)
    if isinstance(f, And):
        return all(eval_qf(a, env) for a in f.args)
    if isinstance(f, Or):
        return any(eval_qf(a, env) for a in f.args)
    if isinstance(f, Implies):
        return (not eval_qf(f.lhs, env)) or eval_qf(f.rhs, env)
    raise TypeError("quantified formula passed to eval_qf")


def term_text(t: LinearTerm) -> str:
    parts = []
    for v, c in t.coeffs:
        if c == 1:
            s = v
        elif c == -1:
            s = f"-{v}"
        else:
            s = f"{c}*{v}"
        parts.append(s)
    if t.const or not parts:
        parts.append(str(t.const))
    out = parts[0]
    for p in parts[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out
