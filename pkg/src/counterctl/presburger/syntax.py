"""Text syntax for Presburger formulas.

Grammar, loosest binding first::

    formula  := disj ('=>' formula)?
    disj     := conj ('||' conj)*
    conj     := unary ('&&' unary)*
    unary    := '!' unary | quant | '(' formula ')' | 'true' | 'false' | chain
    quant    := ('exists' | 'forall') ident (',' ident)* '.' unary
    chain    := term (cmp term)+ | INT '|' term
    term     := ['-'] product (('+' | '-') product)*

Products must be linear: one side of every ``*`` is an integer literal.
A parenthesis at the start of ``unary`` may open either a formula or a
term; the parser tries the formula reading first and backtracks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .formula import (
    FALSE,
    TRUE,
    And,
    Atom,
    Exists,
    Forall,
    Formula,
    Implies,
    LinearTerm,
    Not,
    Or,
    _Const,
    DIV,
    EQ,
    NDIV,
    conj,
    disj,
    divides,
    eq,
    exists,
    forall,
    fresh_name,
    ge,
    gt,
    le,
    lt,
    ne,
    neg,
    substitute,
    term_text,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*'*)
  | (?P<op><=|>=|!=|==|=>|->|&&|\|\||[-+*<>=!|().,\[\];:])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            line, col = line_col(text, pos)
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, m.group(), pos))
        pos = m.end()
    out.append(Token("eof", "", len(text)))
    return out


def line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


_CMP = {"<=", "<", ">=", ">", "=", "==", "!="}
_KEYWORDS = {"exists", "forall", "true", "false"}


class Parser:
    """Recursive-descent parser over a token list.

    Also used by the system-file and property parsers, which share the
    tokenizer and call :meth:`formula` for embedded formulas.
    """

    def __init__(self, text: str, tokens: list[Token] | None = None):
        self.text = text
        self.toks = tokens if tokens is not None else tokenize(text)
        self.i = 0
        self.bound: list[str] = []

    # -- helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        line, col = line_col(self.text, tok.pos)
        return ParseError(msg, line, col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind != "eof":
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in _KEYWORDS:
            raise self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "int":
            raise self.error(f"expected integer, found {t.text or 'end of input'!r}")
        self.i += 1
        return int(t.text)

    def at_end(self) -> bool:
        return self.tok.kind == "eof"

    # -- formulas
    def formula(self) -> Formula:
        lhs = self.disj()
        if self.tok.text in ("=>", "->"):
            self.i += 1
            rhs = self.formula()
            return Implies(lhs, rhs)
        return lhs

    def disj(self) -> Formula:
        args = [self.conj()]
        while self.accept("||"):
            args.append(self.conj())
        return args[0] if len(args) == 1 else disj(*args)

    def conj(self) -> Formula:
        args = [self.unary()]
        while self.accept("&&"):
            args.append(self.unary())
        return args[0] if len(args) == 1 else conj(*args)

    def unary(self) -> Formula:
        t = self.tok
        if t.text == "!":
            self.i += 1
            return neg(self.unary())
        if t.text in ("exists", "forall"):
            return self.quant()
        if t.text == "true":
            self.i += 1
            return TRUE
        if t.text == "false":
            self.i += 1
            return FALSE
        if t.text == "(":
            save = self.i
            self.i += 1
            try:
                f = self.formula()
                self.expect(")")
            except ParseError as first:
                self.i = save
                try:
                    return self.chain()
                except ParseError as second:
                    # report whichever reading got further
                    if (first.line, first.column) > (second.line, second.column):
                        raise first from None
                    raise
            if self.tok.text in _CMP or self.tok.text in ("+", "-", "*"):
                # "(x + 1) <= y": the parenthesis was a term after all
                self.i = save
                return self.chain()
            return f
        return self.chain()

    def quant(self) -> Formula:
        kind = self.tok.text
        self.i += 1
        names = [self.ident()]
        while self.accept(","):
            names.append(self.ident())
        self.expect(".")
        renames = {}
        for n in names:
            if n in self.bound:
                renames[n] = fresh_name(n, self.bound)
        self.bound.extend(renames.get(n, n) for n in names)
        try:
            body = self.unary()
        finally:
            del self.bound[len(self.bound) - len(names) :]
        if renames:
            body = substitute(body, renames)
            names = [renames.get(n, n) for n in names]
        return exists(names, body) if kind == "exists" else forall(names, body)

    def chain(self) -> Formula:
        start = self.tok
        if start.kind == "int" and self.peek().text == "|":
            d = self.integer()
            self.expect("|")
            if d <= 0:
                raise self.error("divisor must be positive", start)
            return divides(d, self.term())
        lhs = self.term()
        if self.tok.text not in _CMP:
            raise self.error(f"expected comparison, found {self.tok.text or 'end of input'!r}")
        parts = []
        while self.tok.text in _CMP:
            op = self.tok.text
            self.i += 1
            rhs = self.term()
            parts.append(_compare(op, lhs, rhs))
            lhs = rhs
        return conj(*parts)

    # -- terms
    def term(self) -> LinearTerm:
        if self.accept("-"):
            acc = -self.product()
        else:
            self.accept("+")
            acc = self.product()
        while self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            p = self.product()
            acc = acc + p if op == "+" else acc - p
        return acc

    def product(self) -> LinearTerm:
        start = self.tok
        acc = self.atom_term()
        while self.accept("*"):
            rhs = self.atom_term()
            if acc.is_constant():
                acc = rhs.scale(acc.const)
            elif rhs.is_constant():
                acc = acc.scale(rhs.const)
            else:
                raise self.error("nonlinear product", start)
        return acc

    def atom_term(self) -> LinearTerm:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return LinearTerm.constant(int(t.text))
        if t.text == "-":
            self.i += 1
            return -self.atom_term()
        if t.text == "(":
            self.i += 1
            inner = self.term()
            self.expect(")")
            return inner
        return LinearTerm.var(self.ident())


def _compare(op: str, a: LinearTerm, b: LinearTerm) -> Formula:
    if op == "<=":
        return le(a, b)
    if op == "<":
        return lt(a, b)
    if op == ">=":
        return ge(a, b)
    if op == ">":
        return gt(a, b)
    if op in ("=", "=="):
        return eq(a, b)
    return ne(a, b)


def parse_formula(text: str) -> Formula:
    p = Parser(text)
    f = p.formula()
    if not p.at_end():
        raise p.error(f"unexpected {p.tok.text!r}")
    return f


def parse_term(text: str) -> LinearTerm:
    p = Parser(text)
    t = p.term()
    if not p.at_end():
        raise p.error(f"unexpected {p.tok.text!r}")
    return t


# --------------------------------------------------------------------------
# printing

_PREC_IMPL, _PREC_OR, _PREC_AND, _PREC_UNARY = range(4)


def atom_text(a: Atom) -> str:
    t = a.term
    if a.kind in (DIV, NDIV):
        s = f"{a.divisor} | {term_text(t)}"
        return s if a.kind == DIV else f"!({s})"
    pos = LinearTerm(((v, c) for v, c in t.coeffs if c > 0))
    negs = LinearTerm(((v, -c) for v, c in t.coeffs if c < 0))
    if a.kind == EQ:
        pivots = [v for v, c in t.coeffs if abs(c) == 1 and v.endswith("'")]
        if pivots:
            v = pivots[0]
            rest = t.without(v).scale(-t.coeff(v))
            return f"{v} = {term_text(rest)}"
        if negs.is_constant():
            return f"{term_text(pos)} = {-t.const}"
        return f"{term_text(pos)} = {term_text(negs - t.const)}"
    # pos - negs + const <= 0
    if pos.is_constant():
        return f"{term_text(negs)} >= {t.const}"
    if negs.is_constant():
        return f"{term_text(pos)} <= {-t.const}"
    return f"{term_text(pos)} <= {term_text(negs - t.const)}"


def to_text(f: Formula) -> str:
    return _text(f, _PREC_IMPL)


def _paren(s: str, inner: int, outer: int) -> str:
    return f"({s})" if inner < outer else s


def _text(f: Formula, ctx: int) -> str:
    if isinstance(f, _Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return atom_text(f)
    if isinstance(f, Not):
        if isinstance(f.arg, Atom):
            return f"!({atom_text(f.arg)})"
        return "!" + _text(f.arg, _PREC_UNARY)
    if isinstance(f, And):
        s = " && ".join(_text(a, _PREC_AND + 1) for a in f.args)
        return _paren(s, _PREC_AND, ctx)
    if isinstance(f, Or):
        s = " || ".join(_text(a, _PREC_OR + 1) for a in f.args)
        return _paren(s, _PREC_OR, ctx)
    if isinstance(f, Implies):
        s = f"{_text(f.lhs, _PREC_OR)} => {_text(f.rhs, _PREC_IMPL)}"
        return _paren(s, _PREC_IMPL, ctx)
    if isinstance(f, (Exists, Forall)):
        kw = "exists" if isinstance(f, Exists) else "forall"
        return f"{kw} {f.var}. ({_text(f.body, _PREC_IMPL)})"
    raise TypeError(f"not a formula: {f!r}")
