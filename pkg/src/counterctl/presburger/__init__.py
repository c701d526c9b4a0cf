"""Presburger formulas and their decision procedures."""

from .formula import (
    CONTROL,
    DIV,
    EQ,
    FALSE,
    LE,
    NDIV,
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
    UnboundVariable,
    all_vars,
    as_term,
    conj,
    disj,
    divides,
    eq,
    eval_qf,
    exists,
    forall,
    free_vars,
    fresh_name,
    ge,
    gt,
    implies,
    is_quantifier_free,
    le,
    lt,
    ne,
    neg,
    prime_count,
    primed,
    rename,
    size,
    substitute,
    unprimed,
)
from .dnf import ResourceExhausted, limits
from .qe import (
    eliminate_quantifiers,
    entails,
    equivalent,
    evaluate,
    from_dnf,
    is_satisfiable,
    is_valid,
    mk_and,
    mk_diff,
    mk_exists,
    mk_forall,
    mk_not,
    mk_or,
    mk_subst,
    simplify,
    state_env,
    to_dnf,
    witness,
)
from .syntax import ParseError, Parser, parse_formula, parse_term, to_text

__all__ = [name for name in dir() if not name.startswith("_")]
