"""Small helpers shared by the test modules."""

from __future__ import annotations

from pathlib import Path

from counterctl.presburger import equivalent, parse_formula
from counterctl.sysfile import load_system, parse_system

ROOT = Path(__file__).resolve().parent.parent
RUNNING_EXAMPLE = ROOT / "scripts" / "running_example.sys"


def f(text: str):
    """Shorthand for parsing a formula in test bodies."""
    return parse_formula(text)


def same(a, b) -> bool:
    """Semantic equality of two formulas (entailment both ways)."""
    return equivalent(a, b)


def system(text: str):
    return parse_system(text)


def running_example():
    return load_system(RUNNING_EXAMPLE)
