"""Shared result types: approximation labels, budgets, statistics."""

from __future__ import annotations

import contextlib
import enum
import time
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from .presburger import Formula, limits


class LabelConflict(RuntimeError):
    """A join of ``over`` and ``under`` was requested."""


class BudgetExceededPrecise(RuntimeError):
    """The global wall clock expired while a precise answer was required."""


class ApproxLabel(enum.Enum):
    UNDER = "under"
    PRECISE = "precise"
    OVER = "over"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text: str) -> "ApproxLabel":
        return cls(text.strip().lower())

    def leq(self, other: "ApproxLabel") -> bool:
        """Lattice order: precise is below both under and over."""
        return self is other or self is ApproxLabel.PRECISE


UNDER = ApproxLabel.UNDER
PRECISE = ApproxLabel.PRECISE
OVER = ApproxLabel.OVER


def lattice_join(a: ApproxLabel, b: ApproxLabel) -> ApproxLabel:
    if a is PRECISE:
        return b
    if b is PRECISE or a is b:
        return a
    raise LabelConflict(f"join of {a} and {b} is undefined")


def lattice_negate(a: ApproxLabel) -> ApproxLabel:
    if a is UNDER:
        return OVER
    if a is OVER:
        return UNDER
    return PRECISE


@dataclass
class Budget:
    """Resource limits for one query.

    ``deadline`` bounds the current call; ``global_deadline`` is the wall
    clock of the whole run and survives :meth:`share` and
    :meth:`unbounded`.
    """

    max_iterations: Optional[int] = None
    wall_clock: Optional[float] = None
    qe_node_limit: Optional[int] = None
    max_flat_length: Optional[int] = None
    deadline: Optional[float] = None
    global_deadline: Optional[float] = None

    def __post_init__(self):
        for name in ("max_iterations", "wall_clock", "qe_node_limit", "max_flat_length"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")

    def start(self) -> "Budget":
        """Copy with absolute deadlines fixed from now."""
        if self.deadline is not None:
            return self
        dl = None if self.wall_clock is None else time.monotonic() + self.wall_clock
        gd = self.global_deadline if self.global_deadline is not None else dl
        return replace(self, deadline=dl, global_deadline=gd)

    def remaining(self) -> Optional[float]:
        if self.deadline is None:
            return None
        return self.deadline - time.monotonic()

    def expired(self) -> bool:
        return self.deadline is not None and time.monotonic() > self.deadline

    def global_expired(self) -> bool:
        return self.global_deadline is not None and time.monotonic() > self.global_deadline

    def iterations_exhausted(self, i: int) -> bool:
        return self.max_iterations is not None and i >= self.max_iterations

    def qe(self):
        """Context installing the QE node/time limits of this budget."""
        return limits(node_limit=self.qe_node_limit, deadline=self.deadline)

    def share(self, fraction: float) -> "Budget":
        """Child budget with a proportional slice of the remaining time."""
        b = self.start()
        if b.deadline is None:
            return b
        rem = max(0.0, b.deadline - time.monotonic())
        return replace(b, deadline=time.monotonic() + rem * fraction)

    def unbounded(self) -> "Budget":
        """Only the global wall clock remains; used for precise requests."""
        b = self.start()
        return Budget(deadline=b.global_deadline, global_deadline=b.global_deadline)


@dataclass
class Stats:
    iterations: int = 0
    flattenings_explored: int = 0
    max_flat_length: int = 0
    not_accelerable: int = 0
    qe_nodes: int = 0
    elapsed: float = 0.0
    reach_tag: str = ""
    notes: list[str] = field(default_factory=list)
    history: list[dict[str, Any]] = field(default_factory=list)

    def merge(self, other: "Stats") -> "Stats":
        self.iterations += other.iterations
        self.flattenings_explored += other.flattenings_explored
        self.max_flat_length = max(self.max_flat_length, other.max_flat_length)
        self.not_accelerable += other.not_accelerable
        self.qe_nodes += other.qe_nodes
        self.notes.extend(other.notes)
        self.history.extend(other.history)
        return self


@dataclass
class CheckResult:
    formula: Formula
    label: ApproxLabel
    stats: Stats = field(default_factory=Stats)

    @property
    def precise(self) -> bool:
        return self.label is PRECISE


@contextlib.contextmanager
def timed(stats: Stats):
    t0 = time.monotonic()
    try:
        yield stats
    finally:
        stats.elapsed += time.monotonic() - t0
