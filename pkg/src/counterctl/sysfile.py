"""Plain-text system files.

Example::

    # running example
    counters x;
    controls 0..0;
    init: x = 0;
    transition t0 from 0 to 0 guard x >= 0 && x < 100 action x' = x + 1;
    transition t1 from 0 to 0 guard x > 0 && x < 5 action x' = x - 1;
    reach: 0 <= x <= 100 && q = 0 exact;

``nat counters a, b;`` declares counters that range over the naturals.
``guard`` and ``action`` are optional; the action is a comma-separated list
of formulas whose conjunction relates primed and unprimed counters.
"""

from __future__ import annotations

import itertools
from pathlib import Path
from typing import Optional

from .presburger import TRUE, conj, simplify, to_text
from .presburger.qe import from_dnf, to_dnf
from .presburger.syntax import ParseError, Parser, tokenize
from .system import (
    CounterSystem,
    SystemValidationError,
    _counter_only,
    make_system,
)


def parse_system(text: str) -> CounterSystem:
    p = Parser(text, tokenize(text))
    counters: list[str] = []
    nat: list[str] = []
    controls: Optional[list[int]] = None
    init = TRUE
    reach = None
    reach_tag = "absent"
    transitions = []
    seen_ids: set[str] = set()
    where: dict[str, int] = {}  # declaration keyword -> source offset
    while not p.at_end():
        tok = p.tok
        word = tok.text
        if word == "nat":
            p.i += 1
            if p.tok.text != "counters":
                raise p.error("expected 'counters' after 'nat'")
        if p.tok.text == "counters":
            p.i += 1
            names = [p.ident()]
            while p.accept(","):
                names.append(p.ident())
            for n in names:
                if n in counters:
                    raise p.error(f"counter {n!r} declared twice", tok)
                if n == "q" or "'" in n:
                    raise p.error(f"invalid counter name {n!r}", tok)
            counters.extend(names)
            if word == "nat":
                nat.extend(names)
        elif word == "controls":
            where["control"] = tok.pos
            p.i += 1
            lo = p.integer()
            if p.accept("."):
                p.expect(".")
                hi = p.integer()
                controls = list(range(lo, hi + 1))
            else:
                controls = [lo]
                while p.accept(","):
                    controls.append(p.integer())
            if not controls:
                raise p.error("empty control set", tok)
        elif word == "init":
            where["init"] = tok.pos
            p.i += 1
            p.expect(":")
            init = p.formula()
        elif word == "reach":
            where["reach"] = tok.pos
            p.i += 1
            p.expect(":")
            reach = p.formula()
            if p.tok.text in ("exact", "over", "under"):
                reach_tag = p.tok.text
                p.i += 1
            else:
                reach_tag = "exact"
        elif word == "transition":
            p.i += 1
            tid = p.ident()
            if tid in seen_ids:
                raise p.error(f"transition {tid!r} declared twice", tok)
            seen_ids.add(tid)
            p.expect("from")
            src = p.integer()
            p.expect("to")
            tgt = p.integer()
            guard = TRUE
            action = TRUE
            if p.accept("guard"):
                guard = p.formula()
            if p.accept("action"):
                parts = [p.formula()]
                while p.accept(","):
                    parts.append(p.formula())
                action = conj(*parts)
            transitions.append((tid, src, tgt, guard, action, tok))
        else:
            raise p.error(f"unexpected {word!r}")
        p.expect(";")
    if not counters and not transitions:
        raise ParseError("empty system", 1, 1)
    if controls is None:
        raise ParseError("missing 'controls' declaration", 1, 1)
    try:
        return make_system(
            controls,
            counters,
            [t[:5] for t in transitions],
            init=init,
            reach_hint=reach,
            reach_tag=reach_tag,
            nat=nat,
        )
    except SystemValidationError as e:
        # attribute the error to the offending transition when possible
        for t in transitions:
            if f"transition {t[0]}:" in str(e) or f"transition {t[0]} " in str(e):
                line, col = _pos(text, t[5].pos)
                raise ParseError(str(e), line, col) from None
        for key, pos in where.items():
            if str(e).startswith(key) or f" {key} " in str(e):
                line, col = _pos(text, pos)
                raise ParseError(str(e), line, col) from None
        raise ParseError(str(e), 1, 1) from None


def _pos(text, pos):
    from .presburger.syntax import line_col

    return line_col(text, pos)


def load_system(path) -> CounterSystem:
    return parse_system(Path(path).read_text())


def action_text(t) -> str:
    d = _counter_only(to_dnf(t.action), t.source, t.target)
    return to_text(from_dnf(d))


def guard_text(t) -> str:
    return to_text(simplify(from_dnf(t.guard_c)))


def print_system(M: CounterSystem, controls=None, edges=None) -> str:
    """Render ``M`` in the file format.

    ``controls``/``edges`` override the control graph (used to dump
    flattenings, whose locations are copies of ``M``'s controls); each edge is
    ``(name, src, dst, transition)``.
    """
    lines = []
    # consecutive runs keep the declaration order of the counters
    for is_nat, run in itertools.groupby(M.counters, key=lambda c: c in M.nat):
        lines.append(f"{'nat ' if is_nat else ''}counters {', '.join(run)};")
    ctrls = list(M.controls if controls is None else controls)
    if ctrls == list(range(ctrls[0], ctrls[-1] + 1)):
        lines.append(f"controls {ctrls[0]}..{ctrls[-1]};")
    else:
        lines.append(f"controls {', '.join(map(str, ctrls))};")
    lines.append(f"init: {to_text(M.init)};")
    if edges is None:
        edges = [(t.id, t.source, t.target, t) for t in M.transitions]
    for name, src, dst, t in edges:
        lines.append(
            f"transition {name} from {src} to {dst} guard {guard_text(t)} action {action_text(t)};"
        )
    if M.reach_hint is not None and M.reach_tag != "absent":
        lines.append(f"reach: {to_text(M.reach_hint)} {M.reach_tag};")
    return "\n".join(lines) + "\n"
