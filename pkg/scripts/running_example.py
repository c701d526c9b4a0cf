"""Check EG (x < 10) on the running example with both engines.

    python3 scripts/running_example.py

Prints the answer, label and statistics of each engine, then the
intermediate sets: Y per iteration for the over engine and the
flattenings tried by the under engine.
"""

from __future__ import annotations

import sys
from pathlib import Path

from counterctl import ctl as C
from counterctl.core import PRECISE, Budget
from counterctl.presburger import mk_and, parse_formula
from counterctl.sysfile import load_system
from counterctl.system import join

HERE = Path(__file__).resolve().parent


def main() -> int:
    M = load_system(HERE / "running_example.sys")
    P = C.prepare(M)
    psi = C.parse_property("EG (x < 10)")
    q0 = parse_formula("q = 0")
    print(f"system: {HERE / 'running_example.sys'}")
    print(f"reach ({P.reach_tag}): {P.reach}")
    for engine in ("under", "over"):
        r = C.sat(P, psi, PRECISE, Budget(wall_clock=10), engine=engine)
        s = r.stats
        print(f"\n{engine} engine: {r.formula}")
        print(f"  label {r.label}, {s.elapsed * 1000:.0f} ms, FL={s.max_flat_length} NFE={s.flattenings_explored} NI={s.iterations}")
        for h in s.history:
            if engine == "over":
                print(f"  iteration {h['iteration']}: Y = {mk_and(join(h['Y']), q0)}")
            else:
                print(f"  flattening {h['flattening']} (length {h['length']}): {h['check']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
