"""Command-line front end.

Example::

    python3 -m counterctl --system running.sys --prop "EG (x < 10)"

Exit status: 0 precise, 10 under, 11 over, 2 error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, TextIO

from .core import OVER, PRECISE, UNDER, ApproxLabel, Budget, BudgetExceededPrecise, CheckResult
from .ctl import parse_property, prepare, sat
from .flatten import enumerate_flattenings
from .presburger import ParseError, simplify, to_text
from .sysfile import load_system, print_system
from .system import join, refine

EXIT = {PRECISE: 0, UNDER: 10, OVER: 11}
EXIT_ERROR = 2


@dataclass
class RunConfig:
    system_path: str
    prop: str
    label: ApproxLabel = PRECISE
    engine: str = "auto"
    timeout: Optional[float] = None
    max_iterations: Optional[int] = None
    max_flat_length: Optional[int] = None
    qe_node_limit: Optional[int] = None
    format: str = "human"
    dump_refined: bool = False
    dump_flattenings: Optional[int] = None
    dump_iterations: bool = False

    def __post_init__(self):
        if self.timeout is not None and self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.engine not in ("auto", "under", "over"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.format not in ("human", "record"):
            raise ValueError(f"unknown format {self.format!r}")

    def budget(self) -> Budget:
        return Budget(
            max_iterations=self.max_iterations,
            wall_clock=self.timeout,
            qe_node_limit=self.qe_node_limit,
            max_flat_length=self.max_flat_length,
        )


def _parts_text(parts) -> str:
    return to_text(simplify(join({c: d for c, d in parts.items() if d})))


class Dumper:
    """Observer writing debugging artifacts for each EG evaluation."""

    def __init__(self, cfg: RunConfig, out: TextIO):
        self.cfg = cfg
        self.out = out

    def __call__(self, event: str, **info):
        M, phi = info["system"], info["phi"]
        if event == "eg-start":
            if self.cfg.dump_refined:
                self.out.write(f"# refined system for EG ({to_text(simplify(phi))})\n")
                self.out.write(print_system(refine(M, phi)))
            if self.cfg.dump_flattenings:
                n = self.cfg.dump_flattenings
                fs = enumerate_flattenings(refine(M, phi), n)
                self.out.write(f"# {len(fs)} flattenings of length {n}\n")
                for i, f in enumerate(fs):
                    self.out.write(f"# flattening {i}\n{f.to_text()}")
        elif event == "eg-done" and self.cfg.dump_iterations:
            res: CheckResult = info["result"]
            for h in res.stats.history:
                if "Y" in h:
                    self.out.write(f"# iteration {h['iteration']}: Y = {_parts_text(h['Y'])}\n")
                    self.out.write(f"#   grow1 = {_parts_text(h['grow1'])}\n")
                    self.out.write(f"#   grow2 = {_parts_text(h['grow2'])}\n")
                else:
                    self.out.write(
                        f"# flattening {h['flattening']} (length {h['length']}, {h['check']}): "
                        f"X = {_parts_text(h['X'])}\n"
                    )


def run(cfg: RunConfig, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    t0 = time.monotonic()
    try:
        M = load_system(cfg.system_path)
        prop_text = cfg.prop
        if Path(prop_text).is_file():
            prop_text = Path(prop_text).read_text()
        psi = parse_property(prop_text)
    except ParseError as e:
        err.write(f"error: {e}\n")
        return EXIT_ERROR
    except OSError as e:
        err.write(f"error: {e}\n")
        return EXIT_ERROR
    budget = cfg.budget().start()
    dumping = cfg.dump_refined or cfg.dump_flattenings or cfg.dump_iterations
    try:
        P = prepare(M, budget)
        res = sat(P, psi, cfg.label, budget, engine=cfg.engine, observer=Dumper(cfg, err) if dumping else None)
    except BudgetExceededPrecise as e:
        err.write(f"error: no precise result within the time limit ({e})\n")
        _report(cfg, out, None, t0, EXIT_ERROR)
        return EXIT_ERROR
    code = EXIT[res.label]
    _report(cfg, out, res, t0, code)
    return code


def _report(cfg: RunConfig, out: TextIO, res: Optional[CheckResult], t0: float, code: int) -> None:
    rt_ms = int(round((time.monotonic() - t0) * 1000))
    if res is None:
        fields = {"formula": "", "label": "none", "rt_ms": rt_ms, "fl": 0, "nfe": 0, "ni": 0, "reach_tag": "", "exit": code}
    else:
        s = res.stats
        fields = {
            "formula": to_text(simplify(res.formula)),
            "label": str(res.label),
            "rt_ms": rt_ms,
            "fl": s.max_flat_length,
            "nfe": s.flattenings_explored,
            "ni": s.iterations,
            "reach_tag": s.reach_tag,
            "exit": code,
        }
    if cfg.format == "record":
        for k, v in fields.items():
            out.write(f"{k}={v}\n")
        return
    if res is None:
        out.write("no result\n")
        return
    out.write(f"{fields['formula']}\n")
    out.write(f"label: {fields['label']}\n")
    out.write(
        f"RT={rt_ms} ms  FL={fields['fl']}  NFE={fields['nfe']}  NI={fields['ni']}  reach={fields['reach_tag']}\n"
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="counterctl", description="CTL model checking of counter systems.")
    p.add_argument("--system", required=True, help="system file")
    p.add_argument("--prop", required=True, help="property text or a file containing it")
    p.add_argument("--label", default="precise", choices=["precise", "under", "over"])
    p.add_argument("--engine", default="auto", choices=["auto", "under", "over"])
    p.add_argument("--timeout", type=float, help="wall clock in seconds")
    p.add_argument("--max-iters", type=int, dest="max_iterations")
    p.add_argument("--max-flat-len", type=int, dest="max_flat_length")
    p.add_argument("--qe-node-limit", type=int)
    p.add_argument("--format", default="human", choices=["human", "record"])
    p.add_argument("--dump-refined", action="store_true", help="print refined systems to stderr")
    p.add_argument(
        "--dump-flattenings",
        type=int,
        nargs="?",
        const=2,
        metavar="LEN",
        help="print the flattenings of length LEN (default 2) to stderr",
    )
    p.add_argument("--dump-iterations", action="store_true", help="print per-iteration sets to stderr")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = RunConfig(
            system_path=args.system,
            prop=args.prop,
            label=ApproxLabel.parse(args.label),
            engine=args.engine,
            timeout=args.timeout,
            max_iterations=args.max_iterations,
            max_flat_length=args.max_flat_length,
            qe_node_limit=args.qe_node_limit,
            format=args.format,
            dump_refined=args.dump_refined,
            dump_flattenings=args.dump_flattenings,
            dump_iterations=args.dump_iterations,
        )
        cfg.budget()
    except ValueError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_ERROR
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
