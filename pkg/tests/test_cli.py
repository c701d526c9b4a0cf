"""Command-line front end: reports, exit codes, debugging dumps."""

import io
import re
import subprocess
import sys

import pytest

from counterctl.cli import RunConfig, main, run
from counterctl.core import PRECISE, UNDER, OVER
from counterctl.flatten import canonical
from counterctl.presburger import entails, mk_and, parse_formula
from counterctl.sysfile import parse_system
from helpers import ROOT, f, same


def invoke(path, prop, **kw):
    out, err = io.StringIO(), io.StringIO()
    code = run(RunConfig(system_path=str(path), prop=prop, **kw), out, err)
    return code, out.getvalue(), err.getvalue()


def record(text) -> dict:
    return dict(line.split("=", 1) for line in text.strip().splitlines())


def test_running_example(running_path):
    code, out, _ = invoke(running_path, "EG (x < 10)")
    assert code == 0
    lines = out.splitlines()
    assert same(parse_formula(lines[0]), f("q = 0 && 0 <= x && x < 5"))
    assert lines[1] == "label: precise"
    assert re.match(r"RT=\d+ ms  FL=\d+  NFE=\d+  NI=2  reach=exact", lines[2])


def test_under_engine_statistics(running_path):
    code, out, _ = invoke(running_path, "EG (x < 10)", engine="under", format="record")
    rec = record(out)
    assert code == 0 and rec["exit"] == "0"
    assert rec["fl"] == "2" and rec["nfe"] == "8"


def test_record_round_trips(running_path):
    code, out, _ = invoke(running_path, "EG (x < 10)", format="record")
    rec = record(out)
    assert set(rec) == {"formula", "label", "rt_ms", "fl", "nfe", "ni", "reach_tag", "exit"}
    assert same(parse_formula(rec["formula"]), f("q = 0 && x >= 0 && x <= 4"))
    assert rec["label"] == "precise" and int(rec["exit"]) == code == 0


def test_true_prints_reach(running_path):
    code, out, _ = invoke(running_path, "true")
    assert code == 0
    assert same(parse_formula(out.splitlines()[0]), f("q = 0 && x >= 0 && x <= 100"))


def test_property_from_file(running_path, tmp_path):
    p = tmp_path / "prop.ctl"
    p.write_text("AF (x >= 50)\n")
    code, out, _ = invoke(running_path, str(p))
    assert code == 0
    assert same(parse_formula(out.splitlines()[0]), f("q = 0 && x >= 5 && x <= 100"))


@pytest.mark.parametrize("label, code", [(UNDER, 10), (OVER, 11)])
def test_tiny_timeout_gives_partial_answer(running_path, label, code):
    got, out, _ = invoke(running_path, "EG (x < 10)", label=label, timeout=0.001, format="record")
    rec = record(out)
    assert got == code and rec["label"] == str(label)
    parse_formula(rec["formula"])
    # the partial answer still sits on the right side of the exact one
    exact = f("q = 0 && x >= 0 && x <= 4")
    if label is UNDER:
        assert entails(parse_formula(rec["formula"]), exact)
    else:
        assert entails(exact, parse_formula(rec["formula"]))


def test_exit_status_matches_label(running_path):
    for label in (PRECISE, UNDER, OVER):
        code, out, _ = invoke(running_path, "EG (x < 10)", label=label, format="record")
        rec = record(out)
        assert code == {"precise": 0, "under": 10, "over": 11}[rec["label"]]


def test_precise_out_of_time_is_an_error(tmp_path):
    sysfile = tmp_path / "add.sys"
    sysfile.write_text("counters x, y;\ncontrols 0..0;\ninit: true;\ntransition add from 0 to 0 action x' = x + y;\n")
    code, out, err = invoke(sysfile, "EF (x = 0)", timeout=0.5, format="record")
    assert code == 2
    assert "no precise result within the time limit" in err
    assert record(out)["label"] == "none"


def test_parse_errors_exit_2(tmp_path, running_path):
    bad = tmp_path / "bad.sys"
    bad.write_text("counters x;\ncontrols 0..0;\ninit: x = ;\n")
    code, _, err = invoke(bad, "true")
    assert code == 2 and "3:" in err
    code, _, err = invoke(running_path, "EG (x < )")
    assert code == 2 and "error" in err
    code, _, err = invoke(tmp_path / "missing.sys", "true")
    assert code == 2


def test_invalid_config():
    with pytest.raises(ValueError):
        RunConfig(system_path="a", prop="true", timeout=0)
    with pytest.raises(ValueError):
        RunConfig(system_path="a", prop="true", engine="fast")
    assert main(["--system", "x.sys", "--prop", "true", "--timeout", "-1"]) == 2


def test_deterministic_report(running_path):
    def strip(text):
        return re.sub(r"rt_ms=\d+", "rt_ms=", text)

    a = invoke(running_path, "EG (x < 10) || EX (x = 7)", format="record")
    b = invoke(running_path, "EG (x < 10) || EX (x = 7)", format="record")
    assert a[0] == b[0] and strip(a[1]) == strip(b[1])


# --------------------------------------------------------------------------
# dumps


def test_dump_refined_shows_refined_guards(running_path):
    _, _, err = invoke(running_path, "EG (x < 10)", dump_refined=True)
    body = err.split("\n", 1)[1]
    M1 = parse_system(body)
    assert same(M1.transition("t0").guard, f("q = 0 && x >= 0 && x < 100 && x < 10"))
    assert same(M1.transition("t1").guard, f("q = 0 && x > 0 && x < 5 && x < 10"))


def _dumped_shapes(err):
    blocks = re.split(r"^# flattening \d+\n", err, flags=re.M)[1:]
    shapes = set()
    for b in blocks:
        head, text = b.split("\n", 1)
        origins = dict(tuple(map(int, p.split("->"))) for p in head[len("# copies: "):].split(", "))
        N = parse_system(text)
        index = {"t0": 0, "t1": 1}
        edges = tuple((t.source, t.target, index[t.id.rsplit("_", 1)[0]]) for t in N.transitions)
        shapes.add(canonical((tuple(origins[c] for c in sorted(origins)), edges)))
    return len(blocks), shapes


def test_dump_flattenings_includes_the_bouncing_shape(running_path):
    _, _, err = invoke(running_path, "EG (x < 10)", dump_flattenings=4)
    count, shapes = _dumped_shapes(err)
    m = re.search(r"# (\d+) flattenings of length 4", err)
    assert m and int(m.group(1)) == count
    # t0 loops on copy 0, t1 leads to a t0/t1 cycle between copies 1 and 2
    bounce = canonical(((0, 0, 0), ((0, 0, 0), (0, 1, 1), (1, 2, 0), (2, 1, 1))))
    assert bounce in shapes


def test_dump_iterations_shows_y_growing(running_path):
    _, _, err = invoke(running_path, "EG (x < 10)", engine="over", dump_iterations=True)
    ys = [parse_formula(m) for m in re.findall(r"^# iteration \d+: Y = (.*)$", err, flags=re.M)]
    assert len(ys) == 2
    q0 = f("q = 0")
    assert same(mk_and(ys[0], q0), f("q = 0 && (x >= 10 || x < 0)"))
    assert same(mk_and(ys[1], q0), f("q = 0 && (x >= 5 || x < 0)"))


def test_dump_iterations_under_engine(running_path):
    _, _, err = invoke(running_path, "EG (x < 10)", engine="under", dump_iterations=True)
    lines = re.findall(r"^# flattening (\d+) \(length (\d+), (\w+)\)", err, flags=re.M)
    assert len(lines) == 8 and lines[-1] == ("8", "2", "holds")


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "counterctl", "--system", str(ROOT / "scripts" / "running_example.sys"), "--prop", "EG (x < 10)"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    assert "label: precise" in proc.stdout
