import json
import subprocess
import sys
from pathlib import Path

import pytest

from chainsheaf import cli
from chainsheaf.verify import SuiteReport

DATA = Path(__file__).resolve().parent.parent / "data"
SIERP = str(DATA / "sierpinski.yaml")


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_homology_of_unit_interval(capsys):
    code, out, _ = run(capsys, "homology", DATA / "U.yaml", "--site", SIERP, "--degree", 0,
                       "--format", "structured")
    assert code == 0
    h0 = json.loads(out)["homology"]["0"]
    assert set(h0) == {"o", "o,c"}
    for v in h0.values():
        assert v == {"free_rank": 1, "invariant_factors": []}


def test_text_homology(capsys):
    code, out, _ = run(capsys, "homology", DATA / "U.yaml", "--site", SIERP, "--degree", 0)
    assert code == 0 and out.startswith("H_0:")


def test_structured_output_is_byte_identical(capsys):
    argv = ("classify", DATA / "disk_to_sphere.yaml", "--site", SIERP, "--format", "structured")
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second
    json.loads(first[1])


def test_missing_file_is_parse_error(capsys):
    code, _, err = run(capsys, "homology", DATA / "nope.yaml", "--site", SIERP)
    assert code == 1 and err


def test_unknown_subcommand(capsys):
    code, _, _ = run(capsys, "frobnicate")
    assert code == 1


def test_bad_complex_reports_location(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("ring: Z\ndegrees:\n- degree: 0\n  modules: [{open: [o, c], rank: 1}]\n"
                   "- degree: 1\n  modules: [{open: [o, c], rank: 1}]\n"
                   "  differential: [{open: [o, c], matrix: [[1]]}]\n"
                   "- degree: 2\n  modules: [{open: [o, c], rank: 1}]\n"
                   "  differential: [{open: [o, c], matrix: [[1]]}]\n")
    code, out, _ = run(capsys, "homology", bad, "--site", SIERP, "--format", "structured")
    assert code == 1
    rec = json.loads(out)
    assert rec["error"] == "parse" and rec["witness"]["degree"] == 2


def test_truncate_rejects_open_only_d(capsys):
    code, out, err = run(capsys, "truncate", DATA / "U.yaml", "--site", SIERP,
                         "--d", DATA / "d_sierpinski_open.yaml", "--format", "structured")
    assert code == 2
    rec = json.loads(out)
    assert rec["error"] == "precondition"
    assert rec["witness"] == {"threshold": 1, "set": ["o"]}
    assert "not closed" in err


def test_truncate_closed_d(capsys, tmp_path):
    dest = tmp_path / "below.yaml"
    code, _, _ = run(capsys, "truncate", DATA / "U.yaml", "--site", SIERP,
                     "--d", DATA / "d_sierpinski_closed.yaml", "--output", dest)
    assert code == 0 and dest.exists()
    code, _, _ = run(capsys, "homology", dest, "--site", SIERP)
    assert code == 0


def test_member_witness(capsys):
    code, out, _ = run(capsys, "member", DATA / "U.yaml", "--site", SIERP,
                       "--d", DATA / "d_sierpinski_closed.yaml", "--format", "structured")
    assert code == 0
    rec = json.loads(out)
    assert rec["member"] is False and rec["witness"] == {"degree": 0, "point": "c"}
    assert rec["closed_condition"] and not rec["open_condition"]


def test_lift_and_maps(capsys):
    code, out, _ = run(capsys, "lift", DATA / "disk_to_sphere.yaml", "--site", SIERP)
    assert code == 0 and "fibration: true" in out
    code, out, _ = run(capsys, "maps", DATA / "U.yaml", DATA / "U.yaml", "--site", SIERP)
    assert code == 0 and "Z" in out


def test_perverse_and_tfactor(capsys):
    code, out, _ = run(capsys, "perverse", DATA / "const_3pt.yaml", "--site", DATA / "three_point.yaml",
                       "--strata", DATA / "strata_3pt.yaml")
    assert code == 0 and "stratumwise" in out
    code, out, _ = run(capsys, "tfactor", DATA / "disk_to_sphere.yaml", "--site", SIERP,
                       "--d", DATA / "d_sierpinski_closed.yaml", "--n", 0)
    assert code == 0 and "composite: true" in out


def test_verify_is_reproducible(capsys):
    argv = ("verify", "pushout_product", "--instances", 50, "--seed", 7, "--format", "structured")
    code, out, _ = run(capsys, *argv)
    assert code == 0 and json.loads(out)["passed"]
    assert run(capsys, *argv)[1] == out


def test_verify_failure_exit_code(capsys, monkeypatch):
    def failing(name, seed, instances, ring):
        return SuiteReport(name, seed, instances, failures=[{"instance": 0, "seed": seed}])

    monkeypatch.setattr(cli, "run_suite", failing)
    code, out, _ = run(capsys, "verify", "monoid", "--instances", 1)
    assert code == 3 and "FAIL" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "chainsheaf", "homology", str(DATA / "U.yaml"),
                           "--site", SIERP, "--degree", "0"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("H_0:")


@pytest.mark.parametrize("fmt", ["text", "structured"])
def test_sheafify_output_parses(capsys, tmp_path, fmt):
    dest = tmp_path / "sh.yaml"
    code, _, _ = run(capsys, "sheafify", DATA / "const_3pt.yaml", "--site", DATA / "three_point.yaml",
                     "--output", dest, "--format", fmt)
    assert code == 0
    code, _, _ = run(capsys, "homology", dest, "--site", DATA / "three_point.yaml")
    assert code == 0
