import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from ckalg.cli import main

DATA = Path(__file__).resolve().parents[1] / "data" / "matrices"


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def matrix(name):
    return DATA / f"{name}.json"


def test_version():
    result = run("--version")
    assert result.exit_code == 0 and "ck" in result.output


def test_kgroups_almost_free():
    result = run("kgroups", "--matrix", matrix("ad2"))
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["groups"]["K^1"] == {"free_rank": 0, "torsion": [2, 2, 4]}


def test_analyze_reports_entropy():
    result = run("analyze", "--matrix", matrix("o2"), "--depth", 4)
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["irreducible"] is True
    assert report["delta"] == pytest.approx(0.6931471805599453)


def test_pairing_constructed_choice():
    result = run("pairing", "--matrix", matrix("o2"), "--mu", "12")
    assert result.exit_code == 0
    assert json.loads(result.output)["pairing"] == 1


def test_fiber_suq2():
    result = run("fiber", "--matrix", matrix("suq2"), "--lambda", "2", "--omega", '{"preperiod":[],"period":[2]}')
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["phase_defect"] == 0.0
    assert len(report["kernel"]) == 1


def test_fiber_csv_output():
    result = run("fiber", "--matrix", matrix("o2"), "--fiber-bounds", "1,1", "--format", "csv")
    assert result.exit_code == 0
    lines = result.output.splitlines()
    assert lines[0] == "prefix,cut,n,kappa,psi_lambda" and len(lines) == 6


def test_text_output():
    result = run("kgroups", "--matrix", matrix("o3"), "--format", "text")
    assert result.exit_code == 0
    assert any(line.startswith("command") for line in result.output.splitlines())


def test_product_small():
    result = run("product", "--matrix", matrix("o2"), "--depth", 2, "--fiber-bounds", "2,2")
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["redcomm_defect"] == 0.0


def test_verify_passes_on_o2(tmp_path):
    result = run("verify", "--matrix", matrix("o2"), "--depth", 4, "--fiber-bounds", "3,3", "--out", tmp_path)
    assert result.exit_code == 0, result.output
    saved = json.loads((tmp_path / "verify.json").read_text())
    assert saved["passed"] is True


def test_output_is_deterministic():
    first = run("kgroups", "--matrix", matrix("free3"))
    second = run("kgroups", "--matrix", matrix("free3"))
    assert first.output == second.output


def test_bad_json_exits_with_usage_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"n": 2,\n "rows": [[1,1],}\n')
    result = run("kgroups", "--matrix", path)
    assert result.exit_code == 2
    assert f"{path}:2" in result.output


@pytest.mark.parametrize(
    "args",
    [
        ("pairing", "--matrix", matrix("o2"), "--mu", "13"),
        ("pairing", "--matrix", matrix("o2")),
        ("analyze", "--matrix", matrix("o2"), "--depth", 40),
        ("fiber", "--matrix", matrix("o2"), "--fiber-bounds", "x"),
        ("kgroups", "--matrix", matrix("o2"), "--format", "xml"),
    ],
)
def test_usage_errors(args):
    assert run(*args).exit_code == 2


def test_blowup_guard_exit_code():
    result = run("fiber", "--matrix", matrix("free3"), "--fiber-bounds", "12,2")
    assert result.exit_code == 3


def test_failed_verification_exit_code(tmp_path):
    # the override sends the word 1 to a point outside its cylinder
    tau = {
        "plus": {"rule": "greedy-min", "overrides": {"1": {"preperiod": [], "period": [2]}}},
        "minus": {"rule": "greedy-max", "overrides": {}},
    }
    path = tmp_path / "tau.json"
    path.write_text(json.dumps(tau))
    result = run("pairing", "--matrix", matrix("o2"), "--mu", "12", "--tau", path)
    assert result.exit_code == 1
    assert json.loads(result.output.split("error:")[0])["cylinder_violations"] == [[1]]
