import json

import pytest
from hypothesis import given, strategies as st

from ckalg.config import (
    ConfigError,
    MatrixFileError,
    RunConfig,
    Tolerances,
    load_matrix,
    parse_bounds,
    parse_omega,
    parse_word_option,
)
from ckalg.sft_core import Point, full_shift, quantum_su2


def test_defaults_round_trip_to_json():
    cfg = RunConfig()
    data = cfg.to_json()
    assert data["fiber_bounds"] == [5, 3]
    assert data["tolerances"] == {"perron": 1e-12, "assertion": 1e-12, "quad": 1e-10}
    json.dumps(data)


@pytest.mark.parametrize(
    "kwargs, flag",
    [
        ({"depth": 17}, "--depth"),
        ({"depth": -1}, "--depth"),
        ({"fiber_bounds": (13, 1)}, "--fiber-bounds"),
        ({"s": 0.0}, "--s"),
        ({"s": float("inf")}, "--s"),
        ({"format": "xml"}, "--format"),
        ({"seed": -3}, "--seed"),
    ],
)
def test_out_of_range_values_name_their_flag(kwargs, flag):
    with pytest.raises(ConfigError) as info:
        RunConfig(**kwargs)
    assert info.value.flag == flag


def test_tolerances_must_lie_in_unit_interval():
    with pytest.raises(ConfigError):
        Tolerances(perron=0.0)
    with pytest.raises(ConfigError):
        Tolerances(quad=1.5)


def test_load_matrix(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"n": 2, "rows": [[1, 1], [0, 1]]}))
    assert load_matrix(path) == quantum_su2()


def test_load_matrix_reports_line_of_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "n": 2,\n  "rows": [[1, 1] [1, 1]]\n}\n')
    with pytest.raises(MatrixFileError) as info:
        load_matrix(path)
    assert info.value.line == 3
    assert f"{path}:3" in str(info.value)


def test_load_matrix_reports_invalid_matrix(tmp_path):
    path = tmp_path / "zero.json"
    path.write_text(json.dumps({"n": 2, "rows": [[1, 0], [0, 0]]}))
    with pytest.raises(MatrixFileError):
        load_matrix(path)


def test_load_matrix_missing_file(tmp_path):
    with pytest.raises(MatrixFileError):
        load_matrix(tmp_path / "absent.json")


def test_shipped_matrices_load():
    from pathlib import Path

    folder = Path(__file__).resolve().parents[1] / "data" / "matrices"
    names = sorted(p.stem for p in folder.glob("*.json"))
    assert names == ["ad2", "ad3", "free2", "free3", "o2", "o3", "suq2"]
    assert load_matrix(folder / "o2.json") == full_shift(2)


def test_parse_bounds():
    assert parse_bounds("5,3") == (5, 3)
    with pytest.raises(ConfigError):
        parse_bounds("5")


def test_parse_word_option():
    assert parse_word_option("1,2", full_shift(2)) == (0, 1)
    with pytest.raises(ConfigError):
        parse_word_option("3", full_shift(2))
    with pytest.raises(ConfigError):
        parse_word_option("21", quantum_su2())


def test_parse_omega():
    p = parse_omega('{"preperiod": [1], "period": [2]}', quantum_su2())
    assert p == Point((0,), (1,))
    with pytest.raises(ConfigError):
        parse_omega('{"preperiod": [2], "period": [1]}', quantum_su2())
    with pytest.raises(ConfigError):
        parse_omega("not json")


@given(st.integers(0, 16), st.integers(0, 12), st.integers(0, 12), st.floats(0.01, 5.0))
def test_valid_configs_accepted(depth, m, k, s):
    cfg = RunConfig(depth=depth, fiber_bounds=(m, k), s=s)
    assert cfg.to_json()["depth"] == depth
