import json
import math
import os
import subprocess
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from mdmkit.cli import dumps, main
from mdmkit.geometry import circle_arc

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"
SVG_NS = "{http://www.w3.org/2000/svg}"

# (golden name, argv); inputs are given relative to the data directory
GOLDEN_RUNS = {
    "steiner_square": ["steiner", "--input", "unit_square.json"],
    "bounds_square": ["bounds", "--input", "square_polygon.json"],
    "bounds_triangle": ["bounds", "--input", "triangle.json"],
    "solve_triangle": ["solve", "--input", "triangle.json"],
    "validate_cycle": ["validate", "--input", "square_cycle.json"],
    "tube_corner": ["tube-check", "--input", "corner.json", "--samples", "20000", "--seed", "3"],
    "avg_segment": ["avg-distance", "--input", "segment_avg.json", "--samples", "20000"],
}


@pytest.fixture
def in_data(monkeypatch):
    monkeypatch.chdir(DATA)


def run_cli(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("name", sorted(GOLDEN_RUNS))
def test_golden_output(name, in_data, capsys):
    code, out, _ = run_cli(GOLDEN_RUNS[name], capsys)
    assert code == (2 if name == "validate_cycle" else 0)
    golden = GOLDEN / f"{name}.json"
    if os.environ.get("MDMKIT_REGEN_GOLDEN"):
        golden.write_text(out, encoding="utf-8")
    assert out == golden.read_text(encoding="utf-8")


def test_repeat_runs_are_byte_identical(in_data, capsys):
    argv = ["tube-check", "--input", "corner.json", "--samples", "20000"]
    assert run_cli(argv, capsys)[1] == run_cli(argv, capsys)[1]


def test_output_independent_of_worker_count(tmp_path):
    outs = []
    for workers in ("1", "2"):
        env = dict(os.environ, MDMKIT_WORKERS=workers)
        res = subprocess.run(
            [sys.executable, "-m", "mdmkit", "steiner", "--input", str(DATA / "six_points.json")],
            capture_output=True, text=True, env=env, check=True,
        )
        outs.append(res.stdout)
    assert outs[0] == outs[1]


def test_header_records_run_configuration(in_data, capsys):
    code, out, _ = run_cli(["tube-check", "--input", "corner.json", "--samples", "10000", "--seed", "5", "--tol", "1e-3"], capsys)
    head = json.loads(out)["header"]
    assert code == 0
    assert head["seed"] == 5 and head["samples"] == 10000
    assert head["config_echo"] == {"subcommand": "tube-check", "input": "corner.json", "r": None, "tol": 0.001}
    assert head["tool_version"]


def test_steiner_square_payload(in_data, capsys):
    res = json.loads(run_cli(["steiner", "--input", "unit_square.json"], capsys)[1])["result"]
    assert res["count"] == 2
    for opt in res["optima"]:
        assert opt["length"] == pytest.approx(1 + math.sqrt(3), abs=1e-9)
        assert opt["violations"] == []


def test_bounds_square_payload(in_data, capsys):
    res = json.loads(run_cli(["bounds", "--input", "square_polygon.json"], capsys)[1])["result"]
    assert res["perimeter_bound"] == pytest.approx((8 - 0.2 * math.pi) / 2, abs=1e-12)
    assert res["volume_bound"] == pytest.approx((4 - 0.01 * math.pi) / 0.2, abs=1e-12)


def test_r_override(in_data, capsys):
    res = json.loads(run_cli(["bounds", "--input", "square_polygon.json", "--r", "0.2"], capsys)[1])["result"]
    assert res["instance"]["r"] == 0.2
    assert res["perimeter_bound"] == pytest.approx((8 - 0.4 * math.pi) / 2, abs=1e-12)


def test_validate_cycle_exits_2(in_data, capsys):
    code, out, _ = run_cli(["validate", "--input", "square_cycle.json"], capsys)
    assert code == 2
    assert "cycle" in json.loads(out)["result"]["violations"]


def test_validate_clean_tree_exits_0(tmp_path, capsys):
    tripod = {"network": {"nodes": [[0, 0], [1, 0], [-0.5, math.sqrt(3) / 2], [-0.5, -math.sqrt(3) / 2]], "edges": [[0, 1], [0, 2], [0, 3]]}}
    path = tmp_path / "tripod.json"
    path.write_text(json.dumps(tripod))
    code, out, _ = run_cli(["validate", "--input", str(path)], capsys)
    assert code == 0 and json.loads(out)["result"]["violations"] == []


def test_corner_example_runs_clean(capsys):
    code, out, _ = run_cli(["corner-example"], capsys)
    res = json.loads(out)["result"]
    assert code == 0
    assert res["max_vertex_error"] <= 1e-6
    assert res["chain"]["converged"]
    assert res["structure"]["violations"] == []


@pytest.mark.parametrize(
    "argv,error",
    [
        (["steiner", "--input", "missing.json"], "FileNotFoundError"),
        (["steiner", "--input", "square_polygon.json"], "ValueError"),
        (["bounds", "--input", "unit_square.json"], "ValueError"),
        (["tube-check", "--input", "corner.json", "--samples", "0"], "ValueError"),
        (["solve"], "ValueError"),
    ],
)
def test_errors_exit_1_with_json_on_stderr(argv, error, in_data, capsys):
    code, out, err = run_cli(argv, capsys)
    assert code == 1 and out == ""
    obj = json.loads(err)
    assert obj["error"] == error and obj["message"]


def test_malformed_json_is_an_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run_cli(["steiner", "--input", str(path)], capsys)
    assert code == 1 and json.loads(err)["error"] == "JSONDecodeError"


def svg_classes(path):
    root = ET.parse(path).getroot()
    assert root.tag == SVG_NS + "svg"
    return {g.get("class"): len(list(g)) for g in root.iter(SVG_NS + "g")}


def test_svg_for_tube_check(tmp_path, capsys):
    curve = {"curve": circle_arc(1.0, 0.0, math.pi / 2, 0.05).to_json(), "R": 0.5}
    src = tmp_path / "arc.json"
    src.write_text(json.dumps(curve))
    svg = tmp_path / "arc.svg"
    assert run_cli(["tube-check", "--input", str(src), "--samples", "10000", "--svg", str(svg)], capsys)[0] == 0
    classes = svg_classes(svg)
    assert set(classes) == {"tube", "network"}
    corner_svg = tmp_path / "corner.svg"
    run_cli(["tube-check", "--input", str(DATA / "corner.json"), "--samples", "10000", "--svg", str(corner_svg)], capsys)
    classes = svg_classes(corner_svg)
    assert classes["witnesses"] == 1 and classes["network"] == 2


def test_svg_for_solve(tmp_path, capsys):
    svg = tmp_path / "tri.svg"
    assert run_cli(["solve", "--input", str(DATA / "triangle.json"), "--svg", str(svg)], capsys)[0] == 0
    classes = svg_classes(svg)
    assert classes == {"disks": 3, "network": 3, "points": 3}


def test_output_file(tmp_path, in_data, capsys):
    out = tmp_path / "o.json"
    code, stdout, _ = run_cli(["bounds", "--input", "square_polygon.json", "--output", str(out)], capsys)
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["result"]["perimeter_bound"] > 0


def test_round_trips_through_json(in_data, capsys):
    from mdmkit.mdm import Instance
    from mdmkit.steiner import Realization

    res = json.loads(run_cli(["solve", "--input", "triangle.json"], capsys)[1])["result"]
    assert dumps(Instance.from_json(res["instance"]).to_json()) == dumps(res["instance"])
    opt = res["optima"][0]
    assert dumps(Realization.from_json(opt).to_json()) == dumps(opt)


def test_non_finite_values_are_strings():
    assert json.loads(dumps({"a": math.inf, "b": -math.inf, "c": math.nan})) == {"a": "inf", "b": "-inf", "c": "nan"}


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mdmkit", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("mdmkit ")
