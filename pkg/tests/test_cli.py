import csv
import io
import json
import math
import shutil
import subprocess

import pytest

from ultraheat import CylindricalFunction, build_tower
from ultraheat.cli import ConfigError, RunConfig, main

from conftest import TAME3, U23


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "t2.json"
    path.write_text(json.dumps({"tower": U23, "alpha": 1.0, "t": 1.0, "seed": 3}))
    return str(path)


@pytest.fixture
def fa_file(tmp_path, capsys, cfg_file):
    path = tmp_path / "fa.json"
    code, _, _ = run(capsys, "fa", "--config", cfg_file, "--level", "1", "--coeffs", "1/2",
                     "--out", str(path))
    assert code == 0
    return str(path)


def test_heat_kernel_row(capsys):
    code, out, _ = run(capsys, "heat", "kernel", "--level", "1", "--alpha", "1", "--t", "1")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["N", "gamma", "sphere_prob"]
    table = {int(r[0]): (float(r[1]), float(r[2])) for r in rows[1:]}
    assert table[0][0] == pytest.approx(1 - math.exp(-2), abs=1e-14)
    assert table[0][1] == pytest.approx(0.5 * (1 - math.exp(-2)), abs=1e-14)
    assert table[-1][0] == pytest.approx(1 + math.exp(-2) - 2 * math.exp(-4), abs=1e-14)
    assert len(rows) == 13
    # 15 significant digits
    assert rows[1][1] == f"{1 - math.exp(-2):.15g}"


def test_heat_kernel_json(capsys):
    code, out, _ = run(capsys, "heat", "kernel", "--level", "1", "--nmin", "-3", "--emit", "json")
    assert code == 0
    obj = json.loads(out)
    probs = [r["sphere_prob"] for r in obj["rows"]]
    assert obj["n_min"] == -3 and len(probs) == 3
    assert sum(probs) + obj["floor_mass"] == pytest.approx(1.0, abs=1e-12)


def test_integrate_character(capsys, cfg_file, fa_file):
    code, out, _ = run(capsys, "integrate", "--config", cfg_file, "--f", fa_file)
    assert code == 0
    re, im = json.loads(out)["integral"]
    assert abs(re) < 1e-12 and abs(im) < 1e-12


def test_integrate_constant(capsys, tmp_path, cfg_file):
    f = CylindricalFunction.constant(build_tower(U23).level(2), 2.0)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(f.to_dict()))
    code, out, _ = run(capsys, "integrate", "--config", cfg_file, "--f", str(path),
                       "--emit", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[1][0] == "2" and float(rows[1][1]) == 2.0


def test_dalpha_eigenvalue(capsys, cfg_file, fa_file):
    for method in ("spectral", "hypersingular"):
        code, out, _ = run(capsys, "dalpha", "--config", cfg_file, "--f", fa_file,
                           "--alpha", "1", "--method", method)
        assert code == 0
        assert json.loads(out)["eigenvalue"] == pytest.approx([2.0, 0.0], abs=1e-9)


def test_fourier_and_heat_apply(capsys, tmp_path, cfg_file, fa_file):
    out_path = tmp_path / "F.json"
    assert run(capsys, "fourier", "--config", cfg_file, "--f", fa_file, "--nu", "2",
               "--out", str(out_path))[0] == 0
    F = json.loads(out_path.read_text())
    assert F["base_level"] == 1 and F["level"] == 2
    code, out, _ = run(capsys, "heat", "apply", "--config", cfg_file, "--f", fa_file,
                       "--t", "0.5")
    assert code == 0
    tower = build_tower(U23)
    fa = CylindricalFunction.from_dict(tower, json.loads(open(fa_file).read()))
    got = CylindricalFunction.from_dict(tower, json.loads(out))
    assert got.max_abs_diff(math.exp(-1.0) * fa) < 1e-12


def test_verify_passes(capsys, cfg_file):
    code, out, _ = run(capsys, "verify", "--config", cfg_file)
    report = json.loads(out)
    assert code == 0, [c for c in report["cases"] if c["status"] != "pass"]
    assert report["failed"] == 0 and report["passed"] > 20
    assert {c["suite"] for c in report["cases"]} == set(report["suites"])
    assert set(report["cases"][0]) == {"suite", "case", "status", "lhs", "rhs", "tol"}


def test_verify_suite_filter(capsys, cfg_file):
    code, out, _ = run(capsys, "verify", "--config", cfg_file, "--suite", "heat")
    assert code == 0
    assert {c["suite"] for c in json.loads(out)["cases"]} == {"heat"}


def test_verify_tame_tower(capsys, tmp_path):
    path = tmp_path / "tame.json"
    path.write_text(json.dumps({"tower": TAME3}))
    code, out, _ = run(capsys, "verify", "--config", str(path), "--suite", "measure",
                       "--suite", "fractional")
    assert code == 0


def test_unknown_suite(capsys, cfg_file):
    code, _, err = run(capsys, "verify", "--config", cfg_file, "--suite", "nope")
    assert code == 2 and "unknown suite" in err


@pytest.mark.parametrize("content", [
    "{not json",
    json.dumps({"tower": U23, "colour": "red"}),
    json.dumps({"tower": {"p": 4, "precision": 24, "steps": []}}),
    json.dumps({"alpha": -1}),
    json.dumps([1, 2]),
])
def test_bad_config(capsys, tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    code, _, err = run(capsys, "verify", "--config", str(path))
    assert code == 2
    assert err.startswith("ultraheat: error:")


def test_missing_input_file(capsys, cfg_file, tmp_path):
    code, _, err = run(capsys, "integrate", "--config", cfg_file, "--f",
                       str(tmp_path / "absent.json"))
    assert code == 2 and "cannot read" in err


def test_fa_wrong_length(capsys, cfg_file):
    code, _, err = run(capsys, "fa", "--config", cfg_file, "--level", "2", "--coeffs", "1/2")
    assert code == 2 and "2 coordinates" in err


def test_run_config_defaults():
    cfg = RunConfig.from_dict({})
    assert cfg.alpha == 1.0 and cfg.t == 1.0
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"seed": -1})


def test_simulate_outputs_are_byte_identical(capsys, tmp_path, cfg_file, monkeypatch):
    outs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("ULTRAHEAT_THREADS", threads)
        paths = tmp_path / f"paths{threads}.jsonl"
        summary = tmp_path / f"summary{threads}.csv"
        code, out, _ = run(capsys, "simulate", "--config", cfg_file, "--level", "2",
                           "--grid", "0:0.1:1", "--paths", "5", "--seed", "9",
                           "--out", str(paths), "--summary", str(summary))
        assert code == 0
        outs.append((paths.read_bytes(), summary.read_bytes()))
    assert outs[0] == outs[1]
    lines = outs[0][0].decode().splitlines()
    assert len(lines) == 5
    first = json.loads(lines[0])
    assert set(first) == {"seed_path", "times", "positions"}
    assert len(first["times"]) == 11 == len(first["positions"])
    rows = list(csv.reader(io.StringIO(outs[0][1].decode())))
    assert rows[0] == ["N", "empirical", "exact"]


def test_simulate_bad_grid(capsys, cfg_file, tmp_path):
    code, _, err = run(capsys, "simulate", "--config", cfg_file, "--level", "1",
                       "--grid", "0:-1:1", "--out", str(tmp_path / "p.jsonl"))
    assert code == 2 and "bad grid" in err


def test_reruns_identical(capsys, cfg_file, fa_file):
    a = run(capsys, "dalpha", "--config", cfg_file, "--f", fa_file, "--alpha", "0.5")
    b = run(capsys, "dalpha", "--config", cfg_file, "--f", fa_file, "--alpha", "0.5")
    assert a == b


@pytest.mark.skipif(shutil.which("ultraheat") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["ultraheat", "heat", "kernel", "--level", "1"], capture_output=True,
                         text=True, check=True)
    assert res.stdout.splitlines()[1].startswith("0,0.864664716763387")
