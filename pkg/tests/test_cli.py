import json

import pytest

from hausstraight.cli import run
from hausstraight.measure import load_measure


@pytest.fixture
def segment_file(tmp_path):
    path = tmp_path / "segment.json"
    assert run(["fixtures", "--kind", "segment", "--out", str(path)]) == 0
    return path


@pytest.fixture
def dense_file(tmp_path):
    path = tmp_path / "dense.json"
    assert run(["fixtures", "--kind", "segment", "--out", str(path),
                "--param", "density=1.5"]) == 0
    return path


def test_fixtures_roundtrip(segment_file):
    mu = load_measure(segment_file)
    assert mu.total_mass() == pytest.approx(10.0)


def test_usage_error_exits_64():
    with pytest.raises(SystemExit) as exc:
        run(["no-such-command"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        run(["straight-check", "--input", "x.json"])  # missing required --s/--rmin
    assert exc.value.code == 64


def test_missing_input_exits_1(tmp_path):
    assert run(["straight-check", "--input", str(tmp_path / "nope.json"),
                "--s", "1", "--rmin", "0.1"]) == 1


def test_straight_check_exit_codes(segment_file, dense_file, tmp_path):
    out = tmp_path / "cert.json"
    assert run(["straight-check", "--input", str(segment_file),
                "--s", "1", "--rmin", "0.001", "--out", str(out)]) == 0
    cert = json.loads(out.read_text())
    assert cert["status"] == "certified"
    assert run(["straight-check", "--input", str(dense_file),
                "--s", "1", "--rmin", "0.001", "--out", str(out)]) == 2
    assert json.loads(out.read_text())["status"] == "violated"


def test_config_defaults_merge(dense_file, tmp_path):
    # config-supplied epsilon flips the verdict; an explicit flag overrides it
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epsilon": 0.9}))
    assert run(["--config", str(cfg), "straight-check", "--input", str(dense_file),
                "--s", "1", "--rmin", "0.001"]) == 0
    assert run(["--config", str(cfg), "straight-check", "--input", str(dense_file),
                "--s", "1", "--rmin", "0.001", "--epsilon", "0"]) == 2


def test_threads_env_validation(segment_file, monkeypatch):
    monkeypatch.setenv("HAUSSTRAIGHT_THREADS", "not-a-number")
    assert run(["content", "--input", str(segment_file), "--s", "1"]) == 1
    monkeypatch.setenv("HAUSSTRAIGHT_THREADS", "2")
    assert run(["content", "--input", str(segment_file), "--s", "1",
                "--mode", "greedy", "--rho", "0.05"]) == 0


def test_content_output(segment_file, tmp_path, capsys):
    out = tmp_path / "content.json"
    assert run(["content", "--input", str(segment_file), "--s", "1",
                "--mode", "greedy", "--rho", "0.05", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    # the cover is of the sampled carrier: slack up to one pitch per ball
    slack = len(doc["cover"]) * doc["pitch"]
    assert doc["upper"] >= 10.0 - slack - 1e-9
    assert doc["upper"] <= 12.0
    assert doc["mode"] == "greedy"


def test_decompose_and_localize_cli(tmp_path):
    path = tmp_path / "par.json"
    assert run(["fixtures", "--kind", "parallel_segments", "--out", str(path)]) == 0
    out = tmp_path / "dec.json"
    assert run(["decompose", "--input", str(path), "--s", "1", "--out", str(out)]) == 0
    dec = json.loads(out.read_text())
    assert len(dec["parts"]) == 2
    out2 = tmp_path / "loc.json"
    assert run(["localize", "--input", str(path), "--s", "1",
                "--stages", "0.5,0.1", "--out", str(out2)]) == 0
    loc = json.loads(out2.read_text())
    assert len(loc["stages"]) == 2


def test_pde_solve_cli(tmp_path):
    path = tmp_path / "atom.json"
    path.write_text(json.dumps({
        "dimension": 2,
        "atoms": [{"x": [0.5, 0.5], "mass": 3.14159}],
    }))
    csv = tmp_path / "u.csv"
    rep = tmp_path / "report.json"
    assert run(["pde-solve", "--input", str(path), "--h", str(1 / 32),
                "--stages", "3", "--out-csv", str(csv), "--out-report", str(rep)]) == 0
    assert csv.read_text().startswith("x,y,u")
    doc = json.loads(rep.read_text())
    assert doc["monotonicity_violation"] <= 1e-10


def test_verify_single_suite(capsys):
    assert run(["verify", "--suite", "flat-identity"]) == 0
    out = capsys.readouterr().out
    assert "flat-identity" in out and "PASS" in out
