import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

from floquet_lie import SWEEP_COLUMNS, ReportDocument, get_context, run

assets = Path(__file__).parent / "assets"


def _cli(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "floquet_lie", *args],
        capture_output=True,
        text=True,
        check=False,
    )


def _read_csv(path: Path):
    with path.open(newline="") as f:
        return list(csv.reader(f))


def test_analyze_zero_curve(tmp_path):
    args = ["--config", str(assets / "zero_curve.json"), "--out", str(tmp_path), "--threads", "1"]
    assert run("analyze", *args) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["phases"]["k"] == pytest.approx([0.0, 0.0, 0.0], abs=1e-14)
    assert report["phases"]["k_geom"] == pytest.approx([0.0, 0.0, 0.0], abs=1e-14)
    assert report["provenance"]["grid"] == {"N_t": 16, "N_s": 8}
    assert report["checks"]["splitting_within_tolerance"]


def test_analyze_rotating_field(tmp_path):
    config = json.loads((assets / "rotating_field.json").read_text())
    config["grid"] = {"N_t": 1024, "N_s": 16}
    config_path = tmp_path / "rotating_field.json"
    config_path.write_text(json.dumps(config))
    result = _cli("analyze", "--config", str(config_path), "--out", str(tmp_path))
    assert result.returncode == 0, result.stderr
    document = ReportDocument.model_validate_json((tmp_path / "report.json").read_text())
    assert document.monodromy["reducible"]
    assert document.provenance.homotopy == "linear"
    assert document.echoed_config().grid.n_t == 1024
    expected = np.array([0.3, 0.0, -0.6])
    generator = get_context("SO3").hat(2 * math.pi * expected)
    np.testing.assert_allclose(document.monodromy["matrix"], expm(generator), atol=1e-8)
    norm = np.linalg.norm(expected)
    np.testing.assert_allclose(document.phases["k"], 2 * math.pi * (norm - 1) / norm * expected, atol=1e-7)


def test_sweep_table(tmp_path):
    assert run("sweep", "--config", str(assets / "sl2_elliptic.json"), "--out", str(tmp_path), "--threads", "1") == 0
    rows = _read_csv(tmp_path / "sweep.csv")
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 1 + 65
    first = dict(zip(rows[0], map(float, rows[1])))
    assert first["s"] == 0.0
    assert [first["k_1"], first["k_dyn_2"], first["k_geom_3"]] == pytest.approx([0.0, 0.0, 0.0], abs=1e-14)
    for raw in rows[1:]:
        row = dict(zip(rows[0], map(float, raw)))
        for i in (1, 2, 3):
            assert row[f"k_{i}"] == pytest.approx(row[f"k_dyn_{i}"] + row[f"k_geom_{i}"], abs=1e-4)


def test_sweep_does_not_depend_on_threads(tmp_path):
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / threads
        args = ["--config", str(assets / "rotating_field.json"), "--out", str(out), "--threads", threads]
        assert run("sweep", *args) == 0
        outputs.append((out / "sweep.csv").read_bytes())
    assert outputs[0] == outputs[1]


def test_rigidbody_outputs(tmp_path):
    result = _cli("rigidbody", "--config", str(assets / "rigid_body.json"), "--out", str(tmp_path))
    assert result.returncode == 0, result.stderr
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["reconstruction"]) == 17
    assert report["provenance"]["parameterization"].startswith("polar angle")
    assert report["checks"]["rec1_equals_rec3"]
    orbits = _read_csv(tmp_path / "orbits.csv")
    assert orbits[0] == ["s", "t", "xi_1", "xi_2", "xi_3"]
    assert len(orbits) == 1 + 17 * 257
    boundary = _read_csv(tmp_path / "boundary.csv")
    assert boundary[0] == ["t", "xi_1", "xi_2", "xi_3"]
    assert len(boundary) == 1 + 257


def test_rigidbody_without_inertia_is_a_config_error(tmp_path):
    result = _cli("rigidbody", "--config", str(assets / "rigid_body_missing_inertia.json"), "--out", str(tmp_path))
    assert result.returncode == 2
    error = json.loads((tmp_path / "error.json").read_text())
    assert error["error"] == "config_error"
    assert error["field"] == "rigid_body.inertia"


def test_rigidbody_requires_the_block(tmp_path):
    assert run("rigidbody", "--config", str(assets / "rotating_field.json"), "--out", str(tmp_path)) == 2


def test_analyze_without_a_curve(tmp_path):
    assert run("analyze", "--config", str(assets / "rigid_body.json"), "--out", str(tmp_path)) == 2
    assert json.loads((tmp_path / "error.json").read_text())["field"] == "curve"


def test_bad_grid_exits_with_config_code(tmp_path):
    assert run("analyze", "--config", str(assets / "bad_grid.json"), "--out", str(tmp_path)) == 2
    assert "N_t" in json.loads((tmp_path / "error.json").read_text())["message"]


def test_bad_override_exits_with_config_code(tmp_path):
    args = ["--config", str(assets / "zero_curve.json"), "--out", str(tmp_path), "--tolerance-override", "foo=1"]
    assert run("analyze", *args) == 2


def test_not_in_image_is_a_pipeline_error(tmp_path):
    result = _cli("analyze", "--config", str(assets / "sl2_not_in_image.json"), "--out", str(tmp_path))
    assert result.returncode == 1
    error = json.loads((tmp_path / "error.json").read_text())
    assert error["monodromy"]["status"] == "NotInImage"
    assert error["monodromy"]["adjoint_reducible"]
    assert "report.json" not in {p.name for p in tmp_path.iterdir()}


def test_selftest_quick():
    result = _cli("selftest", "--quick")
    assert result.returncode == 0, result.stdout
    assert "checks passed" in result.stdout
    assert "FAIL" not in result.stdout


def test_unknown_verb():
    result = _cli("frobnicate")
    assert result.returncode == 2
