import csv
import io
import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from ringbus.cli import main, parse_grid
from ringbus.device import bundled_path
from ringbus.exceptions import ValidationError

DEVICE = bundled_path("paper12q.json")
TABLE = bundled_path("tableII.json")


@pytest.fixture
def runner():
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:  # click >= 8.2 always keeps stderr separate
        return CliRunner()


def run(runner, *args):
    result = runner.invoke(main, [str(a) for a in args])
    assert result.exit_code == 0, result.stderr or result.output
    return result.stdout


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_parse_grid():
    assert list(parse_grid("0:1:3")) == [0.0, 0.5, 1.0]
    for bad in ("0:1", "1:0:3", "a:b:c", "0:1:0"):
        with pytest.raises(ValidationError):
            parse_grid(bad)


def test_coupling_null(runner):
    out = rows(run(runner, "coupling", "--theta", 120, "--freq", 4.65e9))
    assert abs(float(out[0]["j_hz"])) < 1e3
    assert list(out[0]) == ["theta_deg", "freq_hz", "j_hz", "lower_mode_hz", "upper_mode_hz"]


def test_coupling_map_byte_identical(runner, tmp_path):
    args = ("coupling-map", "--grid", "30:180:6", "--freq-grid", "4.6e9:4.7e9:3")
    first = run(runner, *args)
    assert run(runner, *args) == first
    path = tmp_path / "map.csv"
    assert run(runner, *args, "--out", path) == ""
    assert path.read_text() == first
    table = rows(first)
    assert len(table) == 18
    assert {r["theta_deg"] for r in table} == {"30.0", "60.0", "90.0", "120.0", "150.0", "180.0"}


def test_json_format_has_provenance(runner):
    doc = json.loads(run(runner, "coupling", "--theta", 180, "--freq", 4.65e9, "--format", "json"))
    assert doc["provenance"]["calibrated_coupling_cap_f"] == pytest.approx(1.4768e-14, rel=1e-3)
    assert abs(doc["rows"][0]["j_hz"]) == pytest.approx(4.74e6, rel=1e-5)


def test_report_signs(runner):
    out = rows(run(runner, "report", "--device", DEVICE))
    assert len(out) == 6
    assert [r["sign"] for r in out] == ["+", "+", "+", "0", "-", "-"]
    assert [r["path"] for r in out] == ["30", "60", "90", "120", "150", "180"]
    assert [r["coupling_class"] for r in out] == ["weak", "strong", "weak", "zero", "weak", "strong"]


def test_error_json(runner):
    result = runner.invoke(main, ["report", "--device", "/nonexistent.json"])
    assert result.exit_code == 1
    err = json.loads(result.stderr)
    assert err["error"] == "parse_error"


def test_invalid_theta(runner):
    result = runner.invoke(main, ["coupling", "--theta", "nan", "--freq", "4.65e9"])
    assert result.exit_code == 1
    assert "error" in json.loads(result.stderr)


def test_spectrum_and_cross_kerr(runner):
    spec = rows(run(runner, "spectrum", "--device", DEVICE, "--levels", 3, "--max-total", 2))
    assert spec and "energy_hz" in spec[0]
    ck = rows(run(runner, "cross-kerr", "--device", DEVICE, "--levels", 4, "--max-total", 4))
    assert len(ck) == 6
    for r in ck:
        assert float(r["ramsey_shift_hz"]) == pytest.approx(-0.5 * float(r["cross_kerr_hz"]))


def test_anticross(runner):
    doc = json.loads(run(runner, "anticross", "--device", DEVICE, "--sweep", "Q9", "--partner", "Q10", "--format", "json"))
    assert doc["min_gap_hz"] > 0
    assert len(doc["rows"]) == 121


@pytest.mark.slow
def test_fit_measured(runner):
    doc = json.loads(run(runner, "fit", "--measurements", TABLE))
    published = [3.45e6, 4.57e6, 2.40e6, 0.05e6, -3.58e6, -4.74e6]
    assert np.max(np.abs(np.array(doc["j_hz"]) - published)) < 0.15e6
    assert doc["pairs"][0]["qubits"] == ["Q9", "Q10"]


def test_cr_roundtrip(runner, tmp_path):
    trace = tmp_path / "trace.csv"
    run(runner, "cr-sim", "--device", DEVICE, "--control", "Q9", "--target", "Q10", "--j", 3.45e6, "--m", 0.01, "--phi-ct", 0.7, "--out", trace)
    doc = json.loads(run(runner, "cr-estimate", "--trace", trace, "--device", DEVICE, "--control", "Q9", "--target", "Q10", "--j", 3.45e6))
    assert doc["m"] == pytest.approx(0.01, rel=0.1)


def test_dephasing(runner):
    doc = json.loads(run(runner, "dephasing", "--tau-baseline", 8e-6, "--tau-tone", 2e-6, "--photons", 13))
    assert doc["rate_per_photon_hz"] == pytest.approx(3.75e5 / 13)
    assert doc["negative"] is False


def test_calibrate(runner):
    doc = json.loads(run(runner, "calibrate"))
    assert doc["coupling_cap_f"] == pytest.approx(1.4768e-14, rel=1e-3)
    assert doc["at_freq_hz"] == pytest.approx(4.65e9)


def test_version(runner):
    assert "ringbus" in run(runner, "--version")
