import json

import pytest

from ringbus.device import device_spec_from_dict, parse_device_spec, parse_device_text
from ringbus.exceptions import ParseError, ValidationError


def minimal(**overrides):
    doc = {
        "rings": [{"fundamental_hz": 3.1e9, "impedance_ohm": 50}],
        "qubits": [
            {"label": "a", "ring": 0, "angle_deg": 0, "freq_hz": 4.65e9, "anharmonicity_hz": -3e8},
            {"label": "b", "ring": 0, "angle_deg": 60, "freq_hz": 4.66e9, "anharmonicity_hz": -3e8},
        ],
    }
    doc.update(overrides)
    return doc


def test_minimal_file(tmp_path):
    path = tmp_path / "dev.json"
    path.write_text(json.dumps(minimal()))
    dev = parse_device_spec(path)
    assert dev.labels == ["a", "b"]
    assert dev.needs_calibration
    assert dev.coupling_caps_f()[0] == pytest.approx(1.4768e-14, rel=1e-3)
    assert "calibrated_coupling_cap_f" in dev.provenance()


def test_explicit_caps_skip_calibration():
    doc = minimal()
    for q in doc["qubits"]:
        q["coupling_cap_f"] = 1e-14
    dev = device_spec_from_dict(doc)
    assert not dev.needs_calibration
    assert dev.coupling_caps_f() == [1e-14, 1e-14]


def test_duplicate_label_named():
    doc = minimal()
    doc["qubits"][1]["label"] = "a"
    with pytest.raises(ValidationError, match=r"\$\.qubits\[1\]\.label duplicates 'a'"):
        device_spec_from_dict(doc)


@pytest.mark.parametrize(
    "path,value,match",
    [
        (("qubits", 0, "angle_deg"), 360, r"\$\.qubits\[0\]\.angle_deg must lie in \[0, 360\)"),
        (("qubits", 1, "ring"), 3, r"\$\.qubits\[1\]\.ring references missing ring 3"),
        (("qubits", 0, "freq_hz"), -1.0, r"\$\.qubits\[0\]\.freq_hz must be positive"),
        (("rings", 0, "fundamental_hz"), "x", r"\$\.rings\[0\]\.fundamental_hz must be a finite number"),
    ],
)
def test_invariant_errors(path, value, match):
    doc = minimal()
    node = doc
    for key in path[:-1]:
        node = node[key]
    node[path[-1]] = value
    with pytest.raises(ValidationError, match=match):
        device_spec_from_dict(doc)


def test_self_link_rejected():
    doc = minimal(links=[{"ring_a": 0, "angle_a_deg": 0, "ring_b": 0, "angle_b_deg": 90}])
    with pytest.raises(ValidationError, match="to itself"):
        device_spec_from_dict(doc)


def test_parse_error_has_position():
    with pytest.raises(ParseError, match=r"dev\.json:2:"):
        parse_device_text('{"rings": []\n ,,}', "dev.json")


def test_duplicate_key_rejected():
    with pytest.raises(ParseError, match="duplicate key 'rings'"):
        parse_device_text('{"rings": [], "rings": []}')


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        parse_device_spec(tmp_path / "nope.json")


def test_bundled_device(paper_device):
    assert paper_device.labels == ["Q1", "Q3", "Q9", "Q10"]
    angles = sorted(round(a) for _, _, a in paper_device.pair_angles())
    assert angles == [30, 60, 90, 120, 150, 180]
    assert paper_device.special_frequency_hz == pytest.approx(4.6905e9)
    assert paper_device.qubits[0].extra["t1_s"] > 0
    assert paper_device.transmon_specs()[2].anharmonicity_hz == -309e6
