"""Device description files: rings, half-wave links and qubit placements.

JSON layout (frequencies in Hz, angles in degrees)::

    {
      "rings":  [{"fundamental_hz": 3.1e9, "impedance_ohm": 50}],
      "links":  [{"ring_a": 0, "angle_a_deg": 0, "ring_b": 1, "angle_b_deg": 0, "z_c_ohm": 25}],
      "qubits": [{"label": "Q1", "ring": 0, "angle_deg": 0, "freq_hz": 4.64e9,
                  "anharmonicity_hz": -318e6, "coupling_cap_f": 15e-15}],
      "defaults": {"z0_ohm": 50, "qubit_capacitance_f": 63e-15,
                   "calibration": {"target_j_hz": 4.74e6, "at_theta_deg": 180, "at_freq_hz": 4.65e9}}
    }

Qubit fields other than the listed ones are kept verbatim in ``extra``.
Missing ``coupling_cap_f`` values are filled by calibrating against
``defaults.calibration`` on ring 0.
"""

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

from .exceptions import ParseError, ValidationError
from .ring import (
    DEFAULT_QUBIT_CAPACITANCE,
    DEFAULT_TARGET_J_HZ,
    LinearizedQubit,
    RingSpec,
    calibrate_coupling_cap,
)
from .scaling import MultiRingTopology, QubitPlacement, RingLink
from .spectrum import TransmonSpec

QUBIT_FIELDS = {"label", "ring", "angle_deg", "freq_hz", "anharmonicity_hz", "coupling_cap_f"}


@dataclass(frozen=True)
class QubitEntry:
    label: str
    ring: int
    angle_deg: float
    freq_hz: float
    anharmonicity_hz: float
    coupling_cap_f: float = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def transmon(self):
        return TransmonSpec(self.freq_hz, self.anharmonicity_hz, self.label)


@dataclass(frozen=True)
class Calibration:
    target_j_hz: float = DEFAULT_TARGET_J_HZ
    at_theta_deg: float = 180.0
    at_freq_hz: float = None


@dataclass
class DeviceSpec:
    rings: list
    qubits: list
    links: list = field(default_factory=list)
    z0_ohm: float = 50.0
    qubit_capacitance_f: float = DEFAULT_QUBIT_CAPACITANCE
    calibration: Calibration = field(default_factory=Calibration)
    source: str = ""

    def __post_init__(self):
        # builds the topology once so placement errors surface at load time
        self._bare_topology()

    @property
    def labels(self):
        return [q.label for q in self.qubits]

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown qubit label {label!r}") from None

    @property
    def special_frequency_hz(self):
        """First half-integer mode point of ring 0, 1.5 times its fundamental."""
        return 1.5 * self.rings[0].fundamental_hz

    @property
    def calibration_freq_hz(self):
        c = self.calibration.at_freq_hz
        return c if c is not None else self.special_frequency_hz

    @cached_property
    def calibrated_coupling_cap_f(self):
        """Coupling cap matching the calibration point on ring 0."""
        at = self.calibration_freq_hz
        q = LinearizedQubit.from_frequency(at, self.qubit_capacitance_f)
        return calibrate_coupling_cap(
            self.calibration.target_j_hz, math.radians(self.calibration.at_theta_deg), at, q, self.rings[0]
        )

    @property
    def needs_calibration(self):
        return any(q.coupling_cap_f is None for q in self.qubits)

    def coupling_caps_f(self):
        return [q.coupling_cap_f if q.coupling_cap_f is not None else self.calibrated_coupling_cap_f for q in self.qubits]

    def provenance(self):
        out = {"source": self.source, "qubit_capacitance_f": self.qubit_capacitance_f}
        if self.needs_calibration:
            out["calibrated_coupling_cap_f"] = self.calibrated_coupling_cap_f
            out["calibration"] = {
                "target_j_hz": self.calibration.target_j_hz,
                "at_theta_deg": self.calibration.at_theta_deg,
                "at_freq_hz": self.calibration_freq_hz,
            }
        return out

    def _links(self):
        return [
            RingLink(lk["ring_a"], math.radians(lk["angle_a_deg"]), lk["ring_b"], math.radians(lk["angle_b_deg"]), lk.get("z_c_ohm"))
            for lk in self.links
        ]

    def _bare_topology(self):
        placements = [
            QubitPlacement(q.ring, math.radians(q.angle_deg), LinearizedQubit.from_frequency(q.freq_hz, self.qubit_capacitance_f), q.label)
            for q in self.qubits
        ]
        return MultiRingTopology(self.rings, self._links(), placements)

    def topology(self):
        """Topology with every qubit carrying its (possibly calibrated) coupling cap."""
        placements = [
            QubitPlacement(q.ring, math.radians(q.angle_deg), LinearizedQubit.from_frequency(q.freq_hz, self.qubit_capacitance_f, cg), q.label)
            for q, cg in zip(self.qubits, self.coupling_caps_f())
        ]
        return MultiRingTopology(self.rings, self._links(), placements)

    def transmon_specs(self):
        return [q.transmon for q in self.qubits]

    def pair_angles(self):
        """``(i, j, separation_deg)`` for same-ring pairs, separation folded into [0, 180]."""
        out = []
        for i, qi in enumerate(self.qubits):
            for j in range(i + 1, len(self.qubits)):
                qj = self.qubits[j]
                if qi.ring == qj.ring:
                    sep = (qj.angle_deg - qi.angle_deg) % 360.0
                    out.append((i, j, min(sep, 360.0 - sep)))
        return out


def _reject_duplicate_keys(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ValueError(f"duplicate key {key!r}")
        out[key] = value
    return out


def _number(doc, key, path, default=None, required=True):
    if key not in doc or doc[key] is None:
        if required and default is None:
            raise ValidationError(f"{path}.{key} is required")
        return default
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(f"{path}.{key} must be a finite number, got {value!r}")
    return float(value)


def _positive(doc, key, path, default=None, required=True):
    value = _number(doc, key, path, default, required)
    if value is not None and not value > 0:
        raise ValidationError(f"{path}.{key} must be positive, got {value!r}")
    return value


def _angle(doc, key, path):
    value = _number(doc, key, path)
    if not 0.0 <= value < 360.0:
        raise ValidationError(f"{path}.{key} must lie in [0, 360), got {value!r}")
    return value


def _ring_index(doc, key, path, n_rings):
    value = doc.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{path}.{key} must be an integer ring index, got {value!r}")
    if not 0 <= value < n_rings:
        raise ValidationError(f"{path}.{key} references missing ring {value}")
    return value


def device_spec_from_dict(doc, source=""):
    """Validate a decoded device document; the first failing field is named by its JSON path."""
    if not isinstance(doc, dict):
        raise ValidationError("$ must be an object")
    defaults = doc.get("defaults") or {}
    z0 = _positive(defaults, "z0_ohm", "$.defaults", 50.0)
    cq = _positive(defaults, "qubit_capacitance_f", "$.defaults", DEFAULT_QUBIT_CAPACITANCE)
    raw_rings = doc.get("rings")
    if not isinstance(raw_rings, list) or not raw_rings:
        raise ValidationError("$.rings must be a non-empty array")
    rings = []
    for i, r in enumerate(raw_rings):
        path = f"$.rings[{i}]"
        rings.append(RingSpec(_positive(r, "fundamental_hz", path), _positive(r, "impedance_ohm", path, 50.0), z0))
    links = []
    for i, lk in enumerate(doc.get("links") or []):
        path = f"$.links[{i}]"
        entry = {
            "ring_a": _ring_index(lk, "ring_a", path, len(rings)),
            "angle_a_deg": _angle(lk, "angle_a_deg", path),
            "ring_b": _ring_index(lk, "ring_b", path, len(rings)),
            "angle_b_deg": _angle(lk, "angle_b_deg", path),
            "z_c_ohm": _positive(lk, "z_c_ohm", path, required=False),
        }
        if entry["ring_a"] == entry["ring_b"]:
            raise ValidationError(f"{path} joins ring {entry['ring_a']} to itself")
        links.append(entry)
    raw_qubits = doc.get("qubits")
    if not isinstance(raw_qubits, list):
        raise ValidationError("$.qubits must be an array")
    qubits, seen = [], {}
    for i, q in enumerate(raw_qubits):
        path = f"$.qubits[{i}]"
        label = q.get("label")
        if not isinstance(label, str) or not label:
            raise ValidationError(f"{path}.label must be a non-empty string")
        if label in seen:
            raise ValidationError(f"{path}.label duplicates {label!r} (first at $.qubits[{seen[label]}])")
        seen[label] = i
        qubits.append(
            QubitEntry(
                label,
                _ring_index(q, "ring", path, len(rings)),
                _angle(q, "angle_deg", path),
                _positive(q, "freq_hz", path),
                _number(q, "anharmonicity_hz", path),
                _positive(q, "coupling_cap_f", path, required=False),
                {k: v for k, v in q.items() if k not in QUBIT_FIELDS},
            )
        )
    cal = defaults.get("calibration") or {}
    calibration = Calibration(
        _positive(cal, "target_j_hz", "$.defaults.calibration", DEFAULT_TARGET_J_HZ),
        _number(cal, "at_theta_deg", "$.defaults.calibration", 180.0),
        _positive(cal, "at_freq_hz", "$.defaults.calibration", required=False),
    )
    try:
        return DeviceSpec(rings, qubits, links, z0, cq, calibration, source)
    except ValidationError as exc:
        raise ValidationError(f"$: {exc}") from None


def parse_device_spec(path):
    """Load and validate a device file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    return parse_device_text(text, str(path))


def parse_device_text(text, source="<string>"):
    try:
        doc = json.loads(text, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except ValueError as exc:
        raise ParseError(f"{source}: {exc}") from None
    try:
        return device_spec_from_dict(doc, source)
    except ValidationError as exc:
        raise ValidationError(f"{source}: {exc}") from None


def bundled_path(name):
    """Filesystem path of a data file shipped with the package."""
    return str(resources.files("ringbus") / "data" / name)


def load_bundled_device(name="paper12q.json"):
    return parse_device_spec(bundled_path(name))
