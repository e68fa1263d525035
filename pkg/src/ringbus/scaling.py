"""Larger networks: long rings and rings joined by half-wave links.

A path between two qubits on different rings is a chain of ring sections and
links. Each ring section is the two-tap ring network between the two points
where the path enters and leaves that ring; the rest of the ring loads the
section exactly as in a single-ring pair. Other branches hanging off a ring
along the path are not included.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._validation import check_positive, parallel_map
from .exceptions import DecoupledPorts, MultiplePaths, NoPath, RingbusError, ValidationError
from .network import TwoPort, ring_abcd_scaled, series_capacitor
from .ring import (
    LinearizedQubit,
    RingSpec,
    calibrate_coupling_cap,
    coupling_through,
)

ZERO_FRACTION = 0.01
CLUSTER_RTOL = 0.02


def half_wave_two_port(z_c, resonance_hz, freq):
    """Line that is half a wavelength long at ``resonance_hz``."""
    check_positive(z_c, "z_c")
    check_positive(resonance_hz, "resonance_hz")
    bl = math.pi * freq / resonance_hz
    return TwoPort(complex(math.cos(bl)), 1j * z_c * math.sin(bl), 1j * math.sin(bl) / z_c, complex(math.cos(bl)), freq)


def _half_wave_scaled(z_c, resonance_hz):
    def scaled(freqs):
        bl = np.pi * np.asarray(freqs, dtype=float) / resonance_hz
        cs, sn = np.cos(bl).astype(complex), np.sin(bl)
        m = np.stack(
            [np.stack([cs, 1j * z_c * sn], axis=-1), np.stack([1j * sn / z_c, cs], axis=-1)],
            axis=-2,
        )
        return m, np.ones_like(bl)

    return scaled


def _ring_section_scaled(ring, angle_in, angle_out):
    theta = (angle_out - angle_in) % (2.0 * math.pi)
    if theta == 0.0:
        raise ValidationError("path enters and leaves a ring at the same point")
    f0, zr = ring.fundamental_hz, ring.z_ring
    return lambda freqs: ring_abcd_scaled(theta, np.asarray(freqs, dtype=float) / f0, zr)


def cascade_scaled(sections):
    """Chain several scaled networks; pole factors multiply."""

    def scaled(freqs):
        m, s = sections[0](freqs)
        for sec in sections[1:]:
            m2, s2 = sec(freqs)
            m = m @ m2
            s = s * s2
        return m, s

    return scaled


@dataclass(frozen=True)
class RingLink:
    """Half-wave line joining ``ring_a`` at ``angle_a`` to ``ring_b`` at ``angle_b`` (radians).

    ``z_c`` defaults to half the ring impedance and ``resonance_hz`` to the
    fundamental of ``ring_a``.
    """

    ring_a: int
    angle_a: float
    ring_b: int
    angle_b: float
    z_c: float = None
    resonance_hz: float = None


@dataclass(frozen=True)
class QubitPlacement:
    ring: int
    angle: float
    qubit: LinearizedQubit
    label: str = ""


@dataclass
class MultiRingTopology:
    rings: list
    links: list = field(default_factory=list)
    qubits: list = field(default_factory=list)

    def __post_init__(self):
        if not self.rings:
            raise ValidationError("topology needs at least one ring")
        n = len(self.rings)
        for i, link in enumerate(self.links):
            for r in (link.ring_a, link.ring_b):
                if not 0 <= r < n:
                    raise ValidationError(f"links[{i}] references missing ring {r}")
            if link.ring_a == link.ring_b:
                raise ValidationError(f"links[{i}] joins ring {link.ring_a} to itself")
        attach = {(lk.ring_a, round(lk.angle_a % (2 * math.pi), 12)) for lk in self.links}
        attach |= {(lk.ring_b, round(lk.angle_b % (2 * math.pi), 12)) for lk in self.links}
        for i, q in enumerate(self.qubits):
            if not 0 <= q.ring < n:
                raise ValidationError(f"qubits[{i}] references missing ring {q.ring}")
            if (q.ring, round(q.angle % (2 * math.pi), 12)) in attach:
                raise ValidationError(f"qubits[{i}] sits on a link attach point")

    def link_impedance(self, link):
        return link.z_c if link.z_c is not None else 0.5 * self.rings[link.ring_a].z_ring

    def link_resonance(self, link):
        return link.resonance_hz if link.resonance_hz is not None else self.rings[link.ring_a].fundamental_hz

    def ring_path(self, ring_a, ring_b):
        """Links (with traversal direction) leading from ``ring_a`` to ``ring_b``."""
        if ring_a == ring_b:
            return []
        paths = []

        def walk(ring, visited, hops):
            if len(paths) > 1:
                return
            if ring == ring_b:
                paths.append(list(hops))
                return
            for link in self.links:
                if link.ring_a == ring and link.ring_b not in visited:
                    nxt, forward = link.ring_b, True
                elif link.ring_b == ring and link.ring_a not in visited:
                    nxt, forward = link.ring_a, False
                else:
                    continue
                walk(nxt, visited | {nxt}, hops + [(link, forward)])

        walk(ring_a, {ring_a}, [])
        if not paths:
            raise NoPath(f"no link path between ring {ring_a} and ring {ring_b}")
        if len(paths) > 1:
            raise MultiplePaths(f"rings {ring_a} and {ring_b} are joined by more than one path")
        return paths[0]

    def path_network(self, qubit_a, qubit_b):
        """Scaled bare network (no coupling caps) from qubit ``qubit_a`` to ``qubit_b``."""
        qa, qb = self.qubits[qubit_a], self.qubits[qubit_b]
        sections = []
        ring, angle = qa.ring, qa.angle
        for link, forward in self.ring_path(qa.ring, qb.ring):
            out_angle, next_ring, in_angle = (
                (link.angle_a, link.ring_b, link.angle_b) if forward else (link.angle_b, link.ring_a, link.angle_a)
            )
            sections.append(_ring_section_scaled(self.rings[ring], angle, out_angle))
            sections.append(_half_wave_scaled(self.link_impedance(link), self.link_resonance(link)))
            ring, angle = next_ring, in_angle
        sections.append(_ring_section_scaled(self.rings[ring], angle, qb.angle))
        return cascade_scaled(sections)


def inter_ring_two_port(topology, qubit_a, qubit_b, freq):
    """ABCD from qubit ``qubit_a`` to ``qubit_b`` including both coupling caps."""
    check_positive(freq, "freq")
    m, s = topology.path_network(qubit_a, qubit_b)(freq)
    s = float(s)
    if abs(s) < 1e-14:
        raise DecoupledPorts(f"path between qubits {qubit_a} and {qubit_b} is singular at {freq:.9g} Hz")
    qa, qb = topology.qubits[qubit_a], topology.qubits[qubit_b]
    core = TwoPort.from_matrix(np.asarray(m) / s, freq)
    return series_capacitor(qa.qubit.coupling_capacitance, freq) @ core @ series_capacitor(qb.qubit.coupling_capacitance, freq)


def multi_ring_coupling(topology, qubit_a, qubit_b, freq, tol=1.0):
    """Signed J between two placed qubits, both tuned to ``freq``."""
    qa, qb = topology.qubits[qubit_a], topology.qubits[qubit_b]
    network = topology.path_network(qubit_a, qubit_b)
    f0 = topology.rings[qa.ring].fundamental_hz
    return coupling_through(network, qa.qubit, qb.qubit, f0, freq, tol)


@dataclass(frozen=True)
class PairCoupling:
    qubit_i: int
    qubit_j: int
    label_i: str
    label_j: str
    descriptor: str
    j_hz: float
    coupling_class: str = ""
    error: str = ""


@dataclass
class ConnectivityReport:
    freq_hz: float
    pairs: list

    def partners(self, index):
        return [
            p.qubit_j if p.qubit_i == index else p.qubit_i
            for p in self.pairs
            if index in (p.qubit_i, p.qubit_j) and p.coupling_class in ("strong", "weak")
        ]

    def partner_counts(self, n_qubits):
        return [len(self.partners(i)) for i in range(n_qubits)]

    def class_values(self, cls):
        return np.array([abs(p.j_hz) for p in self.pairs if p.coupling_class == cls])

    def rows(self):
        for p in self.pairs:
            yield {
                "qubit_i": p.label_i,
                "qubit_j": p.label_j,
                "path": p.descriptor,
                "j_hz": p.j_hz,
                "class": p.coupling_class,
                "error": p.error,
            }

    def to_json(self):
        return {
            "freq_hz": self.freq_hz,
            "adjacency": [
                {"qubit_i": p.label_i, "qubit_j": p.label_j, "path": p.descriptor, "j_hz": p.j_hz, "class": p.coupling_class}
                | ({"error": p.error} if p.error else {})
                for p in self.pairs
            ],
        }


def _clusters(values, rtol=CLUSTER_RTOL):
    values = np.sort(values)
    groups = [[values[0]]]
    for v in values[1:]:
        if v > groups[-1][-1] * (1.0 + rtol):
            groups.append([v])
        else:
            groups[-1].append(v)
    return groups


def classify(j_values):
    """Label each |J| as zero (< 1% of max), strong or weak.

    Strong and weak are split at the geometric mean of the two most populated
    magnitude clusters; with a single cluster everything nonzero is strong.
    """
    mags = np.abs(np.asarray(j_values, dtype=float))
    finite = mags[np.isfinite(mags)]
    if finite.size == 0 or finite.max() == 0.0:
        return ["zero" if np.isfinite(m) else "" for m in mags]
    floor = ZERO_FRACTION * finite.max()
    nonzero = finite[finite >= floor]
    groups = sorted(_clusters(nonzero), key=len, reverse=True)
    threshold = 0.0 if len(groups) < 2 else math.sqrt(np.mean(groups[0]) * np.mean(groups[1]))
    out = []
    for m in mags:
        if not np.isfinite(m):
            out.append("")
        elif m < floor:
            out.append("zero")
        else:
            out.append("strong" if m >= threshold else "weak")
    return out


def _report(topology, freq, tol, descriptor):
    n = len(topology.qubits)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def one(pair):
        i, j = pair
        try:
            return multi_ring_coupling(topology, i, j, freq, tol).j_hz, ""
        except RingbusError as exc:
            return float("nan"), exc.code

    values = parallel_map(one, pairs)
    classes = classify([v for v, _ in values])
    out = []
    for (i, j), (value, err), cls in zip(pairs, values, classes):
        qi, qj = topology.qubits[i], topology.qubits[j]
        out.append(
            PairCoupling(i, j, qi.label or str(i), qj.label or str(j), descriptor(qi, qj), float(value), cls, err)
        )
    return ConnectivityReport(freq, out)


def _describe(qi, qj):
    if qi.ring == qj.ring:
        sep = math.degrees((qj.angle - qi.angle) % (2 * math.pi))
        return f"{min(sep, 360.0 - sep):.6g}"
    return f"ring{qi.ring}:{math.degrees(qi.angle):.6g}->ring{qj.ring}:{math.degrees(qj.angle):.6g}"


def topology_report(topology, freq, tol=1.0):
    """All-pairs couplings of a topology, classified, ordered by (i, j)."""
    return _report(topology, freq, tol, _describe)


def connectivity_report(device, freq, tol=1.0):
    """All-pairs report for a parsed device description."""
    return topology_report(device.topology(), freq, tol)


@lru_cache(maxsize=8)
def default_coupling_capacitance(fundamental_hz=3.1e9, z_ring=50.0, qubit_capacitance=63e-15):
    """Coupling cap calibrated to 4.74 MHz at 180 degrees and the first special frequency."""
    ring = RingSpec(fundamental_hz, z_ring)
    at = 1.5 * fundamental_hz
    return calibrate_coupling_cap(4.74e6, math.pi, at, LinearizedQubit.from_frequency(at, qubit_capacitance), ring)


def long_ring_topology(ring=None, n_qubits=36, spacing_deg=10.0, qubit=None):
    ring = ring or RingSpec(fundamental_hz=1e9)
    if qubit is None:
        qubit = LinearizedQubit.from_frequency(4.5e9, 63e-15, default_coupling_capacitance())
    placements = [
        QubitPlacement(0, math.radians(i * spacing_deg), qubit, f"q{i}") for i in range(n_qubits)
    ]
    return MultiRingTopology([ring], [], placements)


def long_ring_report(ring=None, n_qubits=36, spacing_deg=10.0, freq=None, qubit=None, tol=1.0):
    """Connectivity of a long ring; J depends only on separation so each angle is solved once."""
    topo = long_ring_topology(ring, n_qubits, spacing_deg, qubit)
    ring = topo.rings[0]
    freq = freq if freq is not None else 4.5 * ring.fundamental_hz
    by_sep = {}
    pairs = []
    for i in range(n_qubits):
        for j in range(i + 1, n_qubits):
            steps = min(j - i, n_qubits - (j - i))
            if steps not in by_sep:
                try:
                    by_sep[steps] = (multi_ring_coupling(topo, 0, steps, freq, tol).j_hz, "")
                except RingbusError as exc:
                    by_sep[steps] = (float("nan"), exc.code)
            pairs.append((i, j, steps))
    classes = classify([by_sep[s][0] for _, _, s in pairs])
    out = [
        PairCoupling(i, j, f"q{i}", f"q{j}", f"{steps * spacing_deg:.6g}", by_sep[steps][0], cls, by_sep[steps][1])
        for (i, j, steps), cls in zip(pairs, classes)
    ]
    return ConnectivityReport(freq, out)


def star_topology(ring=None, n_outer=6, qubit=None, z_c=None):
    """Central ring with ``n_outer`` rings on half-wave links.

    Links leave the central ring every 360/n_outer degrees starting at 0; the
    central ring carries qubits midway between links, and each outer ring
    carries six qubits at 30 + 60*k degrees from its attach point.
    """
    ring = ring or RingSpec()
    if qubit is None:
        at = 1.5 * ring.fundamental_hz
        qubit = LinearizedQubit.from_frequency(at, 63e-15, default_coupling_capacitance(ring.fundamental_hz, ring.z_ring))
    step = 2 * math.pi / n_outer
    rings = [ring] * (n_outer + 1)
    links = [RingLink(0, k * step, k + 1, 0.0, z_c) for k in range(n_outer)]
    qubits = [QubitPlacement(0, (k + 0.5) * step, qubit, f"c{k}") for k in range(n_outer)]
    for r in range(1, n_outer + 1):
        qubits += [QubitPlacement(r, math.radians(30 + 60 * k), qubit, f"r{r}q{k}") for k in range(6)]
    return MultiRingTopology(rings, links, qubits)
