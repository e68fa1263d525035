import math

import numpy as np
import pytest

from ringbus.exceptions import MultiplePaths, NoPath, ValidationError
from ringbus.ring import LinearizedQubit, RingSpec, coupling_at
from ringbus.scaling import (
    MultiRingTopology,
    QubitPlacement,
    RingLink,
    classify,
    default_coupling_capacitance,
    half_wave_two_port,
    inter_ring_two_port,
    long_ring_report,
    multi_ring_coupling,
    star_topology,
    topology_report,
)

F0 = 3.1e9
SPECIAL = 1.5 * F0


@pytest.fixture(scope="module")
def cg():
    return default_coupling_capacitance()


@pytest.fixture(scope="module")
def q(cg):
    return LinearizedQubit.from_frequency(SPECIAL, 63e-15, cg)


@pytest.fixture(scope="module")
def long_report():
    return long_ring_report()


@pytest.fixture(scope="module")
def star_report():
    return topology_report(star_topology(), SPECIAL)


def two_ring(q, attach_b=0.0, qa=math.radians(30), qb=math.radians(30)):
    ring = RingSpec()
    return MultiRingTopology(
        [ring, ring],
        [RingLink(0, 0.0, 1, attach_b)],
        [QubitPlacement(0, qa, q, "a"), QubitPlacement(1, qb, q, "b")],
    )


class TestHalfWave:
    def test_resonance_is_minus_identity(self):
        assert np.allclose(half_wave_two_port(25.0, 3e9, 3e9).matrix, -np.eye(2))

    def test_half_resonance_is_quarter_wave(self):
        tp = half_wave_two_port(25.0, 3e9, 1.5e9)
        assert np.allclose(tp.matrix, [[0, 25j], [1j / 25, 0]], atol=1e-12)

    def test_reciprocal(self):
        for f in np.random.default_rng(1).uniform(1e9, 9e9, 50):
            assert half_wave_two_port(25.0, 3.1e9, f).is_reciprocal()


class TestInterRing:
    def test_cross_pair_transmits_and_is_reciprocal(self, q):
        tp = inter_ring_two_port(two_ring(q), 0, 1, SPECIAL)
        assert tp.is_reciprocal(1e-9)
        assert abs(multi_ring_coupling(two_ring(q), 0, 1, SPECIAL).j_hz) > 1e5

    def test_swap_symmetry(self, q):
        topo = two_ring(q, qb=math.radians(90))
        assert math.isclose(
            multi_ring_coupling(topo, 0, 1, 4.7e9).j_hz, multi_ring_coupling(topo, 1, 0, 4.7e9).j_hz, rel_tol=1e-6
        )

    def test_rings_attached_at_120_are_decoupled(self, star_report):
        topo = star_topology()
        labels = [p.label for p in topo.qubits]
        for p in star_report.pairs:
            if p.label_i.startswith("r") and p.label_j.startswith("r"):
                a, b = int(p.label_i[1]), int(p.label_j[1])
                if a != b and (a - b) % 6 in (2, 4):
                    assert abs(p.j_hz) < 1e3, (p.label_i, p.label_j)
        assert len(labels) == 42

    def test_unlinked_rings_have_no_path(self, q):
        ring = RingSpec()
        topo = MultiRingTopology([ring, ring], [], [QubitPlacement(0, 0.5, q), QubitPlacement(1, 0.5, q)])
        with pytest.raises(NoPath):
            multi_ring_coupling(topo, 0, 1, SPECIAL)

    def test_parallel_links_rejected(self, q):
        ring = RingSpec()
        topo = MultiRingTopology(
            [ring, ring],
            [RingLink(0, 0.0, 1, 0.0), RingLink(0, math.pi, 1, math.pi)],
            [QubitPlacement(0, 0.5, q), QubitPlacement(1, 0.5, q)],
        )
        with pytest.raises(MultiplePaths):
            topo.ring_path(0, 1)

    def test_topology_validation(self, q):
        ring = RingSpec()
        with pytest.raises(ValidationError):
            MultiRingTopology([ring], [RingLink(0, 0.0, 0, 1.0)], [])
        with pytest.raises(ValidationError):
            MultiRingTopology([ring], [RingLink(0, 0.0, 3, 1.0)], [])
        with pytest.raises(ValidationError):
            MultiRingTopology([ring, ring], [RingLink(0, 0.0, 1, 0.0)], [QubitPlacement(0, 0.0, q)])


class TestLongRing:
    def test_partner_count(self, long_report):
        assert long_report.partner_counts(36) == [27] * 36

    def test_zeros_every_40_degrees(self, long_report):
        for p in long_report.pairs:
            if round(float(p.descriptor)) % 40 == 0:
                assert abs(p.j_hz) < 1e3

    def test_follows_transfer_impedance(self, long_report):
        seps = np.array([float(p.descriptor) for p in long_report.pairs])
        j = np.array([abs(p.j_hz) for p in long_report.pairs])
        shape = np.abs(np.sin(4.5 * np.radians(seps)))
        keep = shape > 0.1
        ratio = j[keep] / shape[keep]
        assert np.ptp(ratio) / ratio.mean() < 0.01

    def test_more_frequency_sensitive_than_small_ring(self, cg):
        def rel_slope(f0, deg, fsp):
            ring = RingSpec(f0)
            vals = []
            for f in (fsp - 1e6, fsp, fsp + 1e6):
                qq = LinearizedQubit.from_frequency(f, 63e-15, cg)
                vals.append(coupling_at(qq, qq, ring.tap_pair(math.radians(deg)), f).j_hz)
            return abs(vals[2] - vals[0]) / 2e6 / abs(vals[1])

        long_ring = np.mean([rel_slope(1e9, d, 4.5e9) for d in range(10, 180, 10) if d % 40])
        small_ring = np.mean([rel_slope(F0, d, SPECIAL) for d in (30, 60, 90, 150, 180)])
        assert long_ring > small_ring


class TestTwelveSlotRing:
    def test_nine_partners_each(self, q):
        ring = RingSpec()
        topo = MultiRingTopology([ring], [], [QubitPlacement(0, math.radians(30 * k), q, f"q{k}") for k in range(12)])
        rep = topology_report(topo, SPECIAL)
        assert rep.partner_counts(12) == [9] * 12

    def test_single_qubit_has_no_pairs(self, q):
        rep = topology_report(MultiRingTopology([RingSpec()], [], [QubitPlacement(0, 0.0, q)]), SPECIAL)
        assert rep.pairs == [] and rep.partner_counts(1) == [0]

    def test_relabeling_invariance(self, q):
        ring = RingSpec()
        angles = [0, 60, 240, 270]
        base = MultiRingTopology([ring], [], [QubitPlacement(0, math.radians(a), q, f"q{a}") for a in angles])
        perm = MultiRingTopology([ring], [], [QubitPlacement(0, math.radians(a), q, f"q{a}") for a in angles[::-1]])
        by_labels = lambda rep: {frozenset((p.label_i, p.label_j)): p.j_hz for p in rep.pairs}
        a, b = by_labels(topology_report(base, SPECIAL)), by_labels(topology_report(perm, SPECIAL))
        assert a.keys() == b.keys()
        assert all(math.isclose(a[k], b[k], rel_tol=1e-9, abs_tol=1e-3) for k in a)


class TestStar:
    def test_partner_counts(self, star_report):
        counts = star_report.partner_counts(42)
        assert counts[:6] == [39] * 6 and counts[6:] == [27] * 36

    def test_two_classes(self, star_report):
        for cls in ("strong", "weak"):
            vals = star_report.class_values(cls)
            assert vals.size and np.ptp(vals) / vals.mean() < 0.005
        assert star_report.class_values("zero").max() < 1e3


class TestClassify:
    def test_zero_strong_weak(self):
        assert classify([0.0, 1.0, 0.7071, 1.0, 0.001]) == ["zero", "strong", "weak", "strong", "zero"]

    def test_single_cluster_is_strong(self):
        assert classify([2.0, 2.0, -2.0]) == ["strong"] * 3

    def test_nan_has_no_class(self):
        assert classify([float("nan"), 1.0]) == ["", "strong"]
