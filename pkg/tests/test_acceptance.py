"""Acceptance criteria 1-11, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL ...`` line; the lines are also
collected into a terminal summary section.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, SPECIAL_HZ
from ringbus.crosstalk import (
    CRSetup,
    DephasingInput,
    cr_amplitudes,
    cr_ix_amplitude,
    cr_zx_amplitude,
    estimate_crosstalk,
    phase_phasor,
    readout_dephasing_rate,
    simulate_cr_tomography,
)
from ringbus.inversion import CrossKerrCouplingRegressor, synthesize_cross_kerr
from ringbus.network import (
    RingTapPair,
    reflection_coefficients,
    ring_two_port,
    ring_two_port_closed_form,
    scattering_amplitudes,
)
from ringbus.ring import LinearizedQubit, coupling_at, coupling_map
from ringbus.scaling import long_ring_report, star_topology, topology_report
from ringbus.spectrum import TransmonSpec, TruncationPolicy, coupling_matrix, cross_kerr, diagonalize, build_hamiltonian, ramsey_shift

PUBLISHED_J = np.array([3.45, 4.57, 2.40, 0.05, -3.58, -4.74]) * 1e6
COUPLED_DEG = [30, 60, 90, 150, 180, 210, 270, 300, 330]


def verdict(n, ok, detail, started):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail} ({time.perf_counter() - started:.1f} s)"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def j_at(qubit, ring, deg, freq=SPECIAL_HZ):
    q = LinearizedQubit.from_frequency(freq, qubit.capacitance, qubit.coupling_capacitance)
    return coupling_at(q, q, ring.tap_pair(math.radians(deg)), freq).j_hz


def test_criterion_1_interference_null(qubit, ring):
    t = time.perf_counter()
    vals = [abs(j_at(qubit, ring, d)) for d in (120, 240)]
    verdict(1, max(vals) < 1e3, f"|J(120)|={vals[0]:.3g} Hz |J(240)|={vals[1]:.3g} Hz (< 1 kHz)", t)


def test_criterion_2_sqrt2_ratio(qubit, ring):
    t = time.perf_counter()
    mags = np.array([abs(j_at(qubit, ring, d)) for d in COUPLED_DEG])
    ratio = mags.max() / mags.min()
    verdict(2, abs(ratio / math.sqrt(2) - 1) < 0.005, f"max/min={ratio:.6f} vs sqrt2={math.sqrt(2):.6f} (0.5%)", t)


def test_criterion_3_flat_band(qubit, ring):
    t = time.perf_counter()
    freqs = np.linspace(SPECIAL_HZ - 100e6, SPECIAL_HZ + 100e6, 40)
    cmap = coupling_map(qubit, ring.tap_pair(math.pi), np.radians([30, 60, 90, 150, 180]), freqs)
    mags = np.abs(cmap.j_hz)
    spread = (mags.max(axis=1) - mags.min(axis=1)) / (mags.max(axis=1) + mags.min(axis=1))
    ok = bool(np.all(np.isfinite(mags)) and np.all(spread < 0.10))
    verdict(3, ok, f"worst half-spread {spread.max():.4f} over {mags.size} points (< 0.10)", t)


def test_criterion_4_calibrated_magnitude(qubit, ring):
    t = time.perf_counter()
    j60 = abs(j_at(qubit, ring, 60))
    weak = np.array([abs(j_at(qubit, ring, d)) for d in (30, 90, 150)])
    in_band = np.all((weak >= 0.85 * 2.40e6) & (weak <= 1.15 * 3.58e6))
    mutual = weak.max() / weak.min() - 1 < 0.15
    ok = abs(j60 / 4.57e6 - 1) < 0.15 and in_band and mutual
    verdict(4, bool(ok), f"|J(60)|={j60 / 1e6:.3f} MHz, |J(30,90,150)|={np.round(weak / 1e6, 3).tolist()} MHz", t)


def test_criterion_5_cross_kerr_forward(measured_set):
    t = time.perf_counter()
    jm = coupling_matrix(4, {(p.a, p.b): j for p, j in zip(measured_set.pairs, PUBLISHED_J)})
    spec = diagonalize(build_hamiltonian(measured_set.specs, jm, TruncationPolicy(8, 8)), 2)
    worst, ok = 0.0, True
    for p in measured_set.pairs:
        shift = ramsey_shift(spec, p.a, p.b)
        err = abs(shift - p.cross_kerr_hz)
        ok &= err <= max(20e3, 0.2 * abs(p.cross_kerr_hz))
        worst = max(worst, err)
    null = next(p for p in measured_set.pairs if round(p.angle_deg) == 120)
    chi_null = cross_kerr(spec, null.a, null.b)
    ok &= abs(chi_null) < 10e3
    verdict(5, bool(ok), f"worst |shift error|={worst / 1e3:.2f} kHz, 120 deg chi={chi_null / 1e3:.2f} kHz", t)


@pytest.mark.slow
def test_criterion_6_inversion_roundtrip(measured_set):
    t = time.perf_counter()
    rng = np.random.default_rng(20240607)
    signs = measured_set.signs()
    policy = TruncationPolicy(8, 8)
    failures, rescued = [], 0
    for trial in range(10):
        truth = signs * rng.uniform(0.0, 6e6, len(signs))
        meas = measured_set.with_cross_kerr(synthesize_cross_kerr(measured_set, truth, policy))
        result = CrossKerrCouplingRegressor(policy.levels, policy.max_total).fit(meas).result_
        err = np.max(np.abs(result.j_hz - truth))
        if err >= 1e3:
            near = any(np.max(np.abs(alt - truth)) < 1e3 for alt in result.alternatives_hz)
            rescued += near
            failures.append(f"trial {trial}: err {err / 1e3:.0f} kHz chi2 {result.chi2:.1e}{' truth among alternatives' if near else ''}")
    detail = f"{10 - len(failures)}/10 within 1 kHz"
    if failures:
        detail += f"; {len(failures)} fitted another exact solution ({rescued} listed the truth as an alternative)"
    verdict(6, not failures, detail, t)


@pytest.mark.slow
def test_criterion_7_measured_inversion(measured_set):
    t = time.perf_counter()
    result = CrossKerrCouplingRegressor(8, 8).fit(measured_set).result_
    err = np.abs(result.j_hz - PUBLISHED_J)
    verdict(7, bool(np.all(err < 0.15e6)), f"J={np.round(result.j_hz / 1e6, 3).tolist()} MHz, worst error {err.max() / 1e6:.3f} MHz", t)


@pytest.mark.slow
def test_criterion_8_scaling():
    t = time.perf_counter()
    long_rep = long_ring_report()
    zeros = [abs(p.j_hz) for p in long_rep.pairs if round(float(p.descriptor)) % 40 == 0]
    partners = long_rep.partner_counts(36)
    star = topology_report(star_topology(), 1.5 * 3.1e9)
    cross = []
    for p in star.pairs:
        if p.label_i.startswith("r") and p.label_j.startswith("r"):
            a, b = int(p.label_i[1]), int(p.label_j[1])
            if a != b and (a - b) % 6 in (2, 4):
                cross.append(abs(p.j_hz))
    spreads = [np.ptp(star.class_values(c)) / star.class_values(c).mean() for c in ("strong", "weak")]
    ok = (
        max(zeros) < 1e3
        and partners == [27] * 36
        and cross
        and max(cross) < 1e3
        and all(s < 0.005 for s in spreads)
        and {p.coupling_class for p in star.pairs} - {"zero"} == {"strong", "weak"}
    )
    detail = (
        f"long-ring max |J(40k)|={max(zeros):.2g} Hz, partners {set(partners)}; "
        f"120-deg cross pairs max {max(cross):.2g} Hz over {len(cross)}; class spreads {np.round(spreads, 5).tolist()}"
    )
    verdict(8, bool(ok), detail, t)


def test_criterion_9_network_algebra():
    t = time.perf_counter()
    rng = np.random.default_rng(9)
    f0 = 3.1e9
    n, checked = 0, 0
    worst = dict(recip=0.0, refl=0.0, k=0.0, z0=0.0, closed=0.0)
    while checked < 1000:
        n += 1
        theta = rng.uniform(0.05, 2 * math.pi - 0.05)
        x = rng.uniform(0.5, 2.5)
        pair = RingTapPair(theta, f0)
        ha, hb = 0.5 * x * theta, 0.5 * x * (2 * math.pi - theta)
        if min(abs(math.sin(ha + hb)), abs(math.cos(ha) * math.cos(hb)), abs(math.sin(ha) * math.sin(hb))) < 1e-3:
            continue
        checked += 1
        tp = ring_two_port(pair, x * f0)
        worst["recip"] = max(worst["recip"], abs(tp.a * tp.d - tp.b * tp.c - 1))
        ge, go = reflection_coefficients(pair, x * f0)
        worst["refl"] = max(worst["refl"], abs(abs(ge) - 1), abs(abs(go) - 1))
        k1, k2 = scattering_amplitudes(pair, x * f0)
        worst["k"] = max(worst["k"], abs(abs(k1) ** 2 + abs(k2) ** 2 - 1))
        scale = np.abs(tp.matrix).max()
        other = ring_two_port(RingTapPair(theta, f0, z0=rng.uniform(5, 200)), x * f0).matrix
        worst["z0"] = max(worst["z0"], np.abs(other - tp.matrix).max() / scale)
        closed = ring_two_port_closed_form(pair, x * f0).matrix
        worst["closed"] = max(worst["closed"], np.abs(closed - tp.matrix).max() / scale)
    ok = worst["recip"] < 1e-9 and worst["refl"] < 1e-9 and worst["k"] < 1e-9 and worst["z0"] < 1e-8 and worst["closed"] < 1e-8
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" over {checked} points"
    verdict(9, bool(ok), detail, t)


def test_criterion_10_cross_resonance():
    t = time.perf_counter()
    control, target = TransmonSpec(4.6566e9, -309e6, "Q9"), TransmonSpec(4.7488e9, -308e6, "Q10")
    j, delta, anh = 3.45e6, control.omega_hz - target.omega_hz, control.anharmonicity_hz
    w = 10e3
    lead_zx = abs(cr_zx_amplitude(j, w, delta, anh) / w / (-(j / delta) * anh / (anh + delta)) - 1)
    lead_ix = abs(cr_ix_amplitude(j, w, delta, anh) / w / (-j / (anh + delta)) - 1)
    grid = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    drive = abs(delta) / 10
    clean = simulate_cr_tomography(CRSetup(control, target, j, drive), grid)
    zx_formula, _ = cr_amplitudes(CRSetup(control, target, j, drive))
    zx_err = abs(abs(phase_phasor(grid, clean.a_zx, clean.a_zy)) - abs(zx_formula)) / abs(zx_formula)
    flat = all(
        np.max(np.abs(getattr(clean, c) - getattr(clean, c).mean())) < 3 * np.max(clean.sigma[c]) + 1e-9 * abs(getattr(clean, c).mean())
        for c in ("a_zz", "a_iz")
    )
    m_err = {}
    for m in (0.001, 0.01, 0.05):
        trace = simulate_cr_tomography(CRSetup(control, target, j, drive, crosstalk=m, crosstalk_phase=0.7), grid)
        m_err[m] = abs(estimate_crosstalk(trace, j, delta, anh).crosstalk / m - 1)
    ok = lead_zx < 1e-3 and lead_ix < 1e-3 and zx_err < 0.1 and flat and max(m_err.values()) < 0.1
    detail = (
        f"leading order {lead_zx:.1e}/{lead_ix:.1e}, tomography ZX error {zx_err:.4f}, "
        f"m errors {[round(v, 4) for v in m_err.values()]}, ZZ/IZ flat {flat}"
    )
    verdict(10, bool(ok), detail, t)


def test_criterion_11_dephasing():
    t = time.perf_counter()
    zero = readout_dephasing_rate(DephasingInput(8e-6, 8e-6, 13))
    one = readout_dephasing_rate(DephasingInput(8e-6, 2e-6, 13))
    two = readout_dephasing_rate(DephasingInput(8e-6, 2e-6, 26))
    ok = zero == 0.0 and math.isclose(two, one / 2, rel_tol=1e-12) and math.isclose(one, 3.75e5 / 13, rel_tol=1e-12)
    verdict(11, ok, f"zero case {zero}, rate {one:.2f} /s/photon, doubled photons {two:.2f}", t)
