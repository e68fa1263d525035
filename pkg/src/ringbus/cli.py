"""Command-line front end (``ringbus <command> ...``).

Tabular results go out as CSV with snake_case, unit-suffixed headers; summary
results as JSON. ``--out -`` streams to stdout. Failures print a JSON error
object on stderr and exit with status 1.
"""

import csv
import functools
import io
import json
import math
import sys

import click
import numpy as np

from . import __version__
from .crosstalk import (
    COEFFICIENTS,
    CRSetup,
    DephasingInput,
    TomographyTrace,
    estimate_crosstalk,
    readout_dephasing_rate,
    simulate_cr_tomography,
)
from .device import parse_device_spec
from .exceptions import ParseError, RingbusError, ValidationError
from .inversion import CrossKerrCouplingRegressor, load_measurement_set
from .ring import (
    DEFAULT_TARGET_J_HZ,
    LinearizedQubit,
    RingSpec,
    calibrate_coupling_cap,
    coupling_at,
    coupling_map,
)
from .scaling import connectivity_report, default_coupling_capacitance, multi_ring_coupling
from .spectrum import (
    TruncationPolicy,
    avoided_crossing_scan,
    build_hamiltonian,
    cross_kerr,
    diagonalize,
    ramsey_shift,
)


def parse_grid(text, name="grid"):
    """``a:b:n`` -> n evenly spaced values from a to b inclusive."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ValidationError(f"{name} must look like a:b:n, got {text!r}") from None
    if n < 1 or (n > 1 and not b > a):
        raise ValidationError(f"{name} must be increasing with n >= 1, got {text!r}")
    return np.linspace(a, b, n)


def _csv(rows, columns):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
    return buf.getvalue()


def _json(doc):
    return json.dumps(doc, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _emit(out, text):
    if out == "-":
        click.echo(text, nl=False)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _tabular(out, fmt, rows, columns, provenance=None, summary=None):
    rows = list(rows)
    if fmt == "csv":
        _emit(out, _csv(rows, columns))
        return
    doc = {}
    if provenance is not None:
        doc["provenance"] = provenance
    if summary:
        doc.update(summary)
    doc["rows"] = [{k: r.get(k) for k in columns} for r in rows]
    _emit(out, _json(doc))


def reports_errors(fn):
    """Turn package errors into a JSON error on stderr and exit status 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RingbusError as exc:
            click.echo(json.dumps(exc.to_dict()), err=True)
            sys.exit(1)

    return wrapper


out_option = click.option("--out", default="-", show_default=True, help="Output path, or - for stdout.")
format_option = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
device_option = click.option("--device", type=click.Path(dir_okay=False), help="Device description JSON.")
tol_option = click.option("--tol", type=float, default=1.0, show_default=True, help="Mode-frequency tolerance (Hz).")


def _single_ring_context(device_path):
    """Ring, qubit capacitance, coupling cap and provenance for single-ring commands."""
    if device_path:
        dev = parse_device_spec(device_path)
        caps = {cg for cg in dev.coupling_caps_f()}
        if len(caps) != 1:
            raise ValidationError("single-ring commands need one coupling capacitance shared by all qubits")
        return dev.rings[0], dev.qubit_capacitance_f, caps.pop(), dev.provenance()
    ring = RingSpec()
    cg = default_coupling_capacitance(ring.fundamental_hz, ring.z_ring, 63e-15)
    prov = {
        "source": "defaults",
        "qubit_capacitance_f": 63e-15,
        "calibrated_coupling_cap_f": cg,
        "calibration": {"target_j_hz": DEFAULT_TARGET_J_HZ, "at_theta_deg": 180.0, "at_freq_hz": 1.5 * ring.fundamental_hz},
    }
    return ring, 63e-15, cg, prov


def _device_j_matrix(dev, freq=None, tol=1.0):
    """Signed J matrix (Hz); each pair at ``freq`` or at its mean bare frequency."""
    topo = dev.topology()
    n = len(dev.qubits)
    j = np.zeros((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            f = freq if freq is not None else 0.5 * (dev.qubits[a].freq_hz + dev.qubits[b].freq_hz)
            j[a, b] = j[b, a] = multi_ring_coupling(topo, a, b, f, tol).j_hz
    return j


def _load_couplings(path, dev):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    n = len(dev.qubits)
    j = np.zeros((n, n))
    for k, p in enumerate(doc.get("pairs", [])):
        try:
            a, b = (dev.index(x) for x in p["qubits"])
            j[a, b] = j[b, a] = float(p["j_hz"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"{path}: $.pairs[{k}] needs 'qubits' [a, b] and 'j_hz'") from None
    return j


def _couplings_for(dev, couplings, freq, tol):
    return _load_couplings(couplings, dev) if couplings else _device_j_matrix(dev, freq, tol)


@click.group()
@click.version_option(__version__, prog_name="ringbus")
def main():
    """Ring-bus coupled transmon networks: couplings, spectra, inversion and cross-talk."""


@main.command("coupling-map")
@device_option
@click.option("--grid", default="10:350:33", show_default=True, help="Tap separations a:b:n in degrees.")
@click.option("--freq-grid", default="4.55e9:4.75e9:21", show_default=True, help="Frequencies a:b:n in Hz.")
@tol_option
@format_option
@out_option
@reports_errors
def coupling_map_cmd(device, grid, freq_grid, tol, fmt, out):
    """J over a grid of tap separations and frequencies."""
    ring, cq, cg, prov = _single_ring_context(device)
    degrees = parse_grid(grid, "--grid")
    freqs = parse_grid(freq_grid, "--freq-grid")
    q = LinearizedQubit.from_frequency(float(freqs[0]), cq, cg)
    cmap = coupling_map(q, ring.tap_pair(math.pi), np.radians(degrees), freqs, tol=tol)
    rows = list(cmap.rows())
    for k, row in enumerate(rows):
        row["theta_deg"] = float(degrees[k // len(freqs)])  # echo the requested grid, not a radian round trip
    _tabular(out, fmt, rows, ["theta_deg", "freq_hz", "j_hz", "error"], prov)


@main.command("coupling")
@device_option
@click.option("--theta", type=float, required=True, help="Tap separation in degrees.")
@click.option("--freq", type=float, required=True, help="Operating frequency in Hz.")
@tol_option
@format_option
@out_option
@reports_errors
def coupling_cmd(device, theta, freq, tol, fmt, out):
    """Signed J for one tap separation and frequency."""
    if not 0.0 < theta < 360.0:
        raise ValidationError(f"--theta must lie in (0, 360) degrees, got {theta!r}")
    ring, cq, cg, prov = _single_ring_context(device)
    q = LinearizedQubit.from_frequency(freq, cq, cg)
    res = coupling_at(q, q, ring.tap_pair(math.radians(theta)), freq, tol)
    row = {
        "theta_deg": theta,
        "freq_hz": freq,
        "j_hz": res.j_hz,
        "lower_mode_hz": float(res.eigenfrequencies_hz[0]),
        "upper_mode_hz": float(res.eigenfrequencies_hz[1]),
    }
    _tabular(out, fmt, [row], list(row), prov)


def _sign(value, cls):
    if cls == "zero" or value == 0.0:
        return "0"
    if not math.isfinite(value):
        return ""
    return "+" if value > 0 else "-"


def _path_key(descriptor):
    try:
        return (0, float(descriptor), descriptor)
    except ValueError:
        return (1, 0.0, descriptor)


@main.command("report")
@click.option("--device", type=click.Path(dir_okay=False), required=True, help="Device description JSON.")
@click.option("--freq", type=float, help="Operating frequency in Hz [default: 1.5x the fundamental of ring 0].")
@tol_option
@format_option
@out_option
@reports_errors
def report_cmd(device, freq, tol, fmt, out):
    """All-pairs couplings with strong/weak/zero classes, ordered by separation."""
    dev = parse_device_spec(device)
    freq = freq if freq is not None else dev.special_frequency_hz
    rep = connectivity_report(dev, freq, tol)
    rows = sorted(rep.rows(), key=lambda r: (_path_key(r["path"]), r["qubit_i"], r["qubit_j"]))
    for r in rows:
        r["sign"] = _sign(r["j_hz"], r["class"])
        r["coupling_class"] = r.pop("class")
    cols = ["qubit_i", "qubit_j", "path", "j_hz", "sign", "coupling_class", "error"]
    _tabular(out, fmt, rows, cols, dev.provenance(), {"freq_hz": freq})


def _policy(levels, max_total):
    return TruncationPolicy(levels=levels, max_total=max_total)


couplings_option = click.option("--couplings", type=click.Path(dir_okay=False), help="JSON {pairs: [{qubits: [a, b], j_hz}]}.")
freq_for_j_option = click.option("--freq", type=float, help="Evaluate J at this frequency (Hz) instead of each pair's mean.")


@main.command("spectrum")
@click.option("--device", type=click.Path(dir_okay=False), required=True)
@couplings_option
@freq_for_j_option
@click.option("--levels", type=int, default=4, show_default=True)
@click.option("--max-total", type=int, default=3, show_default=True)
@click.option("--max-excitation", type=int, default=2, show_default=True)
@tol_option
@format_option
@out_option
@reports_errors
def spectrum_cmd(device, couplings, freq, levels, max_total, max_excitation, tol, fmt, out):
    """Dressed levels with bare-state labels."""
    dev = parse_device_spec(device)
    j = _couplings_for(dev, couplings, freq, tol)
    spec = diagonalize(build_hamiltonian(dev.transmon_specs(), j, _policy(levels, max_total)), max_excitation)
    rows = [
        {
            "state": "".join(str(v) for v in label),
            "energy_hz": float(spec.energies[k]),
            "overlap": float(spec.weights[k]),
            "ambiguous": bool(spec.ambiguous[k]),
        }
        for k, label in enumerate(spec.labels)
    ]
    rows.sort(key=lambda r: r["energy_hz"])
    _tabular(out, fmt, rows, ["state", "energy_hz", "overlap", "ambiguous"], dev.provenance(), {"labels": dev.labels})


@main.command("cross-kerr")
@click.option("--device", type=click.Path(dir_okay=False), required=True)
@couplings_option
@freq_for_j_option
@click.option("--levels", type=int, default=8, show_default=True)
@click.option("--max-total", type=int, default=8, show_default=True)
@tol_option
@format_option
@out_option
@reports_errors
def cross_kerr_cmd(device, couplings, freq, levels, max_total, tol, fmt, out):
    """Pairwise cross-Kerr and conditional-Ramsey shifts."""
    dev = parse_device_spec(device)
    j = _couplings_for(dev, couplings, freq, tol)
    spec = diagonalize(build_hamiltonian(dev.transmon_specs(), j, _policy(levels, max_total)), 2)
    rows = []
    for a in range(len(dev.qubits)):
        for b in range(a + 1, len(dev.qubits)):
            rows.append(
                {
                    "qubit_a": dev.qubits[a].label,
                    "qubit_b": dev.qubits[b].label,
                    "j_hz": float(j[a, b]),
                    "cross_kerr_hz": cross_kerr(spec, a, b),
                    "ramsey_shift_hz": ramsey_shift(spec, a, b),
                }
            )
    cols = ["qubit_a", "qubit_b", "j_hz", "cross_kerr_hz", "ramsey_shift_hz"]
    _tabular(out, fmt, rows, cols, dev.provenance())


@main.command("anticross")
@click.option("--device", type=click.Path(dir_okay=False), required=True)
@click.option("--sweep", "sweep_label", required=True, help="Label of the qubit being tuned.")
@click.option("--partner", "partner_label", required=True, help="Label of the fixed qubit.")
@click.option("--grid", help="Sweep frequencies a:b:n in Hz [default: partner +/- 30 MHz, 121 points].")
@couplings_option
@freq_for_j_option
@tol_option
@format_option
@out_option
@reports_errors
def anticross_cmd(device, sweep_label, partner_label, grid, couplings, freq, tol, fmt, out):
    """Single-excitation avoided crossing as one qubit is tuned through another."""
    dev = parse_device_spec(device)
    a, b = dev.index(sweep_label), dev.index(partner_label)
    j = _couplings_for(dev, couplings, freq, tol)
    fb = dev.qubits[b].freq_hz
    sweep = parse_grid(grid, "--grid") if grid else np.linspace(fb - 30e6, fb + 30e6, 121)
    scan = avoided_crossing_scan(dev.transmon_specs(), j, a, b, sweep)
    rows = [
        {"sweep_hz": float(f), "lower_hz": float(lo), "upper_hz": float(up), "gap_hz": float(up - lo)}
        for f, lo, up in zip(scan.sweep_hz, scan.lower_hz, scan.upper_hz)
    ]
    summary = {"min_gap_hz": scan.min_gap_hz, "min_gap_at_hz": scan.min_gap_at_hz, "j_from_gap_hz": 0.5 * scan.min_gap_hz}
    _tabular(out, fmt, rows, ["sweep_hz", "lower_hz", "upper_hz", "gap_hz"], dev.provenance(), summary)


@main.command("fit")
@click.option("--measurements", type=click.Path(dir_okay=False), required=True, help="Measurement set JSON.")
@click.option("--levels", type=int, default=8, show_default=True)
@click.option("--max-total", type=int, default=8, show_default=True)
@click.option("--max-iter", type=int, default=2000, show_default=True)
@click.option("--restarts", type=int, default=16, show_default=True, help="Quasi-random restarts around the seed.")
@click.option("--seed", type=int, default=0, show_default=True, help="Restart sequence seed.")
@out_option
@reports_errors
def fit_cmd(measurements, levels, max_total, max_iter, restarts, seed, out):
    """Invert measured cross-Kerr shifts to signed couplings (JSON)."""
    meas = load_measurement_set(measurements)
    reg = CrossKerrCouplingRegressor(
        levels=levels, max_total=max_total, max_iter=max_iter, n_restarts=restarts, restart_seed=seed
    ).fit(meas)
    doc = reg.result_.to_dict()
    doc["pairs"] = [
        {"qubits": [meas.labels[p.a], meas.labels[p.b]], "angle_deg": p.angle_deg, "j_hz": float(jv)}
        for p, jv in zip(meas.pairs, reg.result_.j_hz)
    ]
    _emit(out, _json(doc))


def _cr_pair(dev, control, target):
    c, t = dev.index(control), dev.index(target)
    if c == t:
        raise ValidationError("control and target must differ")
    return c, t


@main.command("cr-sim")
@click.option("--device", type=click.Path(dir_okay=False), required=True)
@click.option("--control", required=True)
@click.option("--target", required=True)
@click.option("--j", "j_hz", type=float, help="Exchange coupling (Hz) [default: ring model at the pair's mean frequency].")
@click.option("--drive", type=float, help="CR drive amplitude (Hz) [default: |detuning|/10].")
@click.option("--m", "crosstalk", type=float, default=0.0, show_default=True, help="Injected cross-talk ratio.")
@click.option("--phi-ct", type=float, default=0.0, show_default=True, help="Cross-talk phase (rad).")
@click.option("--grid", default="0:5.497787143782138:8", show_default=True, help="Drive phases a:b:n in rad.")
@click.option("--time", "evolution_time", type=float, help="Evolution time (s) [default: 5/|A_ZX| from the closed form].")
@click.option("--levels", type=int, default=3, show_default=True)
@tol_option
@format_option
@out_option
@reports_errors
def cr_sim_cmd(device, control, target, j_hz, drive, crosstalk, phi_ct, grid, evolution_time, levels, tol, fmt, out):
    """Simulated CR Hamiltonian tomography versus drive phase."""
    dev = parse_device_spec(device)
    c, t = _cr_pair(dev, control, target)
    if j_hz is None:
        f = 0.5 * (dev.qubits[c].freq_hz + dev.qubits[t].freq_hz)
        j_hz = multi_ring_coupling(dev.topology(), c, t, f, tol).j_hz
    specs = dev.transmon_specs()
    detuning = specs[c].omega_hz - specs[t].omega_hz
    drive = drive if drive is not None else abs(detuning) / 10.0
    setup = CRSetup(specs[c], specs[t], j_hz, drive, 0.0, crosstalk, phi_ct)
    trace = simulate_cr_tomography(setup, parse_grid(grid, "--grid"), evolution_time, n_levels=levels)
    cols = ["phase_rad"] + [f"{name}_hz" for name in COEFFICIENTS]
    prov = dev.provenance()
    prov.update(control=control, target=target, j_hz=j_hz, drive_hz=drive, crosstalk=crosstalk, crosstalk_phase_rad=phi_ct)
    _tabular(out, fmt, trace.rows(), cols, prov)


def _read_trace(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    if not rows:
        raise ParseError(f"{path}: empty trace")
    try:
        phases = np.array([float(r["phase_rad"]) for r in rows])
        cols = [np.array([float(r[f"{name}_hz"]) for r in rows]) for name in COEFFICIENTS]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad or missing column ({exc})") from None
    return TomographyTrace(phases, *cols)


@main.command("cr-estimate")
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), required=True, help="CSV written by cr-sim.")
@click.option("--device", type=click.Path(dir_okay=False), required=True)
@click.option("--control", required=True)
@click.option("--target", required=True)
@click.option("--j", "j_hz", type=float, help="Exchange coupling (Hz) [default: ring model at the pair's mean frequency].")
@tol_option
@out_option
@reports_errors
def cr_estimate_cmd(trace_path, device, control, target, j_hz, tol, out):
    """Cross-talk ratio m from a tomography trace (JSON)."""
    dev = parse_device_spec(device)
    c, t = _cr_pair(dev, control, target)
    if j_hz is None:
        f = 0.5 * (dev.qubits[c].freq_hz + dev.qubits[t].freq_hz)
        j_hz = multi_ring_coupling(dev.topology(), c, t, f, tol).j_hz
    qc, qt = dev.qubits[c], dev.qubits[t]
    est = estimate_crosstalk(_read_trace(trace_path), j_hz, qc.freq_hz - qt.freq_hz, qc.anharmonicity_hz)
    doc = {
        "control": control,
        "target": target,
        "j_hz": j_hz,
        "m": est.crosstalk,
        "drive_hz": est.drive_hz,
        "crosstalk_drive_hz": est.crosstalk_drive_hz,
        "crosstalk_phase_rad": est.crosstalk_phase,
        "measured_ix_hz": est.measured_ix_hz,
        "predicted_ix_hz": est.predicted_ix_hz,
    }
    _emit(out, _json(doc))


@main.command("dephasing")
@click.option("--tau-baseline", type=float, required=True, help="Echo time without the tone (s).")
@click.option("--tau-tone", type=float, required=True, help="Echo time with the readout tone (s).")
@click.option("--photons", type=float, required=True, help="Mean photon number of the tone.")
@out_option
@reports_errors
def dephasing_cmd(tau_baseline, tau_tone, photons, out):
    """Excess dephasing rate per photon (JSON)."""
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rate = readout_dephasing_rate(DephasingInput(tau_baseline, tau_tone, photons))
    _emit(out, _json({"rate_per_photon_hz": rate, "negative": rate < 0}))


@main.command("calibrate")
@device_option
@click.option("--target-j", type=float, default=DEFAULT_TARGET_J_HZ, show_default=True, help="|J| to match (Hz).")
@click.option("--theta", type=float, default=180.0, show_default=True, help="Tap separation (degrees).")
@click.option("--freq", type=float, help="Calibration frequency (Hz) [default: 1.5x the ring fundamental].")
@out_option
@reports_errors
def calibrate_cmd(device, target_j, theta, freq, out):
    """Coupling capacitance reproducing a target |J| (JSON)."""
    if device:
        dev = parse_device_spec(device)
        ring, cq = dev.rings[0], dev.qubit_capacitance_f
    else:
        ring, cq = RingSpec(), 63e-15
    freq = freq if freq is not None else 1.5 * ring.fundamental_hz
    cg = calibrate_coupling_cap(target_j, math.radians(theta), freq, LinearizedQubit.from_frequency(freq, cq), ring)
    doc = {
        "coupling_cap_f": cg,
        "target_j_hz": target_j,
        "at_theta_deg": theta,
        "at_freq_hz": freq,
        "fundamental_hz": ring.fundamental_hz,
        "impedance_ohm": ring.z_ring,
        "qubit_capacitance_f": cq,
    }
    _emit(out, _json(doc))


if __name__ == "__main__":
    main()
