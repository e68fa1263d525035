"""Cross-resonance amplitudes, drive cross-talk estimation and readout dephasing.

Conventions: frequencies in Hz, phases in radians. Effective two-qubit terms
are rotation rates, ``H_eff/h = sum_P (A_P / 2) P`` over P in {IX, IY, IZ, ZX,
ZY, ZZ}, so a target Bloch vector precesses at ``A_IX +/- A_ZX`` about x when
the control sits in |0> / |1>. Detuning is ``control - target``.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, least_squares
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_nonnegative, check_positive, parallel_map
from .exceptions import ResonantDenominator, UnresolvedCoefficient, ValidationError
from .spectrum import TransmonSpec

TWO_PI = 2.0 * math.pi
COEFFICIENTS = ("a_zx", "a_zy", "a_ix", "a_iy", "a_zz", "a_iz")


@dataclass(frozen=True)
class CRSetup:
    control: TransmonSpec
    target: TransmonSpec
    j_hz: float
    drive_hz: float
    phase: float = 0.0
    crosstalk: float = 0.0
    crosstalk_phase: float = 0.0

    def __post_init__(self):
        check_nonnegative(self.drive_hz, "drive_hz")
        check_nonnegative(self.crosstalk, "crosstalk")

    @property
    def detuning_hz(self):
        return self.control.omega_hz - self.target.omega_hz


def _check_denominators(detuning, anharmonicity):
    scale = max(abs(detuning), abs(anharmonicity))
    for name, value in (
        ("detuning", detuning),
        ("anharmonicity + detuning", anharmonicity + detuning),
        ("anharmonicity + 2*detuning", anharmonicity + 2 * detuning),
        ("3*anharmonicity + 2*detuning", 3 * anharmonicity + 2 * detuning),
    ):
        if abs(value) < 1e-12 * scale:
            raise ResonantDenominator(f"{name} vanishes")


def cr_zx_amplitude(j, drive, detuning, anharmonicity):
    """ZX rate up to third order in the drive (drive phase zero)."""
    _check_denominators(detuning, anharmonicity)
    d, a = detuning, anharmonicity
    lead = -(j * drive / d) * (a / (a + d))
    cubic_num = j * drive**3 * a**2 * (3 * a**3 + 11 * a**2 * d + 15 * a * d**2 + 9 * d**3)
    cubic_den = 4 * d**3 * (a + d) ** 3 * (a + 2 * d) * (3 * a + 2 * d)
    return lead + cubic_num / cubic_den


def cr_ix_amplitude(j, drive, detuning, anharmonicity):
    """IX rate from the cross-resonance drive alone, up to third order."""
    _check_denominators(detuning, anharmonicity)
    d, a = detuning, anharmonicity
    lead = -j * drive / (a + d)
    cubic = j * drive**3 * a * d / ((a + d) ** 3 * (a + 2 * d) * (3 * a + 2 * d))
    return lead + cubic


def cr_amplitudes(setup):
    """``(A_ZX, A_IX)`` in Hz for ``setup`` at drive phase zero."""
    args = (setup.j_hz, setup.drive_hz, setup.detuning_hz, setup.control.anharmonicity_hz)
    return cr_zx_amplitude(*args), cr_ix_amplitude(*args)


def _ladder(levels):
    return np.diag(np.sqrt(np.arange(1, levels)), 1)


def cr_hamiltonian(setup, levels=3):
    """Two-transmon Hamiltonian (Hz) in the frame rotating at the target frequency, RWA drives."""
    b = _ladder(levels)
    eye = np.eye(levels)
    n = b.T @ b
    b1, b2 = np.kron(b, eye), np.kron(eye, b)
    n1, n2 = np.kron(n, eye), np.kron(eye, n)
    c, t = setup.control, setup.target
    h = setup.detuning_hz * n1 + 0.5 * c.anharmonicity_hz * (n1 @ n1 - n1)
    h = h + 0.5 * t.anharmonicity_hz * (n2 @ n2 - n2)
    h = h + setup.j_hz * (b1.T @ b2 + b2.T @ b1)
    drive = 0.5 * setup.drive_hz * np.exp(-1j * setup.phase) * b1.T
    leak = 0.5 * setup.crosstalk * setup.drive_hz * np.exp(-1j * (setup.phase + setup.crosstalk_phase)) * b2.T
    h = h + drive + drive.conj().T + leak + leak.conj().T
    return h


def _dressed_control_state(setup, levels, control_level):
    """Control eigenstate of its own driven Hamiltonian closest to ``|control_level>``."""
    b = _ladder(levels)
    n = b.T @ b
    c = setup.control
    h = setup.detuning_hz * n + 0.5 * c.anharmonicity_hz * (n @ n - n)
    drive = 0.5 * setup.drive_hz * np.exp(-1j * setup.phase) * b.T
    h = h + drive + drive.conj().T
    _, vecs = np.linalg.eigh(h)
    k = int(np.argmax(np.abs(vecs[control_level]) ** 2))
    return vecs[:, k]


def target_bloch_trajectories(setup, times, levels=3):
    """Target Bloch vectors (shape (2, n_times, 3)) with the control starting in |0> and |1>."""
    h = cr_hamiltonian(setup, levels)
    vals, vecs = np.linalg.eigh(h)
    target0 = np.zeros(levels)
    target0[0] = 1.0
    times = np.asarray(times, dtype=float)
    phases = np.exp(-1j * TWO_PI * np.outer(times, vals))  # (t, k)
    out = np.empty((2, times.size, 3))
    for c in (0, 1):
        psi0 = np.kron(_dressed_control_state(setup, levels, c), target0)
        coeff = vecs.conj().T @ psi0
        psi = (phases * coeff) @ vecs.T  # (t, dim)
        psi = psi.reshape(times.size, levels, levels)
        rho = np.einsum("tci,tcj->tij", psi, psi.conj())  # reduced target state
        out[c, :, 0] = 2.0 * rho[:, 0, 1].real
        out[c, :, 1] = -2.0 * rho[:, 0, 1].imag
        out[c, :, 2] = (rho[:, 0, 0] - rho[:, 1, 1]).real
    return out


def _rotate(omega, times, r0):
    """Bloch vectors ``r0`` rotated by ``2*pi*omega*t`` about ``omega``."""
    norm = np.linalg.norm(omega)
    if norm == 0.0:
        return np.tile(r0, (len(times), 1))
    axis = omega / norm
    ang = TWO_PI * norm * times[:, None]
    cross = np.cross(axis, r0)
    dot = axis @ r0
    return r0 * np.cos(ang) + cross * np.sin(ang) + np.outer(1 - np.cos(ang[:, 0]), axis * dot)


def fit_precession(times, bloch):
    """Precession vector (Hz) and its standard errors for one Bloch trajectory."""
    times = np.asarray(times, dtype=float)
    r0 = bloch[0]
    # linear seed from r(t) - r0 = 2*pi * omega x integral(r)
    integral = np.concatenate([np.zeros((1, 3)), np.cumsum(0.5 * (bloch[1:] + bloch[:-1]) * np.diff(times)[:, None], axis=0)])
    rows = []
    for vec in integral:
        x, y, z = vec
        rows.append(-TWO_PI * np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]]))
    a = np.concatenate(rows)
    seed, *_ = np.linalg.lstsq(a, (bloch - r0).ravel(), rcond=None)
    res = least_squares(lambda w: (_rotate(w, times, r0) - bloch).ravel(), seed, x_scale=np.maximum(np.abs(seed), 1.0))
    dof = max(res.fun.size - 3, 1)
    s2 = float(res.fun @ res.fun) / dof
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * s2
        sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        sigma = np.full(3, np.inf)
    return res.x, sigma


@dataclass
class TomographyTrace:
    """Effective-Hamiltonian rates (Hz) versus drive phase, with fit standard errors."""

    phases: np.ndarray
    a_zx: np.ndarray
    a_zy: np.ndarray
    a_ix: np.ndarray
    a_iy: np.ndarray
    a_zz: np.ndarray
    a_iz: np.ndarray
    sigma: dict = None

    def rows(self):
        for k, phase in enumerate(self.phases):
            row = {"phase_rad": float(phase)}
            row.update({f"{name}_hz": float(getattr(self, name)[k]) for name in COEFFICIENTS})
            yield row


def default_evolution_time(setup):
    """Five periods of the slowest expected term, from the closed-form ZX rate."""
    a_zx, _ = cr_amplitudes(setup)
    if a_zx == 0.0:
        raise ValidationError("ZX rate vanishes; pick an evolution time explicitly")
    return 5.0 / abs(a_zx)


def simulate_cr_tomography(setup, phase_grid, evolution_time=None, n_levels=3, n_times=401, max_sigma_hz=5e3):
    """Hamiltonian tomography of the target under a CR drive, one fit per phase and control state."""
    if n_levels < 3:
        raise ValidationError("use at least 3 levels per transmon")
    t_end = evolution_time if evolution_time is not None else default_evolution_time(setup)
    check_positive(t_end, "evolution_time")
    times = np.linspace(0.0, t_end, n_times)
    phases = np.asarray(phase_grid, dtype=float)

    def one(phase):
        traj = target_bloch_trajectories(replace(setup, phase=float(phase)), times, n_levels)
        fits = [fit_precession(times, traj[c]) for c in (0, 1)]
        (w0, s0), (w1, s1) = fits
        rates = np.concatenate([(w0 - w1) / 2, (w0 + w1) / 2])  # ZX ZY ZZ IX IY IZ
        sig = 0.5 * np.sqrt(np.concatenate([s0**2 + s1**2, s0**2 + s1**2]))
        return rates, sig

    out = parallel_map(one, phases)
    rates = np.array([r for r, _ in out])
    sig = np.array([s for _, s in out])
    if np.any(~np.isfinite(sig)) or np.any(sig > max_sigma_hz):
        worst = np.unravel_index(np.nanargmax(np.where(np.isfinite(sig), sig, np.inf)), sig.shape)
        raise UnresolvedCoefficient(
            f"fit uncertainty {sig[worst]:.3g} Hz exceeds {max_sigma_hz:.3g} Hz at phase {phases[worst[0]]:.4g} rad"
        )
    order = [0, 1, 3, 4, 2, 5]  # -> zx zy ix iy zz iz
    cols = [rates[:, k] for k in order]
    sigma = {name: sig[:, k] for name, k in zip(COEFFICIENTS, order)}
    return TomographyTrace(phases, *cols, sigma=sigma)


def phase_phasor(phases, in_phase, quadrature):
    """Complex amplitude P with ``in_phase + 1j*quadrature ~= P * exp(-1j*phase)``."""
    phases = np.asarray(phases, dtype=float)
    z = np.asarray(in_phase) + 1j * np.asarray(quadrature)
    basis = np.exp(-1j * phases)
    return complex(np.vdot(basis, z) / np.vdot(basis, basis))


def drive_from_zx(a_zx, j, detuning, anharmonicity):
    """CR drive amplitude whose closed-form ZX rate has magnitude ``|a_zx|``."""
    target = abs(a_zx)
    if target == 0.0:
        return 0.0
    f = lambda drive: abs(cr_zx_amplitude(j, drive, detuning, anharmonicity)) - target
    lead = abs(cr_zx_amplitude(j, 1.0, detuning, anharmonicity))
    guess = target / lead if lead > 0 else abs(detuning)
    hi = guess
    for _ in range(60):
        if f(hi) > 0:
            break
        hi *= 1.5
    else:
        raise ValidationError("no drive amplitude reproduces the measured ZX rate")
    return brentq(f, 0.0, hi, xtol=1e-9 * hi)


def crosstalk_drive(measured_ix, predicted_ix, crosstalk_phase):
    """Cross-talk drive amplitude from measured and predicted IX magnitudes."""
    val = predicted_ix**2 + 2.0 * math.cos(crosstalk_phase) * measured_ix * predicted_ix + measured_ix**2
    return math.sqrt(max(val, 0.0))


@dataclass(frozen=True)
class CrosstalkEstimate:
    crosstalk: float
    drive_hz: float
    crosstalk_drive_hz: float
    crosstalk_phase: float
    measured_ix_hz: float
    predicted_ix_hz: float


def estimate_crosstalk(trace, j_hz, detuning_hz, anharmonicity_hz):
    """Cross-talk ratio m from a tomography trace and the known pair parameters.

    The CR drive follows from the fitted ZX amplitude; the CR-only IX phasor is
    the ZX phasor scaled by the closed-form IX/ZX ratio, and the residual IX
    phasor is attributed to direct driving of the target.
    """
    p_zx = phase_phasor(trace.phases, trace.a_zx, trace.a_zy)
    p_ix = phase_phasor(trace.phases, trace.a_ix, trace.a_iy)
    drive = drive_from_zx(abs(p_zx), j_hz, detuning_hz, anharmonicity_hz)
    if drive == 0.0:
        raise ValidationError("ZX amplitude is zero; the CR drive cannot be inferred")
    a_zx = cr_zx_amplitude(j_hz, drive, detuning_hz, anharmonicity_hz)
    a_ix = cr_ix_amplitude(j_hz, drive, detuning_hz, anharmonicity_hz)
    p_pred = (a_ix / a_zx) * p_zx
    measured, predicted = abs(p_ix), abs(p_pred)
    if predicted == 0.0 or measured == 0.0:
        phase = math.pi
    else:
        phase = (np.angle(p_pred) - np.angle(p_ix) + math.pi) % TWO_PI
    omega_ct = crosstalk_drive(measured, predicted, phase)
    return CrosstalkEstimate(omega_ct / drive, drive, omega_ct, float(phase), measured, predicted)


class CrossTalkEstimator(BaseEstimator):
    """``fit(trace)`` estimates the cross-talk ratio ``m_`` for known pair parameters."""

    def __init__(self, j_hz=3.45e6, detuning_hz=-92.2e6, anharmonicity_hz=-309e6):
        self.j_hz = j_hz
        self.detuning_hz = detuning_hz
        self.anharmonicity_hz = anharmonicity_hz

    def fit(self, X, y=None):
        self.estimate_ = estimate_crosstalk(X, self.j_hz, self.detuning_hz, self.anharmonicity_hz)
        self.m_ = self.estimate_.crosstalk
        return self

    def transform(self, X=None):
        check_is_fitted(self, "m_")
        e = self.estimate_
        return np.array([[e.crosstalk, e.drive_hz, e.crosstalk_drive_hz, e.crosstalk_phase]])


@dataclass(frozen=True)
class DephasingInput:
    tau_baseline_s: float
    tau_with_tone_s: float
    photons: float

    def __post_init__(self):
        check_positive(self.tau_baseline_s, "tau_baseline_s")
        check_positive(self.tau_with_tone_s, "tau_with_tone_s")
        check_positive(self.photons, "photons")


def readout_dephasing_rate(inp):
    """Excess dephasing rate per photon (1/s), ``(1/n)(1/tau_tone - 1/tau_base)``."""
    rate = (1.0 / inp.photons) * (1.0 / inp.tau_with_tone_s - 1.0 / inp.tau_baseline_s)
    if rate < 0:
        warnings.warn("negative excess dephasing rate: the tone lengthened the echo time", RuntimeWarning, stacklevel=2)
    return rate
