"""Exchange coupling between two linearized qubits hanging off a ring bus.

Each qubit is an LC node (``inductance``, ``capacitance``) joined to a ring tap
through a series ``coupling_capacitance``. The two qubit-like normal modes are
the frequencies where the 2x2 loaded susceptance matrix

    S(w) = Im[Y_net(w)] + diag(w*C_i - 1/(w*L_i))

is singular. For a lossless network dS/dw is positive definite, so both
eigenvalue branches of S increase monotonically between poles; a sign change
from negative to positive on a branch brackets exactly one mode.

Networks are passed around in their pole-free scaled form: a callable mapping
an array of frequencies (Hz) to ``(m, s)`` with ``m`` of shape ``(..., 2, 2)``
such that the true ABCD matrix is ``m / s`` (see
:func:`ringbus.network.ring_abcd_scaled`).
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_positive, check_tap_angle, parallel_map
from .exceptions import (
    DecoupledPorts,
    NoRootInBracket,
    PoleInBracket,
    RingbusError,
    Unachievable,
    ValidationError,
)
from .network import RingTapPair, ring_abcd_scaled

TWO_PI = 2.0 * math.pi

DEFAULT_FUNDAMENTAL_HZ = 3.1e9
DEFAULT_Z_RING = 50.0
DEFAULT_QUBIT_CAPACITANCE = 63e-15
DEFAULT_TARGET_J_HZ = 4.74e6
DEFAULT_CALIBRATION_THETA = math.pi
DEFAULT_CALIBRATION_FREQ_HZ = 4.65e9
RING_MODE_WINDOW_HZ = 5e6
GUARD_BAND_HZ = 20e6
MAX_SEARCH_WINDOW_HZ = 300e6
CAP_SEARCH_RANGE_F = (0.1e-15, 100e-15)


@dataclass(frozen=True)
class LinearizedQubit:
    """Transmon treated as a harmonic LC node (SI units)."""

    inductance: float
    capacitance: float
    coupling_capacitance: float

    def __post_init__(self):
        check_positive(self.inductance, "inductance")
        check_positive(self.capacitance, "capacitance")
        check_positive(self.coupling_capacitance, "coupling_capacitance")

    @classmethod
    def from_frequency(cls, freq_hz, capacitance=DEFAULT_QUBIT_CAPACITANCE, coupling_capacitance=15e-15):
        check_positive(freq_hz, "freq_hz")
        omega = TWO_PI * freq_hz
        return cls(1.0 / (omega * omega * capacitance), capacitance, coupling_capacitance)

    @property
    def frequency_hz(self):
        return 1.0 / (TWO_PI * math.sqrt(self.inductance * self.capacitance))

    def with_coupling_capacitance(self, value):
        return replace(self, coupling_capacitance=value)


@dataclass(frozen=True)
class RingSpec:
    fundamental_hz: float = DEFAULT_FUNDAMENTAL_HZ
    z_ring: float = DEFAULT_Z_RING
    z0: float = 50.0

    def __post_init__(self):
        check_positive(self.fundamental_hz, "fundamental_hz")
        check_positive(self.z_ring, "z_ring")
        check_positive(self.z0, "z0")

    def tap_pair(self, theta):
        return RingTapPair(theta, self.fundamental_hz, self.z_ring, self.z0)


@dataclass(frozen=True)
class Eigenmode:
    frequency_hz: float
    kind: str  # "qubit" or "ring"
    nearest_ring_mode: int
    ring_mode_distance_hz: float


@dataclass(frozen=True)
class CouplingResult:
    """Signed exchange coupling; ``j_hz`` is positive when the in-phase mode is on top."""

    j_hz: float
    method: str
    eigenfrequencies_hz: tuple
    residual: float = 0.0
    theta: float = float("nan")
    freq_hz: float = float("nan")


def ring_network(pair):
    """Scaled-ABCD callable of the bare ring between the taps of ``pair``."""
    f0, theta, zr = pair.fundamental_hz, pair.theta, pair.z_ring
    return lambda freqs: ring_abcd_scaled(theta, np.asarray(freqs, dtype=float) / f0, zr)


def _loaded_scaled(network, freqs, cg1, cg2):
    """Scaled ABCD entries of coupling-cap / network / coupling-cap."""
    freqs = np.asarray(freqs, dtype=float)
    m, s = network(freqs)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    omega = TWO_PI * freqs
    z1 = -1j / (omega * cg1)
    z2 = -1j / (omega * cg2)
    at = a + z1 * c
    bt = at * z2 + b + z1 * d
    dt = c * z2 + d
    return at, bt, c, dt, s


def network_susceptances(network, freqs, cg1, cg2):
    """``(B11, B22, B12)`` of the capacitively loaded network (siemens)."""
    at, bt, _, dt, s = _loaded_scaled(network, freqs, cg1, cg2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (dt / bt).imag, (at / bt).imag, (-s / bt).imag


def _branches(network, freqs, q1, q2):
    freqs = np.asarray(freqs, dtype=float)
    omega = TWO_PI * freqs
    b11, b22, b12 = network_susceptances(network, freqs, q1.coupling_capacitance, q2.coupling_capacitance)
    s11 = b11 + omega * q1.capacitance - 1.0 / (omega * q1.inductance)
    s22 = b22 + omega * q2.capacitance - 1.0 / (omega * q2.inductance)
    mean = 0.5 * (s11 + s22)
    radius = np.hypot(0.5 * (s11 - s22), b12)
    return mean + radius, mean - radius


def characteristic_matrix(q1, q2, pair, freq):
    """Coupled-circuit matrix whose determinant vanishes on normal modes.

    Built from the combined ABCD entries (with coupling caps). Entries are
    purely imaginary for a lossless network; the matrix has poles wherever the
    ring ABCD does.
    """
    check_positive(freq, "freq")
    at, bt, ct, dt, s = _loaded_scaled(ring_network(pair), freq, q1.coupling_capacitance, q2.coupling_capacitance)
    if abs(s) < 1e-14:
        raise DecoupledPorts("ring ABCD is singular at this frequency")
    at, bt, ct, dt = (complex(v) / float(s) for v in (at, bt, ct, dt))
    omega = TWO_PI * freq
    w1 = (TWO_PI * q1.frequency_hz) ** 2
    w2 = (TWO_PI * q2.frequency_hz) ** 2
    return np.array(
        [
            [bt * (w1 - omega**2) + 1j * omega * dt / q1.capacitance, 1j * omega / q2.capacitance * (bt * ct - at * dt)],
            [-1j * omega / q1.capacitance, bt * (w2 - omega**2) + 1j * omega * at / q2.capacitance],
        ]
    )


def characteristic_function(q1, q2, pair, freqs, network=None):
    """Real, pole-free characteristic function ``s(w)**2 * det M(w) / j**2``.

    ``s`` is the pole factor of the ring ABCD. Zeros include every normal mode;
    extra zeros sit where the loaded network admittance has poles.
    Vectorized over ``freqs``.
    """
    network = network or ring_network(pair)
    freqs = np.asarray(freqs, dtype=float)
    at, bt, ct, dt, s = _loaded_scaled(network, freqs, q1.coupling_capacitance, q2.coupling_capacitance)
    omega = TWO_PI * freqs
    w1 = (TWO_PI * q1.frequency_hz) ** 2
    w2 = (TWO_PI * q2.frequency_hz) ** 2
    m11 = bt * (w1 - omega**2) + 1j * omega * dt / q1.capacitance
    m22 = bt * (w2 - omega**2) + 1j * omega * at / q2.capacitance
    # scaled determinant of the combined network is s**2
    m12 = -1j * omega * s**2 / q2.capacitance
    m21 = -1j * omega / q1.capacitance
    return -(m11 * m22 - m12 * m21).real


def _nearest_ring_mode(freq, fundamental_hz):
    k = max(1, int(round(freq / fundamental_hz)))
    return k, abs(freq - k * fundamental_hz)


def _sign_change_roots(fn, grid, values, tol_hz):
    """Roots at negative-to-positive crossings; positive-to-negative ones are poles."""
    roots = []
    for i in range(len(grid) - 1):
        lo, hi = values[i], values[i + 1]
        if not (np.isfinite(lo) and np.isfinite(hi)):
            continue
        if lo == 0.0:
            roots.append(float(grid[i]))
        elif lo < 0.0 < hi:
            roots.append(brentq(fn, grid[i], grid[i + 1], xtol=tol_hz, rtol=4 * np.finfo(float).eps))
    if values[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def find_eigenmodes_through(network, q1, q2, fundamental_hz, bracket, tol=1e3, ring_mode_window=RING_MODE_WINDOW_HZ):
    """Normal modes of two qubits coupled through an arbitrary scaled network."""
    lo, hi = (float(v) for v in bracket)
    check_positive(lo, "bracket lower edge")
    if not hi > lo:
        raise ValidationError(f"bracket must be increasing, got {bracket!r}")
    if tol < 1.0:
        raise ValidationError(f"tol must be at least 1 Hz, got {tol!r}")
    for q in (q1, q2):
        if not fundamental_hz < q.frequency_hz < 2 * fundamental_hz:
            warnings.warn(
                f"qubit bare frequency {q.frequency_hz:.6g} Hz outside the first inter-mode band",
                stacklevel=2,
            )
    n = int(min(max((hi - lo) / 2e5, 2001), 20001))
    grid = np.linspace(lo, hi, n)
    upper, lower = _branches(network, grid, q1, q2)
    if not (np.isfinite(upper[0]) and np.isfinite(upper[-1])):
        raise PoleInBracket(f"bracket edge lands on a network pole in [{lo:.9g}, {hi:.9g}] Hz")
    roots = []
    for which, values in ((0, upper), (1, lower)):
        roots += _sign_change_roots(lambda f, w=which: float(_branches(network, f, q1, q2)[w]), grid, values, tol)
    if not roots:
        raise NoRootInBracket(f"no normal mode in [{lo:.9g}, {hi:.9g}] Hz")
    modes = []
    for f in sorted(roots):
        k, dist = _nearest_ring_mode(f, fundamental_hz)
        kind = "ring" if dist < ring_mode_window else "qubit"
        modes.append(Eigenmode(float(f), kind, k, float(dist)))
    return modes


def find_eigenmodes(q1, q2, pair, bracket, tol=1e3, ring_mode_window=RING_MODE_WINDOW_HZ):
    """All normal modes inside ``bracket`` (Hz), sorted, ring-like ones tagged."""
    return find_eigenmodes_through(ring_network(pair), q1, q2, pair.fundamental_hz, bracket, tol, ring_mode_window)


def retune_to_probe(q, network_self_susceptance, freq):
    """Copy of ``q`` whose loaded self-susceptance vanishes at ``freq``."""
    omega = TWO_PI * freq
    inv_l = omega * (omega * q.capacitance + network_self_susceptance)
    if not inv_l > 0:
        raise Unachievable(f"qubit cannot be tuned to {freq:.9g} Hz with this coupling capacitance")
    return replace(q, inductance=1.0 / inv_l)


def _search_window(freq, fundamental_hz):
    k = max(1, round(freq / fundamental_hz))
    dist = min(abs(freq - j * fundamental_hz) for j in (k - 1, k, k + 1) if j >= 1)
    return min(0.45 * dist, MAX_SEARCH_WINDOW_HZ)


def _branch_root(network, q1, q2, which, lo, hi, tol):
    fn = lambda f: float(_branches(network, f, q1, q2)[which])
    grid = np.linspace(lo, hi, 257)
    values = _branches(network, grid, q1, q2)[which]
    roots = _sign_change_roots(fn, grid, values, tol)
    if not roots:
        raise NoRootInBracket(f"no mode on branch {which} in [{lo:.9g}, {hi:.9g}] Hz")
    return roots


def coupling_through(network, q1, q2, fundamental_hz, freq, tol=1.0):
    """Exchange coupling at ``freq`` between two qubits joined by ``network``.

    Both inductances are retuned so each qubit's loaded self-susceptance is
    zero at ``freq``; J is half the splitting of the two resulting modes.
    """
    check_positive(freq, "freq")
    b11, b22, b12 = (float(v) for v in network_susceptances(network, freq, q1.coupling_capacitance, q2.coupling_capacitance))
    if not all(math.isfinite(v) for v in (b11, b22, b12)):
        raise PoleInBracket(f"network admittance has a pole at {freq:.9g} Hz")
    omega = TWO_PI * freq
    scale = omega * max(q1.capacitance, q2.capacitance)
    if abs(b12) < 1e-12 * scale:
        return CouplingResult(0.0, "determinant-splitting", (freq, freq), 0.0, freq_hz=freq)
    t1 = retune_to_probe(q1, b11, freq)
    t2 = retune_to_probe(q2, b22, freq)
    window = _search_window(freq, fundamental_hz)
    # upper branch is +|B12| at the probe, so its root lies below; mirror for the lower
    lower_mode = max(_branch_root(network, t1, t2, 0, freq - window, freq, tol))
    upper_mode = min(_branch_root(network, t1, t2, 1, freq, freq + window, tol))
    up, lo = _branches(network, np.array([lower_mode, upper_mode]), t1, t2)
    residual = max(abs(up[0]), abs(lo[1])) / scale
    # in-phase upper mode (B12 < 0, capacitive-like) is the positive convention
    sign = -1.0 if b12 > 0 else 1.0
    j = sign * 0.5 * (upper_mode - lower_mode)
    return CouplingResult(j, "determinant-splitting", (lower_mode, upper_mode), residual, freq_hz=freq)


def coupling_at(q1, q2, pair, freq, tol=1.0):
    """Signed J (Hz) for two qubits at tap separation ``pair.theta``, both tuned to ``freq``."""
    try:
        res = coupling_through(ring_network(pair), q1, q2, pair.fundamental_hz, freq, tol)
    except DecoupledPorts:
        res = CouplingResult(0.0, "determinant-splitting", (freq, freq), 0.0)
    return replace(res, theta=pair.theta, freq_hz=freq)


def special_frequency_impedance(theta, k, z_ring):
    """Transfer impedance Z' = (z_ring/2) sin(k*theta) at a half-integer mode ratio."""
    return 0.5 * z_ring * math.sin(k * theta)


def perturbative_coupling(theta, freq, qubit_capacitance, coupling_capacitance, z_ring, fundamental_hz):
    """Small-coupling-cap estimate of J at a half-integer frequency ratio.

    At ``freq = k*f0`` with half-integer ``k`` the ring is an ideal inverter of
    impedance Z'. Eliminating it between the two coupling caps gives a mutual
    admittance ``w*Cg**2*Z'/(1 - (w*Cg*Z')**2)`` (imaginary part), which sets
    the splitting of two LC nodes of total capacitance ``C_Q + Cg``.
    """
    k = freq / fundamental_hz
    zp = special_frequency_impedance(theta, k, z_ring)
    omega = TWO_PI * freq
    x = omega * coupling_capacitance * zp
    j_omega = zp * omega**2 * coupling_capacitance**2 / (2.0 * (qubit_capacitance + coupling_capacitance) * (1.0 - x * x))
    return j_omega / TWO_PI


@dataclass
class CouplingMap:
    """J over a (theta, freq) grid; failed cells hold NaN and an error code."""

    thetas: np.ndarray
    freqs_hz: np.ndarray
    j_hz: np.ndarray
    results: list
    errors: dict = field(default_factory=dict)

    def column(self, theta):
        i = int(np.argmin(np.abs(self.thetas - theta)))
        return self.j_hz[i]

    def rows(self):
        for i, theta in enumerate(self.thetas):
            for j, freq in enumerate(self.freqs_hz):
                yield {
                    "theta_deg": math.degrees(theta),
                    "freq_hz": float(freq),
                    "j_hz": float(self.j_hz[i, j]),
                    "error": self.errors.get((i, j), ""),
                }


def coupling_map(q_template, pair_template, theta_grid, freq_grid, guard_band=GUARD_BAND_HZ, tol=1.0):
    """Evaluate :func:`coupling_at` on every (theta, freq) cell.

    ``theta_grid`` is in radians. Cells within ``guard_band`` of a ring mode,
    or whose solve fails, get NaN and an entry in ``errors``.
    """
    thetas = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    freqs = np.atleast_1d(np.asarray(freq_grid, dtype=float))
    if thetas.size == 0 or freqs.size == 0:
        raise ValidationError("theta and frequency grids must be nonempty")
    f0 = pair_template.fundamental_hz
    cells = [(i, j) for i in range(thetas.size) for j in range(freqs.size)]

    def one(cell):
        i, j = cell
        freq = freqs[j]
        _, dist = _nearest_ring_mode(freq, f0)
        if dist < guard_band:
            return None, "ring_resonance"
        try:
            pair = replace(pair_template, theta=check_tap_angle(thetas[i]))
            return coupling_at(q_template, q_template, pair, freq, tol), None
        except (RingbusError, ValueError) as exc:
            return None, getattr(exc, "code", "validation_error")

    out = parallel_map(one, cells)
    j_hz = np.full((thetas.size, freqs.size), np.nan)
    results = [[None] * freqs.size for _ in range(thetas.size)]
    errors = {}
    for (i, j), (res, err) in zip(cells, out):
        if err is not None:
            errors[(i, j)] = err
        else:
            j_hz[i, j] = res.j_hz
            results[i][j] = res
    return CouplingMap(thetas, freqs, j_hz, results, errors)


def calibrate_coupling_cap(
    target_j,
    at_theta=DEFAULT_CALIBRATION_THETA,
    at_freq=DEFAULT_CALIBRATION_FREQ_HZ,
    q_template=None,
    ring=None,
    rtol=1e-4,
):
    """Coupling capacitance (F) giving ``|J(at_theta, at_freq)| = target_j``.

    Searched in log space over 0.1 to 100 fF.
    """
    ring = ring or RingSpec()
    q_template = q_template or LinearizedQubit.from_frequency(at_freq)
    if not (target_j > 0 and math.isfinite(target_j)):
        raise Unachievable(f"target coupling must be positive, got {target_j!r}")
    pair = ring.tap_pair(at_theta)

    def excess(log_cg):
        q = q_template.with_coupling_capacitance(math.exp(log_cg))
        return abs(coupling_at(q, q, pair, at_freq).j_hz) - target_j

    grid = np.linspace(*np.log(CAP_SEARCH_RANGE_F), 13)
    values = []
    for g in grid:
        try:
            values.append(excess(g))
        except RingbusError:
            values.append(np.nan)
    for i in range(len(grid) - 1):
        a, b = values[i], values[i + 1]
        if np.isfinite(a) and np.isfinite(b) and a <= 0.0 <= b:
            log_cg = brentq(excess, grid[i], grid[i + 1], xtol=rtol * 0.1)
            return math.exp(log_cg)
    raise Unachievable(
        f"|J| = {target_j:.6g} Hz not reachable at theta={math.degrees(at_theta):.6g} deg, "
        f"f={at_freq:.9g} Hz with coupling capacitance in [0.1, 100] fF"
    )


class RingCouplingModel(BaseEstimator):
    """Calibrated ring coupler: ``fit`` sets the coupling capacitance, ``predict`` maps
    rows of ``(theta_deg, freq_hz)`` to signed J in Hz.

    With ``X``/``y`` given, ``fit`` matches ``|J|`` at those rows in least squares;
    without, it calibrates to ``target_j_hz`` at the default point.
    """

    def __init__(
        self,
        fundamental_hz=DEFAULT_FUNDAMENTAL_HZ,
        z_ring=DEFAULT_Z_RING,
        qubit_capacitance=DEFAULT_QUBIT_CAPACITANCE,
        target_j_hz=DEFAULT_TARGET_J_HZ,
        calibration_theta_deg=180.0,
        calibration_freq_hz=DEFAULT_CALIBRATION_FREQ_HZ,
        tol=1.0,
    ):
        self.fundamental_hz = fundamental_hz
        self.z_ring = z_ring
        self.qubit_capacitance = qubit_capacitance
        self.target_j_hz = target_j_hz
        self.calibration_theta_deg = calibration_theta_deg
        self.calibration_freq_hz = calibration_freq_hz
        self.tol = tol

    def _ring(self):
        return RingSpec(self.fundamental_hz, self.z_ring)

    def _qubit(self, freq, cg=15e-15):
        return LinearizedQubit.from_frequency(freq, self.qubit_capacitance, cg)

    def fit(self, X=None, y=None):
        ring = self._ring()
        if X is None:
            self.coupling_capacitance_ = calibrate_coupling_cap(
                self.target_j_hz,
                math.radians(self.calibration_theta_deg),
                self.calibration_freq_hz,
                self._qubit(self.calibration_freq_hz),
                ring,
            )
            return self
        X = check_array(X, ensure_min_features=2)
        y = np.abs(np.asarray(y, dtype=float).ravel())
        if len(y) != len(X):
            raise ValidationError("X and y have different lengths")
        if len(X) == 1:
            theta, freq = X[0, 0], X[0, 1]
            self.coupling_capacitance_ = calibrate_coupling_cap(
                y[0], math.radians(theta), freq, self._qubit(freq), ring
            )
            return self

        def loss(log_cg):
            self.coupling_capacitance_ = math.exp(log_cg)
            return float(np.sum((np.abs(self.predict(X)) - y) ** 2))

        res = minimize_scalar(loss, bounds=np.log(CAP_SEARCH_RANGE_F), method="bounded", options={"xatol": 1e-6})
        self.coupling_capacitance_ = math.exp(res.x)
        return self

    def predict(self, X):
        check_is_fitted(self, "coupling_capacitance_")
        X = check_array(X, ensure_min_features=2)
        ring = self._ring()
        out = np.empty(len(X))
        for i, (theta_deg, freq) in enumerate(X[:, :2]):
            q = self._qubit(freq, self.coupling_capacitance_)
            pair = ring.tap_pair(math.radians(theta_deg))
            out[i] = coupling_at(q, q, pair, freq, self.tol).j_hz
        return out
