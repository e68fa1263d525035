"""Coupling estimation from cross-Kerr shifts and vacuum Rabi splittings."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import curve_fit, least_squares, minimize, minimize_scalar
from scipy.signal import find_peaks
from scipy.stats import qmc
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    FitDiverged,
    NonConvergence,
    ParseError,
    SinglePeak,
    UnderdeterminedSystem,
    ValidationError,
)
from .spectrum import (
    HamiltonianModel,
    TransmonSpec,
    TruncationPolicy,
    build_hamiltonian,
    coupling_matrix,
    diagonalize,
    ramsey_shift,
)

DEFAULT_CROSS_KERR_SIGMA_HZ = 5e3
DEFAULT_SPLITTING_SIGMA_HZ = 100e3


def coupling_sign(angle_deg):
    """-1 for separations strictly between 120 and 240 degrees, +1 otherwise."""
    a = angle_deg % 360.0
    return -1.0 if 120.0 < a < 240.0 else 1.0


@dataclass(frozen=True)
class PairMeasurement:
    a: int
    b: int
    angle_deg: float
    cross_kerr_hz: float = None
    cross_kerr_sigma_hz: float = DEFAULT_CROSS_KERR_SIGMA_HZ
    splitting_hz: float = None
    splitting_sigma_hz: float = DEFAULT_SPLITTING_SIGMA_HZ

    def __post_init__(self):
        if self.a == self.b:
            raise ValidationError("a pair measurement needs two distinct qubits")
        for name in ("cross_kerr_sigma_hz", "splitting_sigma_hz"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")


@dataclass
class MeasurementSet:
    """Observed per-pair data; ``cross_kerr_hz`` is the conditional-Ramsey shift."""

    specs: list
    pairs: list

    def __post_init__(self):
        n = len(self.specs)
        for k, p in enumerate(self.pairs):
            if not (0 <= p.a < n and 0 <= p.b < n):
                raise ValidationError(f"pairs[{k}] references an unknown qubit")

    @property
    def labels(self):
        return [s.label or str(i) for i, s in enumerate(self.specs)]

    def pair_labels(self):
        lab = self.labels
        return [f"{lab[p.a]}-{lab[p.b]}" for p in self.pairs]

    def signs(self):
        return np.array([coupling_sign(p.angle_deg) for p in self.pairs])

    def observations(self):
        """Rows of (pair index, kind, value, sigma) for every available observable."""
        rows = []
        for k, p in enumerate(self.pairs):
            if p.cross_kerr_hz is not None:
                rows.append((k, "cross_kerr", p.cross_kerr_hz, p.cross_kerr_sigma_hz))
            if p.splitting_hz is not None:
                rows.append((k, "splitting", p.splitting_hz, p.splitting_sigma_hz))
        return rows

    def with_cross_kerr(self, values):
        pairs = [
            PairMeasurement(p.a, p.b, p.angle_deg, float(v), p.cross_kerr_sigma_hz, p.splitting_hz, p.splitting_sigma_hz)
            for p, v in zip(self.pairs, values)
        ]
        return MeasurementSet(self.specs, pairs)


def load_measurement_set(path):
    """Read the JSON measurement document (``qubits[]`` and ``pairs[]``)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    return measurement_set_from_dict(doc)


def measurement_set_from_dict(doc):
    try:
        qubits = doc["qubits"]
        raw_pairs = doc["pairs"]
    except (KeyError, TypeError):
        raise ValidationError("measurement document needs 'qubits' and 'pairs' arrays") from None
    specs, index = [], {}
    for i, q in enumerate(qubits):
        try:
            label = str(q["label"])
            specs.append(TransmonSpec(float(q["freq_hz"]), float(q["anharmonicity_hz"]), label))
        except KeyError as exc:
            raise ValidationError(f"qubits[{i}] missing field {exc.args[0]!r}") from None
        if label in index:
            raise ValidationError(f"qubits[{i}].label duplicates {label!r}")
        index[label] = i
    pairs = []
    for k, p in enumerate(raw_pairs):
        try:
            a, b = (index[str(x)] for x in p["qubits"])
        except KeyError as exc:
            raise ValidationError(f"pairs[{k}].qubits references unknown label or is missing ({exc.args[0]!r})") from None
        ck = p.get("cross_kerr_khz")
        sp_ = p.get("splitting_mhz")
        pairs.append(
            PairMeasurement(
                a,
                b,
                float(p["angle_deg"]),
                None if ck is None else 1e3 * float(ck),
                1e3 * float(p.get("sigma_khz", DEFAULT_CROSS_KERR_SIGMA_HZ / 1e3)),
                None if sp_ is None else 1e6 * float(sp_),
                1e6 * float(p.get("splitting_sigma_mhz", DEFAULT_SPLITTING_SIGMA_HZ / 1e6)),
            )
        )
    return MeasurementSet(specs, pairs)


def _pair_min_splitting(specs, j_matrix, a, b):
    """Smallest gap between the two single-excitation levels of (a, b) as qubit a is swept."""
    w = np.array([s.omega_hz for s in specs], dtype=float)
    span = 50.0 * max(abs(j_matrix[a, b]), 1e5)

    def gap(fa):
        h = np.diag(np.where(np.arange(len(w)) == a, fa, w)) + j_matrix
        vals, vecs = np.linalg.eigh(h)
        top = np.sort(np.argsort(-(vecs[a] ** 2 + vecs[b] ** 2), kind="stable")[:2])
        return vals[top[1]] - vals[top[0]]

    res = minimize_scalar(gap, bounds=(w[b] - span, w[b] + span), method="bounded", options={"xatol": 1.0})
    return float(res.fun)


@dataclass
class FitResult:
    j_hz: np.ndarray
    pair_labels: list
    residuals_hz: np.ndarray
    chi2: float
    iterations: int
    final_step_hz: float
    converged: bool
    seed_j_hz: np.ndarray = None
    seed_chi2: float = float("nan")
    message: str = ""
    #: other coupling vectors that fit the data equally well (found by restarts)
    alternatives_hz: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        for key in ("j_hz", "residuals_hz", "seed_j_hz"):
            if d[key] is not None:
                d[key] = [float(v) for v in np.asarray(d[key])]
        d["alternatives_hz"] = [[float(v) for v in alt] for alt in self.alternatives_hz]
        return d


def theory_seed(meas, fundamental_hz=3.1e9):
    """|J| per pair from the calibrated ring model at the pair's mean frequency."""
    from .ring import RingCouplingModel

    model = RingCouplingModel(fundamental_hz=fundamental_hz).fit()
    rows = []
    for p in meas.pairs:
        f = 0.5 * (meas.specs[p.a].omega_hz + meas.specs[p.b].omega_hz)
        rows.append((p.angle_deg % 360.0, f))
    return np.abs(model.predict(np.array(rows)))


class CrossKerrCouplingRegressor(BaseEstimator):
    """Fit the exchange couplings of a multi-transmon device to pair observables.

    Couplings are optimized as magnitudes with the sign fixed by the pair
    angle. A Nelder-Mead descent from ``seed`` is followed by a bounded
    finite-difference least-squares polish on the same parameters.
    """

    def __init__(
        self,
        levels=8,
        max_total=8,
        max_iter=2000,
        seed="theory",
        fundamental_hz=3.1e9,
        polish=True,
        n_restarts=16,
        restart_scale_hz=8e6,
        restart_seed=0,
    ):
        self.levels = levels
        self.max_total = max_total
        self.max_iter = max_iter
        self.seed = seed
        self.fundamental_hz = fundamental_hz
        self.polish = polish
        self.n_restarts = n_restarts
        self.restart_scale_hz = restart_scale_hz
        self.restart_seed = restart_seed

    @staticmethod
    def _polish(residual_vector, x):
        ls = least_squares(residual_vector, x, bounds=(0.0, np.inf), xtol=1e-12, ftol=1e-12, gtol=1e-12)
        return ls.x, 2.0 * float(ls.cost), bool(ls.success)

    def _forward_factory(self, meas):
        policy = TruncationPolicy(self.levels, self.max_total)
        model = HamiltonianModel(meas.specs, policy)
        obs = meas.observations()
        n = len(meas.specs)
        need_spectrum = any(kind == "cross_kerr" for _, kind, _, _ in obs)

        def forward(j_vec):
            jm = coupling_matrix(n, {(p.a, p.b): j for p, j in zip(meas.pairs, j_vec)})
            spec = diagonalize(build_hamiltonian(meas.specs, jm, model=model), max_excitation=2) if need_spectrum else None
            out = np.empty(len(obs))
            for r, (k, kind, _, _) in enumerate(obs):
                p = meas.pairs[k]
                out[r] = ramsey_shift(spec, p.a, p.b) if kind == "cross_kerr" else _pair_min_splitting(meas.specs, jm, p.a, p.b)
            return out

        return forward, obs

    def fit(self, X, y=None):
        meas = X
        forward, obs = self._forward_factory(meas)
        n_unknown = len(meas.pairs)
        if len(obs) < n_unknown or len({k for k, *_ in obs}) < n_unknown:
            raise UnderdeterminedSystem(f"{len(obs)} observables for {n_unknown} couplings")
        values = np.array([v for _, _, v, _ in obs])
        sigmas = np.array([s for _, _, _, s in obs])
        signs = meas.signs()
        # parameters in MHz keep the simplex well scaled
        unit = 1e6

        def residual_vector(x):
            return (forward(signs * np.abs(x) * unit) - values) / sigmas

        def chi2(x):
            r = residual_vector(x)
            return float(r @ r)

        if isinstance(self.seed, str) and self.seed == "theory":
            x0 = theory_seed(meas, self.fundamental_hz) / unit
        else:
            x0 = np.abs(np.asarray(self.seed, dtype=float)) / unit
        if x0.shape != (n_unknown,):
            raise ValidationError(f"seed must have {n_unknown} entries")
        seed_chi2 = chi2(x0)

        best_x, best_f, iterations = x0, seed_chi2, 0
        alternatives = []
        if np.all(values == 0.0):
            best_x, best_f = np.zeros_like(x0), chi2(np.zeros_like(x0))
            converged, step, message = True, 0.0, "all observables zero"
        else:
            res = minimize(
                chi2,
                x0,
                method="Nelder-Mead",
                options={"maxiter": self.max_iter, "xatol": 1e-6, "fatol": 1e-10, "adaptive": True},
            )
            iterations = int(res.nit)
            converged = bool(res.success)
            message = str(res.message)
            if res.fun < best_f:
                best_x, best_f = np.abs(res.x), float(res.fun)
            step = float(np.ptp(res.final_simplex[0], axis=0).max() * unit)
            if self.polish:
                x, f, ok = self._polish(residual_vector, best_x)
                converged = converged or ok
                if f <= best_f:
                    step = float(np.max(np.abs(x - best_x)) * unit)
                    best_x, best_f = x, f
            if self.n_restarts:
                # several basins can fit equally well; restarts list them and rescue a stalled descent
                starts = qmc.Sobol(n_unknown, seed=self.restart_seed).random(self.n_restarts)
                found = []
                for start in starts * (self.restart_scale_hz / unit):
                    x, f, ok = self._polish(residual_vector, start)
                    found.append((f, float(np.linalg.norm(x - x0)), x, ok))
                found.sort(key=lambda t: (round(t[0], 9), t[1]))
                # keep the seeded basin unless another is better by more than one unit of chi2
                if found[0][0] < best_f - 1.0:
                    f, _, x, ok = found[0]
                    step = float(np.max(np.abs(x - best_x)) * unit)
                    best_x, best_f, converged = x, f, converged or ok
                    message += "; replaced by restart"
                floor = max(best_f, 1e-9)
                for f, _, x, _ in found:
                    distinct = all(np.max(np.abs(x - y)) * unit > 1e3 for y in [best_x] + alternatives)
                    if f <= floor and distinct:
                        alternatives.append(x)
        j = signs * np.abs(best_x) * unit
        result = FitResult(
            j,
            meas.pair_labels(),
            forward(j) - values,
            best_f,
            iterations,
            step,
            converged,
            signs * x0 * unit,
            seed_chi2,
            message,
            [signs * x * unit for x in alternatives],
        )
        self.result_ = result
        self.j_hz_ = j
        self.measurements_ = meas
        if not converged:
            raise NonConvergence(f"coupling fit did not converge in {self.max_iter} iterations", result)
        return self

    def predict(self, X=None):
        """Forward observables of the fitted couplings for ``X`` (default: the fit data)."""
        check_is_fitted(self, "j_hz_")
        meas = X if X is not None else self.measurements_
        forward, _ = self._forward_factory(meas)
        return forward(self.j_hz_)


def fit_couplings(meas, policy=None, seed="theory", max_iter=2000):
    policy = policy or TruncationPolicy()
    reg = CrossKerrCouplingRegressor(policy.levels, policy.max_total, max_iter, seed)
    return reg.fit(meas).result_


def synthesize_cross_kerr(meas, j_hz, policy=None):
    """Noiseless conditional-Ramsey shifts for couplings ``j_hz`` on ``meas.pairs``."""
    policy = policy or TruncationPolicy()
    model = HamiltonianModel(meas.specs, policy)
    jm = coupling_matrix(len(meas.specs), {(p.a, p.b): j for p, j in zip(meas.pairs, j_hz)})
    spec = diagonalize(build_hamiltonian(meas.specs, jm, model=model), max_excitation=2)
    return np.array([ramsey_shift(spec, p.a, p.b) for p in meas.pairs])


def splitting_to_j(min_splitting_hz):
    """Exchange coupling from the minimum vacuum Rabi splitting."""
    if not min_splitting_hz >= 0:
        raise ValidationError(f"splitting must be non-negative, got {min_splitting_hz!r}")
    return 0.5 * min_splitting_hz


def _lorentzian(x, center, fwhm):
    hw = 0.5 * fwhm
    return hw * hw / ((x - center) ** 2 + hw * hw)


def _double(x, offset, a1, c1, w1, a2, c2, w2):
    return offset + a1 * _lorentzian(x, c1, w1) + a2 * _lorentzian(x, c2, w2)


@dataclass(frozen=True)
class Splitting:
    peak1_hz: float
    peak2_hz: float
    splitting_hz: float
    widths_hz: tuple = field(default=(float("nan"), float("nan")))


class DoubleLorentzianSplitter(BaseEstimator):
    """Two-Lorentzian-plus-offset fit of a spectroscopy trace.

    ``fit(freqs, response)`` sets ``centers_``, ``widths_`` and ``splitting_``.
    Frequencies are centered and scaled internally, and the response is
    divided by its maximum, so the result does not depend on either.
    """

    def __init__(self, min_prominence=0.1, min_amplitude_ratio=0.05):
        self.min_prominence = min_prominence
        self.min_amplitude_ratio = min_amplitude_ratio

    def fit(self, X, y):
        f = np.asarray(X, dtype=float).ravel()
        r = np.asarray(y, dtype=float).ravel()
        if f.size != r.size or f.size < 20:
            raise ValidationError("need at least 20 (frequency, response) samples")
        if np.any(r < 0) or not np.all(np.isfinite(r)) or not np.all(np.isfinite(f)):
            raise ValidationError("response must be finite and non-negative")
        order = np.argsort(f)
        f, r = f[order], r[order]
        mid, span = 0.5 * (f[0] + f[-1]), f[-1] - f[0]
        if not span > 0 or r.max() <= 0:
            raise ValidationError("degenerate trace")
        x = (f - mid) / span
        z = r / r.max()
        floor = float(np.percentile(z, 10))
        # peak detection on a lightly smoothed copy so noise spikes on one line do not pose as a pair
        zs = gaussian_filter1d(z, 2.0)
        prom = self.min_prominence * (zs.max() - zs.min())
        peaks, _ = find_peaks(zs, prominence=prom)
        if peaks.size == 0:
            peaks = np.array([int(np.argmax(zs))])
        top = peaks[np.argsort(-zs[peaks], kind="stable")[:2]]
        width0 = self._half_max_width(x, zs, top[0], floor)
        c = x[top[0]]
        seed_pairs = [[c - 0.5 * width0, c + 0.5 * width0]]
        if top.size == 2:
            seed_pairs.insert(0, sorted(x[top]))
        lower = [-np.inf, 0.0, -1.0, 1e-6, 0.0, -1.0, 1e-6]
        upper = [np.inf, np.inf, 1.0, 2.0, np.inf, 1.0, 2.0]
        best, errors = None, []
        for seeds in seed_pairs:
            amp = [max(zs[np.argmin(np.abs(x - s))] - floor, 1e-3) for s in seeds]
            p0 = [floor, amp[0], seeds[0], width0, amp[1], seeds[1], width0]
            try:
                popt, _ = curve_fit(_double, x, z, p0=p0, bounds=(lower, upper), maxfev=20000)
            except (RuntimeError, ValueError) as exc:
                errors.append(str(exc))
                continue
            sse = float(np.sum((_double(x, *popt) - z) ** 2))
            if best is None or sse < best[0]:
                best = (sse, popt)
        if best is None:
            raise FitDiverged(f"double-Lorentzian fit failed: {'; '.join(errors)}")
        popt = best[1]
        if not np.all(np.isfinite(popt)):
            raise FitDiverged("double-Lorentzian fit returned non-finite parameters")
        _, a1, c1, w1, a2, c2, w2 = popt
        if c1 > c2:
            a1, c1, w1, a2, c2, w2 = a2, c2, w2, a1, c1, w1
        big = max(a1, a2)
        collapsed = abs(c2 - c1) < 0.25 * (w1 + w2) or min(a1, a2) < self.min_amplitude_ratio * big
        if collapsed:
            centre, width = (c1, w1) if a1 >= a2 else (c2, w2)
            raise SinglePeak(
                "trace shows a single resolvable peak",
                center_hz=float(mid + centre * span),
                width_hz=float(width * span),
            )
        self.centers_ = (float(mid + c1 * span), float(mid + c2 * span))
        self.widths_ = (float(w1 * span), float(w2 * span))
        self.splitting_ = self.centers_[1] - self.centers_[0]
        return self

    @staticmethod
    def _half_max_width(x, z, peak, floor):
        half = floor + 0.5 * (z[peak] - floor)
        left = peak
        while left > 0 and z[left] > half:
            left -= 1
        right = peak
        while right < len(z) - 1 and z[right] > half:
            right += 1
        return max(float(x[right] - x[left]), 2.0 * float(np.min(np.diff(x))))

    def transform(self, X):
        check_is_fitted(self, "splitting_")
        return np.array([[self.centers_[0], self.centers_[1], self.splitting_]])


def extract_splitting(freqs_hz, response):
    """Fitted peak centers and their distance (Hz)."""
    s = DoubleLorentzianSplitter().fit(freqs_hz, response)
    return Splitting(s.centers_[0], s.centers_[1], s.splitting_, s.widths_)


def lorentzian_trace(freqs_hz, centers_hz, fwhm_hz, amplitudes=None, offset=0.0):
    """Sum of Lorentzian peaks, handy for synthetic spectroscopy data."""
    freqs = np.asarray(freqs_hz, dtype=float)
    amplitudes = amplitudes or [1.0] * len(centers_hz)
    return offset + sum(a * _lorentzian(freqs, c, fwhm_hz) for a, c in zip(amplitudes, centers_hz))
