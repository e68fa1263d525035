"""Lossless two-port algebra for a ring resonator tapped at two points.

Frequencies are in Hz, impedances in ohm, admittances in siemens. Electrical
lengths are expressed relative to the ring fundamental: a section covering a
fraction ``p`` of the ring has electrical angle ``2*pi*p*f/f0`` because the
whole ring is one wavelength at ``f0``.
"""

import cmath
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from ._validation import check_positive, check_tap_angle
from .exceptions import DecoupledPorts, ValidationError

#: relative magnitude under which a denominator counts as a pole
POLE_TOL = 1e-12
#: one-sided offset (in units of the fundamental) used to evaluate 0/0 points
ZERO_OVER_ZERO_OFFSET = 1e-9
DEFAULT_Z0 = 50.0


@dataclass(frozen=True)
class Immittance:
    """Complex impedance or admittance; ``pole`` marks an infinite result."""

    value: complex
    kind: str = "impedance"
    pole: bool = False

    @classmethod
    def open(cls):
        return cls(complex(math.inf, 0.0), "impedance")

    @classmethod
    def short(cls):
        return cls(0j, "impedance")

    @property
    def is_open(self):
        return math.isinf(abs(self.value))

    def __complex__(self):
        return complex(self.value)


def _as_load(load):
    if isinstance(load, Immittance):
        if load.kind != "impedance":
            return Immittance(1.0 / load.value if load.value != 0 else complex(math.inf, 0.0))
        return load
    return Immittance(complex(load))


@dataclass(frozen=True)
class LineSection:
    """Uniform lossless line covering ``fraction`` of a ring of fundamental ``fundamental_hz``."""

    characteristic_impedance: float
    fraction: float
    fundamental_hz: float

    def __post_init__(self):
        check_positive(self.characteristic_impedance, "characteristic_impedance")
        check_positive(self.fundamental_hz, "fundamental_hz")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValidationError(f"fraction must be in [0, 1], got {self.fraction!r}")

    def electrical_angle(self, freq):
        return 2.0 * math.pi * self.fraction * freq / self.fundamental_hz


@dataclass(frozen=True)
class RingTapPair:
    """Two taps on a ring separated by ``theta`` radians."""

    theta: float
    fundamental_hz: float
    z_ring: float = 50.0
    z0: float = DEFAULT_Z0

    def __post_init__(self):
        check_tap_angle(self.theta)
        check_positive(self.fundamental_hz, "fundamental_hz")
        check_positive(self.z_ring, "z_ring")
        check_positive(self.z0, "z0")

    @classmethod
    def from_degrees(cls, theta_deg, fundamental_hz, z_ring=50.0, z0=DEFAULT_Z0):
        return cls(math.radians(theta_deg), fundamental_hz, z_ring, z0)

    @property
    def r(self):
        return self.z_ring / self.z0


@dataclass(frozen=True)
class TwoPort:
    """ABCD (chain) matrix of a reciprocal two-port at one frequency."""

    a: complex
    b: complex
    c: complex
    d: complex
    frequency: float = field(default=None, compare=False)

    @classmethod
    def identity(cls, frequency=None):
        return cls(1.0 + 0j, 0j, 0j, 1.0 + 0j, frequency)

    @classmethod
    def from_matrix(cls, m, frequency=None):
        m = np.asarray(m, dtype=complex)
        return cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]), frequency)

    @property
    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def cascade(self, other):
        m = self.matrix @ other.matrix
        freq = self.frequency if self.frequency is not None else other.frequency
        return TwoPort.from_matrix(m, freq)

    __matmul__ = cascade

    def is_reciprocal(self, tol=1e-9):
        return abs(self.det - 1.0) < tol

    def is_lossless(self, rtol=1e-9):
        """a, d real and b, c imaginary.

        a and d are dimensionless and judged against max(|a|, |d|, 1) (det = 1
        keeps that scale meaningful); b and c against their own magnitude.
        """
        unit = max(abs(self.a), abs(self.d), 1.0)
        ok = abs(self.a.imag) <= rtol * unit and abs(self.d.imag) <= rtol * unit
        ok &= abs(self.b.real) <= rtol * max(abs(self.b), 1e-300)
        ok &= abs(self.c.real) <= rtol * max(abs(self.c), 1e-300)
        return bool(ok)


def transform_impedance(load, line, freq):
    """Input impedance of ``line`` terminated in ``load``.

    Open and short loads are accepted (``Immittance.open()`` / ``.short()``) and
    evaluated through their cot/tan limits. A vanishing denominator yields an
    ``Immittance`` with ``pole=True`` instead of raising.
    """
    check_positive(freq, "freq")
    load = _as_load(load)
    z = line.characteristic_impedance
    bx = line.electrical_angle(freq)
    cs, sn = math.cos(bx), math.sin(bx)
    if load.is_open:
        num, den, scale = z * cs, 1j * sn, 1.0
    else:
        zl = load.value
        num = z * (zl * cs + 1j * z * sn)
        den = z * cs + 1j * zl * sn
        scale = z + abs(zl)
    if abs(den) < POLE_TOL * scale:
        return Immittance(complex(math.inf, math.inf), "impedance", pole=True)
    return Immittance(num / den, "impedance")


def _tap_phases(theta, ratio):
    """Half electrical lengths of the two arms plus their sum and difference."""
    half_a = 0.5 * ratio * theta
    half_b = 0.5 * ratio * (2.0 * math.pi - theta)
    return half_a, half_b, half_a + half_b, half_a - half_b


def tap_tangents(pair, freq):
    """``(tan(beta*l/2), tan(beta*(L-l)/2))`` for the two ring arms."""
    ha, hb, _, _ = _tap_phases(pair.theta, freq / pair.fundamental_hz)
    return math.tan(ha), math.tan(hb)


def _offset_if_indeterminate(pair, freq, *pairs_of_terms):
    for num, den in pairs_of_terms:
        if abs(num) < POLE_TOL and abs(den) < POLE_TOL:
            return freq + ZERO_OVER_ZERO_OFFSET * pair.fundamental_hz
    return freq


def even_odd_impedances(pair, freq):
    """Even- (open bisection) and odd-mode (shorted bisection) input impedances."""
    check_positive(freq, "freq")
    ha, hb, total, _ = _tap_phases(pair.theta, freq / pair.fundamental_hz)
    ca, cb, sa, sb, st = math.cos(ha), math.cos(hb), math.sin(ha), math.sin(hb), math.sin(total)
    f = _offset_if_indeterminate(pair, freq, (ca * cb, st), (sa * sb, st))
    if f != freq:
        return even_odd_impedances(pair, f)
    zr = pair.z_ring
    out = []
    for num in (-1j * zr * ca * cb, 1j * zr * sa * sb):
        if abs(st) < POLE_TOL:
            out.append(Immittance(complex(math.inf, math.inf), "impedance", pole=True))
        else:
            out.append(Immittance(num / st, "impedance"))
    return tuple(out)


def reflection_coefficients(pair, freq):
    """Even- and odd-mode reflection coefficients seen from a tap (reference ``pair.z0``)."""
    check_positive(freq, "freq")
    ha, hb, total, _ = _tap_phases(pair.theta, freq / pair.fundamental_hz)
    ca, cb, sa, sb, st = math.cos(ha), math.cos(hb), math.sin(ha), math.sin(hb), math.sin(total)
    f = _offset_if_indeterminate(pair, freq, (ca * cb, st), (sa * sb, st))
    if f != freq:
        return reflection_coefficients(pair, f)
    jr = 1j * pair.r
    gamma_e = (jr * ca * cb + st) / (jr * ca * cb - st)
    gamma_o = (jr * sa * sb - st) / (jr * sa * sb + st)
    return gamma_e, gamma_o


def scattering_amplitudes(pair, freq):
    """``(K1, K2)``: reflected and transmitted amplitudes for a unit wave on one tap."""
    ge, go = reflection_coefficients(pair, freq)
    return 0.5 * (ge + go), 0.5 * (ge - go)


def ring_two_port(pair, freq, floor=POLE_TOL):
    """ABCD matrix between the two taps, built from the even/odd reflections.

    Raises ``DecoupledPorts`` when the transmitted amplitude ``|K2|`` is below
    ``floor`` (the two arms interfere destructively).
    """
    k1, k2 = scattering_amplitudes(pair, freq)
    if abs(k2) < floor:
        raise DecoupledPorts(
            f"|K2| = {abs(k2):.3e} below floor at theta={math.degrees(pair.theta):.6g} deg, "
            f"f={freq:.9g} Hz"
        )
    z0 = pair.z0
    den = 2.0 * k2
    a = (1.0 - k1 * k1 + k2 * k2) / den
    b = z0 * ((1.0 + k1) ** 2 - k2 * k2) / den
    c = ((1.0 - k1) ** 2 - k2 * k2) / (den * z0)
    return TwoPort(a, b, c, a, freq)


def ring_abcd_scaled(theta, ratio, z_ring):
    """Ring ABCD between taps multiplied by its pole factor, in sin/cos form.

    Returns ``(m, s)`` with ``m`` of shape ``(..., 2, 2)`` such that the true
    ABCD matrix is ``m / s``; both are finite for every frequency ratio
    ``ratio = f/f0``, and ``det(m) == s**2``. ``s`` vanishes on ring modes and
    at interference nulls.
    """
    ratio = np.asarray(ratio, dtype=float)
    phi = np.pi * ratio
    psi = ratio * (theta - np.pi)
    s = np.sin(phi) * np.cos(psi)
    a = (np.cos(phi) * np.sin(phi)).astype(complex)
    b = 0.5j * z_ring * np.sin(ratio * theta) * np.sin(ratio * (2.0 * np.pi - theta))
    c = 2j * np.sin(phi) ** 2 / z_ring
    m = np.stack([np.stack([a, b], axis=-1), np.stack([c, a], axis=-1)], axis=-2)
    return m, s


def ring_two_port_closed_form(pair, freq):
    """Same network as :func:`ring_two_port` from the sin/cos closed form."""
    m, s = ring_abcd_scaled(pair.theta, freq / pair.fundamental_hz, pair.z_ring)
    if abs(s) < POLE_TOL:
        raise DecoupledPorts("closed form singular (ring mode or interference null)")
    return TwoPort.from_matrix(m / s, freq)


def special_frequency_two_port(theta, k, z_ring):
    """Anti-diagonal ABCD at ``f = k*f0`` for half-integer ``k``.

    ``a = d = 0``, ``b = j*Z'``, ``c = j/Z'`` with ``Z' = (z_ring/2)*sin(k*theta)``.
    """
    check_tap_angle(theta)
    check_positive(z_ring, "z_ring")
    if not (k > 0 and abs(2.0 * k - round(2.0 * k)) < 1e-12 and round(2.0 * k) % 2 == 1):
        raise ValidationError(f"k must be a positive half-integer, got {k!r}")
    zp = 0.5 * z_ring * math.sin(k * theta)
    if abs(zp) < POLE_TOL * z_ring:
        raise DecoupledPorts(f"Z'(theta) vanishes at theta={math.degrees(theta):.6g} deg, k={k}")
    return TwoPort(0j, 1j * zp, 1j / zp, 0j)


def series_capacitor(capacitance, freq):
    """Series capacitor; ``capacitance=inf`` gives the identity."""
    check_positive(freq, "freq")
    if math.isinf(capacitance):
        return TwoPort.identity(freq)
    check_positive(capacitance, "capacitance")
    return TwoPort(1.0 + 0j, -1j / (2.0 * math.pi * freq * capacitance), 0j, 1.0 + 0j, freq)


def transmission_line_two_port(z_c, electrical_angle, freq=None):
    check_positive(z_c, "z_c")
    cs, sn = math.cos(electrical_angle), math.sin(electrical_angle)
    return TwoPort(complex(cs), 1j * z_c * sn, 1j * sn / z_c, complex(cs), freq)


def shunt_series_cascade(elements):
    """Chain product of two-ports in the listed order."""
    elements = list(elements)
    if not elements:
        raise ValidationError("cascade needs at least one element")
    return reduce(lambda x, y: x.cascade(y), elements)


def input_impedance(two_port, load):
    """Impedance at port 1 with ``load`` on port 2."""
    load = complex(load)
    if cmath.isinf(load):
        return two_port.a / two_port.c
    return (two_port.a * load + two_port.b) / (two_port.c * load + two_port.d)
