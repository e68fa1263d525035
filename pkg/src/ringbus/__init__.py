"""Ring-resonator bus couplers for transmon networks."""

__version__ = "0.1.0"

from .crosstalk import (
    CRSetup,
    CrossTalkEstimator,
    DephasingInput,
    TomographyTrace,
    cr_amplitudes,
    estimate_crosstalk,
    readout_dephasing_rate,
    simulate_cr_tomography,
)
from .device import DeviceSpec, load_bundled_device, parse_device_spec
from .exceptions import RingbusError
from .inversion import (
    CrossKerrCouplingRegressor,
    DoubleLorentzianSplitter,
    FitResult,
    MeasurementSet,
    fit_couplings,
    load_measurement_set,
)
from .network import RingTapPair, TwoPort, ring_two_port
from .ring import (
    LinearizedQubit,
    RingCouplingModel,
    RingSpec,
    calibrate_coupling_cap,
    coupling_at,
    coupling_map,
    find_eigenmodes,
)
from .scaling import MultiRingTopology, QubitPlacement, RingLink, connectivity_report
from .spectrum import TransmonSpec, TruncationPolicy, build_hamiltonian, cross_kerr, diagonalize, ramsey_shift

__all__ = [
    "CRSetup",
    "CrossKerrCouplingRegressor",
    "CrossTalkEstimator",
    "DephasingInput",
    "DeviceSpec",
    "DoubleLorentzianSplitter",
    "FitResult",
    "LinearizedQubit",
    "MeasurementSet",
    "MultiRingTopology",
    "QubitPlacement",
    "RingCouplingModel",
    "RingLink",
    "RingSpec",
    "RingTapPair",
    "RingbusError",
    "TomographyTrace",
    "TransmonSpec",
    "TruncationPolicy",
    "TwoPort",
    "build_hamiltonian",
    "calibrate_coupling_cap",
    "connectivity_report",
    "coupling_at",
    "coupling_map",
    "cr_amplitudes",
    "cross_kerr",
    "diagonalize",
    "estimate_crosstalk",
    "find_eigenmodes",
    "fit_couplings",
    "load_bundled_device",
    "load_measurement_set",
    "parse_device_spec",
    "ramsey_shift",
    "readout_dephasing_rate",
    "ring_two_port",
    "simulate_cr_tomography",
]
