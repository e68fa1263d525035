"""Exception types raised across the package."""


class RingbusError(Exception):
    """Base class for all package errors."""

    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class DecoupledPorts(RingbusError):
    """The two ports of a network carry no transmission at this frequency."""

    code = "decoupled_ports"


class NoRootInBracket(RingbusError):
    code = "no_root_in_bracket"


class PoleInBracket(RingbusError):
    code = "pole_in_bracket"


class Unachievable(RingbusError):
    code = "unachievable"


class DimensionOverflow(RingbusError):
    code = "dimension_overflow"


class AmbiguousLabel(RingbusError):
    code = "ambiguous_label"


class NonConvergence(RingbusError):
    code = "non_convergence"

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class UnderdeterminedSystem(RingbusError):
    code = "underdetermined_system"


class SinglePeak(RingbusError):
    """Only one resolvable peak; ``center_hz`` and ``width_hz`` hold the fallback."""

    code = "single_peak"

    def __init__(self, message, center_hz=float("nan"), width_hz=float("nan")):
        super().__init__(message)
        self.center_hz = center_hz
        self.width_hz = width_hz

    def to_dict(self):
        d = super().to_dict()
        d.update(center_hz=self.center_hz, width_hz=self.width_hz)
        return d


class FitDiverged(RingbusError):
    code = "fit_diverged"


class ResonantDenominator(RingbusError):
    code = "resonant_denominator"


class UnresolvedCoefficient(RingbusError):
    code = "unresolved_coefficient"


class NoPath(RingbusError):
    code = "no_path"


class MultiplePaths(RingbusError):
    code = "multiple_paths"


class ParseError(RingbusError):
    code = "parse_error"


class ValidationError(RingbusError, ValueError):
    code = "validation_error"
