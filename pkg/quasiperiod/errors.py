"""Custom errors."""

from quasiperiod.consts import EXIT_INPUT, EXIT_NUMERICAL


class QuasiperiodError(Exception):
    """Base class for every error raised by the library."""

    code = "QUASIPERIOD_ERROR"
    exit_code = EXIT_NUMERICAL


### Input errors ###
class InputError(QuasiperiodError):
    """Raised when a file, document or object handed to the library is unusable."""

    code = "INPUT_ERROR"
    exit_code = EXIT_INPUT


class InputFileError(InputError):
    """Raised when an input file is missing or unreadable."""

    code = "INPUT_FILE"


class ParseError(InputError):
    """Raised when a JSON document is malformed or misses a field."""

    code = "PARSE"

    def __init__(self, message: str, field_path: str = "", line: int | None = None):
        location = []
        if field_path:
            location.append(f"field {field_path}")
        if line is not None:
            location.append(f"line {line}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.field_path = field_path
        self.line = line


class InvalidObject(InputError):
    """Raised when a domain object violates its invariants."""

    code = "INVALID_OBJECT"


### Numerical errors ###
class NumericalError(QuasiperiodError):
    """Raised when a numerical procedure cannot deliver its result."""

    code = "NUMERICAL"


class ConstantDerivative(NumericalError):
    """Raised when differentiating a constant quasipolynomial."""

    code = "CONSTANT_DERIVATIVE"


class ZeroOnBoundary(NumericalError):
    """Raised when a contour passes too close to a zero."""

    code = "ZERO_ON_BOUNDARY"


class PhaseAmbiguity(NumericalError):
    """Raised when the winding number cannot be rounded unambiguously."""

    code = "PHASE_AMBIGUITY"


class NonConvergence(NumericalError):
    """Raised when Newton iteration fails to reach the residual tolerance."""

    code = "NON_CONVERGENCE"


class MarginViolation(NumericalError):
    """Raised when an inner window (or its translate) leaves the divisor window."""

    code = "MARGIN_VIOLATION"


class NotAnAlmostPeriod(NumericalError):
    """Raised when a translation number handed in as verified does not verify."""

    code = "NOT_AN_ALMOST_PERIOD"


class NoAlmostPeriod(NumericalError):
    """Raised when a scan finds no almost period large enough to extract a period from."""

    code = "NO_ALMOST_PERIOD"


class TooFewElements(NumericalError):
    """Raised when a gap is requested from fewer than two values."""

    code = "TOO_FEW_ELEMENTS"


class EmptyDivisor(NumericalError):
    """Raised when a divisor has no points where some are required."""

    code = "EMPTY_DIVISOR"


class EmptyClasses(NumericalError):
    """Raised when the pigeonhole bound receives no classes."""

    code = "EMPTY_CLASSES"


class NoUniqueTranslate(NumericalError):
    """Raised when the anchor's translate is matched by zero or several points."""

    code = "NO_UNIQUE_TRANSLATE"


class NonRealPeriod(NumericalError):
    """Raised when the extracted translation is not purely vertical."""

    code = "NON_REAL_PERIOD"


class PropagationBreak(NumericalError):
    """Raised when invariance cannot be carried through a slab."""

    code = "PROPAGATION_BREAK"


class Incommensurable(NumericalError):
    """Raised when periods admit no common unit at the requested tolerance."""

    code = "INCOMMENSURABLE"


class DecompositionIncomplete(NumericalError):
    """Raised when some substrip yields no verified period."""

    code = "DECOMPOSITION_INCOMPLETE"


class OffsetOnBoundary(NumericalError):
    """Raised when an offset sits on the edge used to orient its correction."""

    code = "OFFSET_ON_BOUNDARY"


class RadiusTooLarge(NumericalError):
    """Raised when the series ratio reaches 1 and no tail bound exists."""

    code = "RADIUS_TOO_LARGE"


class BoundViolated(NumericalError):
    """Raised when a sampled factor modulus leaves its certified band."""

    code = "BOUND_VIOLATED"

    def __init__(self, message: str, z: complex | None = None):
        super().__init__(message)
        self.z = z


class ZeroMismatch(NumericalError):
    """Raised when factor zeros do not reproduce the zeros of the function."""

    code = "ZERO_MISMATCH"


class NoLineStructure(NumericalError):
    """Raised when zeros do not cluster on vertical lines."""

    code = "NO_LINE_STRUCTURE"


class SpacingMismatch(NumericalError):
    """Raised when zero lines disagree on their vertical spacing."""

    code = "SPACING_MISMATCH"


class SpectrumMismatch(NumericalError):
    """Raised when a spectrum is not an arithmetic progression matching the zeros."""

    code = "SPECTRUM_MISMATCH"
