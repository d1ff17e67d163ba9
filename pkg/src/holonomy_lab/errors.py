"""Exception hierarchy.

Two broad categories matter for exit codes and the HTTP layer:
input problems (parse/validation) and physics-engine failures raised
by the numerical operations themselves.
"""


class HolonomyLabError(Exception):
    """Base class for all package errors."""


class InputError(HolonomyLabError):
    """Bad scenario document or parameters (CLI exit code 2)."""


class ParseError(InputError):
    """Scenario document is not well-formed. Carries a position when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(InputError):
    """Scenario document is well-formed but violates the kind schema."""


class UnsupportedFormatError(InputError):
    """Unknown report output format."""


class PhysicsError(HolonomyLabError):
    """Numerical precondition failed during a computation (CLI exit code 3)."""


class NotHermitianError(PhysicsError):
    pass


class DimensionMismatchError(PhysicsError):
    pass


class NonFiniteStateError(PhysicsError):
    pass


class DegenerateSpectrumError(PhysicsError):
    pass


class GaugeObstructionError(PhysicsError):
    pass


class OpenLoopError(PhysicsError):
    pass


class DegenerateOverlapError(PhysicsError):
    pass


class BasePointMismatchError(PhysicsError):
    pass


class AntipodalSegmentError(PhysicsError):
    pass


class SuperluminalVelocityError(PhysicsError):
    pass


class LoopThroughSolenoidError(PhysicsError):
    pass


class CenterOnLoopError(PhysicsError):
    pass


class InsufficientProbesError(PhysicsError):
    pass


class InternalInvariantBrokenError(HolonomyLabError):
    """A result violated an internal consistency guarantee (e.g. NaN output)."""
