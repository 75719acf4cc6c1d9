"""Exception hierarchy shared across the package."""


class CoupledMimoError(Exception):
    """Base class for every error raised by coupledmimo."""


class DimensionMismatch(CoupledMimoError, ValueError):
    pass


class NotPositiveDefinite(CoupledMimoError, ValueError):
    pass


class ConvergenceFailure(CoupledMimoError, RuntimeError):
    pass


class TouchstoneSyntaxError(CoupledMimoError, ValueError):
    """Malformed Touchstone content; carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnsupportedFormat(CoupledMimoError, ValueError):
    pass


class NonMonotoneFrequency(CoupledMimoError, ValueError):
    pass


class SingularConversion(CoupledMimoError, ValueError):
    pass


class OutOfBand(CoupledMimoError, ValueError):
    pass


class WrongKind(CoupledMimoError, ValueError):
    pass


class NumericalFailure(CoupledMimoError, RuntimeError):
    pass


class NonPassivePort(CoupledMimoError, ValueError):
    pass


class NonPassiveArray(CoupledMimoError, ValueError):
    pass


class SingularTermination(CoupledMimoError, ValueError):
    pass


class AllZeroGains(CoupledMimoError, ValueError):
    pass


class ConfigError(CoupledMimoError, ValueError):
    """Invalid experiment configuration; ``field`` is a dotted path."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
