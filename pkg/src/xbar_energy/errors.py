"""Exception types raised across the package."""


class XbarError(Exception):
    """Base class for all errors raised by xbar_energy."""


class DomainError(XbarError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class DecodeError(DomainError):
    """A conductance does not sit on the programmed level grid."""


class SchemaError(XbarError, ValueError):
    """A cell-model or fixture file does not match its schema."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class CalibrationError(XbarError):
    """Base class for calibration failures."""


class FitError(CalibrationError):
    """The sweep cannot determine a line (too few distinct conductances)."""


class CalibrationQualityError(CalibrationError):
    """The fitted parameters are physically meaningless (negative)."""

    def __init__(self, message, alpha, p_wl):
        super().__init__(message)
        self.alpha = alpha
        self.p_wl = p_wl


class ConvergenceError(XbarError, RuntimeError):
    """The iterative circuit solver did not reach its tolerance."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
