"""
Exception hierarchy for the JIT transpilation toolkit.

ValidationError (and subclasses) mean the caller handed us something invalid;
the CLI maps them to exit code 1. Anything else is an internal failure (exit 2).
"""


class JitError(Exception):
    """Base class for every error raised by the toolkit."""


class ValidationError(JitError, ValueError):
    """Invalid input, configuration or request."""


class CircuitError(ValidationError):
    """Malformed circuit or circuit text."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TopologyError(ValidationError):
    """Invalid coupling graph."""


class ConfigError(ValidationError):
    """Invalid scenario configuration."""


class CalibrationError(ValidationError):
    """Calibration data missing, inconsistent or out of range."""


class LayoutError(ValidationError):
    """Layout does not fit the circuit or the device."""


class CouplingError(ValidationError):
    """A two-qubit gate acts on a pair that is not a device edge."""


class SimulationError(JitError):
    """The simulator ended up in an inconsistent state."""


class ReportError(JitError):
    """Report could not be written or read."""

    def __init__(self, message, path=None):
        self.path = path
        if path is not None:
            message = f"{message} ({path})"
        super().__init__(message)
