"""Exception taxonomy shared across the solver and the CLI exit codes."""


class XnlsError(Exception):
    """Base class for all library errors."""


class ConfigError(XnlsError):
    """Invalid configuration, grid/field mismatch, or unsupported combination."""

    exit_code = 2


class NumericalBreakdownError(XnlsError):
    """NaN/Inf appeared in the solution without a preceding blow-up signature.

    Carries the last finite state and its time for post-mortem inspection.
    """

    exit_code = 3

    def __init__(self, message, t=None, last_state=None):
        super().__init__(message)
        self.t = t
        self.last_state = last_state


class UnexpectedBlowupError(XnlsError):
    """A run blew up although the scenario did not declare blow-up expected."""

    exit_code = 4


class GroundStateError(XnlsError):
    """Imaginary-time flow failed to converge."""

    exit_code = 3

    def __init__(self, message, last_state=None, residual=None):
        super().__init__(message)
        self.last_state = last_state
        self.residual = residual


class DivergingFlowError(GroundStateError):
    """Energy is unbounded below for the requested constrained minimization."""


class SuiteFailure(XnlsError):
    """An experiment suite ran to completion but its trend assertion failed."""

    exit_code = 5
