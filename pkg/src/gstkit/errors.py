"""Exception hierarchy shared by all modules.

`InputError` marks problems with user-supplied data (malformed files, unknown
labels, incomplete datasets); `NumericalError` marks a computation that could
not reach its stated tolerance.  The command line maps them to exit codes 2
and 3 respectively.
"""


class GSTError(Exception):
    """Base class for all errors raised by gstkit."""


class InputError(GSTError, ValueError):
    pass


class NumericalError(GSTError, ArithmeticError):
    pass


class ParseError(InputError):
    """Malformed gate-sequence text.  `position` is the 0-based character offset."""

    def __init__(self, message: str, text: str, position: int):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position} in {text!r}")


class CPTruncationError(NumericalError):
    def __init__(self, message: str, last_iterate, residual: float):
        self.last_iterate = last_iterate
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")
