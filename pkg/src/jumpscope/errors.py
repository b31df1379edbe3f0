"""Exception hierarchy.

Two families exist so the CLI can map them to exit codes: ``DetectionError``
(the numbers do not admit a warranted answer, exit 2) and ``InputError``
(files, parsing, malformed specs, exit 1).
"""


class JumpscopeError(Exception):
    """Base class for every error raised by this package."""


class DetectionError(JumpscopeError):
    pass


class InputError(JumpscopeError):
    pass


class InvalidClass(DetectionError, ValueError):
    """Smoothness-class invariants do not hold."""


class DomainTooSmall(DetectionError):
    """The step h is so large that 2h >= 1; no interior node exists."""


class OutOfDomain(DetectionError, ValueError):
    """A query point left [0, 1]."""


class ModeUnsupportedKinks(DetectionError):
    """Kink classification was requested for the piecewise-linear class."""


class NotRefinable(DetectionError):
    """Bracket refinement could not certify a sub-bracket."""


class InvalidSpec(InputError, ValueError):
    pass


class ConstraintsInfeasible(InputError, ValueError):
    pass


class ParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonUniformGrid(InputError):
    pass


class DomainNotUnit(InputError):
    pass
