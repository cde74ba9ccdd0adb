"""
Exception hierarchy for the ℏ-expansion engine.
Every error carries the process exit code the command line maps it to.
"""

from dataclasses import dataclass, field


class TodaError(Exception):
    """Base class for all engine errors."""

    exit_code = 1


class ConfigError(TodaError, ValueError):
    """Invalid configuration, flags or truncation."""

    exit_code = 2


class ParseError(ConfigError):
    """
    Syntax error in an expression.

    Parameters:
    -----------
    message : str
        What went wrong
    source : str
        The full source text
    position : int
        Offset of the offending character in ``source``
    """

    def __init__(self, message, source="", position=0):
        self.source = source
        self.position = position
        pointer = ""
        if source:
            pointer = f"\n  {source}\n  {' ' * position}^"
        super().__init__(f"{message} at position {position}{pointer}")


class RingError(TodaError, ArithmeticError):
    """Operation outside the coefficient ring (or mixed degree caps)."""


class SymbolError(TodaError):
    """Incompatible symbols, charts or an impossible inversion."""


class WindowExhausted(TodaError):
    """The validity window cannot cover the requested ξ-range."""

    exit_code = 3

    def __init__(self, message, hint=None):
        self.hint = hint
        if hint:
            message = f"{message} (hint: {hint})"
        super().__init__(message)


class CertificateError(TodaError):
    """An exp_ad generator has no structural termination certificate."""


@dataclass
class CheckReport:
    """
    Outcome of one coefficientwise comparison.

    ``checked`` counts the (ℏ-order, ξ-exponent) positions compared,
    ``residuals`` lists the non-vanishing ones in canonical text.
    """

    name: str
    passed: bool
    checked: int = 0
    residuals: list = field(default_factory=list)
    detail: str = ""

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        text = f"{self.name}: {status} ({self.checked} coefficients)"
        if self.detail:
            text += f" - {self.detail}"
        return text


class CheckFailure(TodaError):
    """An assertion-grade check failed; ``report`` holds the details."""

    def __init__(self, message, report=None):
        self.report = report
        if report is not None and report.residuals:
            message = f"{message}; first residual: {report.residuals[0]}"
        super().__init__(message)


class SeedError(CheckFailure):
    """The dispersionless seed does not solve the σℏ-level problem."""


class InductionError(CheckFailure):
    """P_j ≠ P̄_j or Q_j ≠ Q̄_j for some j below the current order."""


class CompatibilityError(CheckFailure):
    """The two sides of the order-i compatibility condition disagree."""


class InvariantError(TodaError):
    """A proved vanishing or order bound failed during a recursion."""
