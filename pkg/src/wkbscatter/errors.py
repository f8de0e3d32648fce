"""Exception hierarchy shared by all solver stages."""


class WkbError(Exception):
    """Base class for every error raised by the package."""


class DomainError(WkbError, ValueError):
    """Evaluation point or interval outside the admissible region."""


class SingularityError(WkbError, ValueError):
    """Evaluation at a zero of a(x) (turning point)."""


class AdmissibilityError(WkbError, ValueError):
    """eps too large: the corrected phase is no longer monotone."""


class AssemblyError(WkbError, ArithmeticError):
    """Non-finite entries in an assembled FEM system."""


class SolverError(WkbError, ArithmeticError):
    """Numerically singular linear system."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NumericalFailure(WkbError, ArithmeticError):
    """Non-finite state encountered while marching."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DegenerateError(WkbError, ArithmeticError):
    """Vanishing denominator in an interface or scaling relation."""


class HypothesisViolation(WkbError):
    """The field/layout/eps combination fails the admissibility checks."""

    def __init__(self, report):
        super().__init__("; ".join(report.violations) or "hypothesis violation")
        self.report = report


class ConfigError(WkbError, ValueError):
    """Malformed experiment configuration."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip())
        self.line = line
        self.path = path
