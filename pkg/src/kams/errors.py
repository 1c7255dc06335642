"""Exception types raised across the package."""


class KamsError(Exception):
    """Base class for all package errors."""


class InvalidParameter(KamsError, ValueError):
    pass


class TooFewBins(KamsError, ValueError):
    pass


class FitDiverged(KamsError, RuntimeError):
    pass


class NegativeDt(KamsError, ValueError):
    pass


class EmptyWindow(KamsError, ValueError):
    pass


class EmptyAfterWarmup(KamsError, ValueError):
    pass


class BinMismatch(KamsError, ValueError):
    pass


class NoQualifyingPoints(KamsError, ValueError):
    pass


class ZeroReference(KamsError, ZeroDivisionError):
    pass


class ZeroOverflow(KamsError, ZeroDivisionError):
    pass


class DegenerateSpectrum(KamsError, ValueError):
    pass


class UnstableSystem(KamsError, ValueError):
    pass


class NumericalDegeneracy(KamsError, ArithmeticError):
    pass


class ParseError(KamsError):
    """Malformed configuration text. Carries the offending line when known."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(KamsError):
    """Configuration violates one or more invariants.

    ``problems`` lists every violation, not just the first one found.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
