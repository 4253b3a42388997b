"""Exception hierarchy shared by all modules."""


class ZonalMCError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(ZonalMCError, ValueError):
    pass


class DomainError(ZonalMCError, ValueError):
    """A point lies outside the chart domain, or a quantity is undefined there."""


class ConditioningError(ZonalMCError, ArithmeticError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class CapabilityError(ZonalMCError):
    """An operation needs more than the inputs provide (jet order, chart kind, a=1...)."""


class PreconditionError(ZonalMCError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class ConstructionError(ZonalMCError):
    """A perturbation field could not be built inside the requested margins."""


class EvaluationError(ZonalMCError, FloatingPointError):
    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class ConfigError(ZonalMCError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path:
            where += f"{path}: "
        if line is not None:
            where = f"line {line}: " + where
        super().__init__(where + message)
        self.path = path
        self.line = line
