"""
Exception hierarchy for smilab.

Commands map ConfigError/PreconditionError to exit code 2 and NumericError
to exit code 3.
"""


class SmiLabError(Exception):
    exit_code = 1


class ConfigError(SmiLabError):
    exit_code = 2


class PreconditionError(SmiLabError, ValueError):
    exit_code = 2


class ShapeError(PreconditionError):
    pass


class CapacityError(PreconditionError):
    def __init__(self, label, available, requested):
        self.label = label
        self.available = available
        self.requested = requested
        super().__init__(
            f"{label} class has {available} rows but {requested} were requested"
        )


class LibsvmParseError(PreconditionError):
    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class NumericError(SmiLabError, ArithmeticError):
    exit_code = 3


class IllConditionedError(NumericError):
    pass


class DegenerateDataError(NumericError):
    pass


class DivergenceError(NumericError):
    pass


class QuadratureError(NumericError):
    pass


class StaleCacheError(NumericError):
    pass
