"""Exception hierarchy shared by every stage of the pipeline."""


class HybridMFError(Exception):
    """Base class for all package errors."""


class InputError(HybridMFError):
    """Bad input data or configuration (CLI exit code 2)."""


class ParseError(InputError):
    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class SchemaError(InputError):
    pass


class ValidationError(InputError):
    pass


class IntegrityError(InputError):
    pass


class ConfigError(InputError):
    pass


class EmptyMatrixError(InputError):
    pass


class ShapeError(HybridMFError, ValueError):
    pass


class UndefinedMetricError(HybridMFError, ValueError):
    pass


class NumericError(HybridMFError):
    """Numerical failure during optimisation (CLI exit code 3)."""


class DivergenceError(NumericError):
    def __init__(self, epoch, message="loss became non-finite"):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")
