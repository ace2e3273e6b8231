"""Exception types raised across the package."""


class CaseFormatError(ValueError):
    """Malformed case file; carries the offending 1-based line number."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class GridValidationError(ValueError):
    pass


class SingularElementError(ValueError):
    pass


class DomainError(ValueError):
    pass


class ContractError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


class TrainingError(RuntimeError):
    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class ModelFormatError(ValueError):
    pass


class UnsupportedFormatError(ValueError):
    pass


class ConfigError(ValueError):
    pass
