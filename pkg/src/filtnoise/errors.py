"""Exception hierarchy shared by all modules."""


class FiltnoiseError(Exception):
    """Base class for package errors."""


class DomainError(FiltnoiseError, ValueError):
    """Argument outside the domain of an operation."""


class KernelValidationError(FiltnoiseError, ValueError):
    """A density does not satisfy the kernel admissibility conditions."""


class BlowUpError(FiltnoiseError, FloatingPointError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite values at step {step}")


class IntegrationIncompleteError(FiltnoiseError):
    """Autocorrelation never entered the Bartlett zero band."""

    def __init__(self, partial, message=None):
        self.partial = partial
        super().__init__(
            message or f"autocorrelation never entered the zero band; partial tau={partial:.6g}"
        )


class FitUndefinedError(FiltnoiseError):
    """No usable lags for a kernel-smoothness fit."""


class ConfigError(FiltnoiseError):
    """Invalid or incomplete run configuration."""


class MissingInputError(FiltnoiseError, FileNotFoundError):
    """A required input file does not exist."""


class DataFormatError(FiltnoiseError, ValueError):
    """A data file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")
