# src/domain/errors.py
from typing import Optional


class ChainImpError(Exception):
    """Root of all errors raised by the imputation engine."""


class DataValidationError(ChainImpError, ValueError):
    """Input data or metadata violates a load-time contract."""


class ConfigError(DataValidationError):
    """Malformed config document or inconsistent run options."""


class NumericalError(ChainImpError, ArithmeticError):
    """A model fit or draw could not be carried out."""


class RankDeficientError(NumericalError):
    pass


class GlmConvergenceError(NumericalError):
    pass


class DegenerateSampleError(NumericalError):
    pass


class ImputationError(NumericalError):
    """Wraps a failure inside a chain so the failing variable is named."""

    def __init__(self, message: str, variable: Optional[str] = None, chain: Optional[int] = None):
        self.variable = variable
        self.chain = chain
        location = []
        if variable is not None:
            location.append(f"variable '{variable}'")
        if chain is not None:
            location.append(f"chain {chain}")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")
