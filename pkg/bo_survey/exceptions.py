"""
Exception types raised by the BO Survey package.
"""

from typing import List, Optional

import numpy as np


class BoSurveyError(Exception):
    """Base class for all package errors."""


class ContractViolation(BoSurveyError, ValueError):
    """Raised when an operation is called outside its preconditions."""


class SingularKernelError(BoSurveyError, np.linalg.LinAlgError):
    """Raised when the kernel matrix cannot be factorized even with jitter."""

    def __init__(self, message: str, jitter_levels: List[float]):
        super().__init__(f"{message} (attempted jitter levels: {jitter_levels})")
        self.jitter_levels = list(jitter_levels)


class DegenerateVarianceError(BoSurveyError, ArithmeticError):
    """Raised when the improvement variance is undefined (zero predictive std)."""


class UnsupportedDesignError(BoSurveyError, ValueError):
    """Raised when a design cannot provide the requested inclusion quantity."""


class DataFormatError(BoSurveyError, ValueError):
    """Raised for malformed population files."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigurationError(BoSurveyError, ValueError):
    """Raised for invalid simulation configurations."""
