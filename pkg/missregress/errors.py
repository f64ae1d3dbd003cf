"""
Exception hierarchy for missregress

Data problems and numerical problems are kept apart so the CLI can map them
to distinct exit codes.
"""
from typing import Optional


class MissRegressError(Exception):
    """Base class for all library errors"""


class InvalidData(MissRegressError, ValueError):
    """Malformed input: wrong shapes, non-finite values, empty data, bad config"""


class NumericalError(MissRegressError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable result"""


class DivergenceError(NumericalError):
    """An SGD iterate became non-finite"""

    def __init__(self, k: int, message: Optional[str] = None):
        self.k = k
        super().__init__(message or f"Iterate became non-finite at iteration k={k}")


class SingularError(NumericalError):
    """Normal equations could not be solved"""
