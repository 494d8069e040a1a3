from typing import Dict, Optional


class LandauerError(Exception):
    """Base class for every domain error raised by the package."""


class DimensionMismatch(LandauerError):
    pass


class NotHermitianError(LandauerError):
    pass


class NotNormalizedError(LandauerError):
    pass


class PreconditionError(LandauerError):
    pass


class MarginalMismatch(LandauerError):
    """The reference marginals of input and output differ (process not trace-preserving on the support)."""


class BasisMismatch(LandauerError):
    pass


class SolverError(LandauerError):
    def __init__(self, message: str, status: str = 'numerical_failure',
                 residuals: Optional[Dict[str, float]] = None):
        super().__init__(message)
        self.status = status
        self.residuals = residuals or {}


class FileFormatError(LandauerError):
    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
