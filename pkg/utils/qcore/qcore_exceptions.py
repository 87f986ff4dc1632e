"""
utils/qcore/qcore_exceptions.py
Custom exceptions for the quantum-core layer and everything built on it.
"""

from typing import Optional


class QCoreError(Exception):
    """Base exception for all toolkit errors."""

    def to_dict(self, operation: Optional[str] = None) -> dict:
        """Machine-readable error object (CLI error channel)."""
        return {
            "error": type(self).__name__,
            "operation": operation,
            "message": str(self),
            "invariant": getattr(self, "invariant", None),
        }


class LayoutError(QCoreError):
    """Label collision, unknown label or invalid subsystem split."""

    def __init__(self, message: str, labels: Optional[list] = None):
        self.message = message
        self.labels = labels
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        if self.labels:
            return f"Layout Error: {self.message} - labels: {self.labels}"
        return f"Layout Error: {self.message}"


class StateValidationError(QCoreError):
    """A state, operator or channel violates one of its invariants."""

    def __init__(self, message: str, invariant: str, deviation: Optional[float] = None):
        self.message = message
        self.invariant = invariant
        self.deviation = deviation
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        if self.deviation is not None:
            return f"Invariant '{self.invariant}' violated: {self.message} (deviation {self.deviation:.3e})"
        return f"Invariant '{self.invariant}' violated: {self.message}"


class DimensionError(QCoreError):
    """Incompatible dimensions or a size the toolkit refuses to build."""

    def __init__(self, message: str, dim: Optional[int] = None, limit: Optional[int] = None):
        self.message = message
        self.dim = dim
        self.limit = limit
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        if self.dim is not None and self.limit is not None:
            return f"Dimension Error: {self.message} (dim {self.dim} > limit {self.limit})"
        return f"Dimension Error: {self.message}"


class StateFormatError(QCoreError):
    """The JSON interchange document cannot be parsed."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.message = message
        self.path = path
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        if self.path:
            return f"Format Error in {self.path}: {self.message}"
        return f"Format Error: {self.message}"


class InvalidParameterError(QCoreError):
    """A numeric parameter (eps, L, K, ...) is outside its admissible range."""
    pass


class SdpError(QCoreError):
    """Solver-layer failure that cannot be reported as a solution status."""

    def __init__(self, message: str, solver: Optional[str] = None):
        self.message = message
        self.solver = solver
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        if self.solver:
            return f"SDP Error [{self.solver}]: {self.message}"
        return f"SDP Error: {self.message}"


class ExperimentConfigError(QCoreError):
    """Bad experiment or toolkit configuration (usage error)."""
    pass
