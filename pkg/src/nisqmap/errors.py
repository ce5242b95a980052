"""Exception hierarchy.

Every failure raised by the toolkit derives from ``NisqmapError`` so callers
(the CLI in particular) can separate input problems from verification
failures with a single ``except`` clause.
"""

from typing import Optional


class NisqmapError(Exception):
    """Base class for all toolkit errors."""


class CircuitSyntaxError(NisqmapError):
    """Raised when assembly text cannot be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedGateError(CircuitSyntaxError):
    """Gate outside the supported subset (three-plus qubits, non-cx two-qubit)."""


class DeviceValidationError(NisqmapError):
    """Device file or generated device violates the model invariants."""


class PartitionError(NisqmapError):
    """Invalid partition request (programs do not fit the device)."""


class RoutingError(NisqmapError):
    """Base class for mapping-transition failures."""


class RoutingDivergenceError(RoutingError):
    """No front gate became compliant within the swap budget."""


class EmptyCandidateSetError(RoutingError):
    """No legal swap candidate exists for the blocked front layers."""


class SimulationError(NisqmapError):
    """State-vector simulation cannot handle the request."""

