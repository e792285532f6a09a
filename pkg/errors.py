"""
Exception hierarchy shared by the numerical services, the harness and the surfaces.
"""

from typing import Any, Dict, Optional


class SimulationError(Exception):
    """Base error. Carries a context dict that callers can extend while re-raising."""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = dict(context or {})

    def add_context(self, **kwargs: Any) -> "SimulationError":
        for key, value in kwargs.items():
            self.context.setdefault(key, value)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        ctx = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} [{ctx}]"


class InvalidArgumentError(SimulationError, ValueError):
    """Inputs violate a documented precondition."""


class NumericFailureError(SimulationError, ArithmeticError):
    """A numerical routine failed; `diagnostics` holds solver details."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None,
                 context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)
        self.diagnostics: Dict[str, Any] = dict(diagnostics or {})


class ResourceLimitError(SimulationError):
    """Requested simulation exceeds the configured statevector budget."""


class InvariantViolationError(SimulationError, AssertionError):
    """A checked invariant failed. `invariant` names it for the CLI exit message."""

    def __init__(self, invariant: str, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(f"{invariant}: {message}", context)
        self.invariant = invariant
