"""Exception types shared across the package."""

from __future__ import annotations

from typing import Any


class DomainError(ValueError):
    """An input lies outside the domain on which an operation is defined."""


class UnsupportedEndpointError(DomainError):
    """An operation was asked to evaluate at lambda = 0 or lambda = inf where it has no meaning."""


class PreconditionError(ValueError):
    """A documented precondition of an operation does not hold."""


class InfeasibleError(RuntimeError):
    """No point satisfying the constraints was found.

    ``certificate`` carries whatever evidence the caller needs to audit the verdict,
    e.g. the best constraint violation reached or the node whose capacity falls short.
    """

    def __init__(self, message: str, certificate: dict[str, Any] | None = None):
        super().__init__(message)
        self.certificate = dict(certificate or {})
