"""Shared exception hierarchy.

Module-specific errors subclass FairstreamError so the HTTP layer and CLI
can map them to status codes / exit codes in one place.
"""


class FairstreamError(Exception):
    """Base class for all domain errors."""


class ValidationError(FairstreamError):
    """A field-level validation failure; carries the offending field name."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"invalid field: {field}")


class NotFoundError(FairstreamError):
    """A referenced entity does not exist."""


class AuthError(FairstreamError):
    """Missing or invalid credential (HTTP 401)."""


class ForbiddenError(FairstreamError):
    """Valid credential, insufficient role (HTTP 403)."""
