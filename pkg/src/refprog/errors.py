"""Shared exception hierarchy.

``EngineError`` covers everything a caller can recover from per scene or per
request; the batch runner catches it to isolate faults.  ``InternalError`` is
deliberately outside the hierarchy: it marks a broken invariant (a program
that should have been rejected by validation) and must surface as a bug.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base for recoverable engine errors."""


class SchemaError(EngineError):
    """A file does not match its documented JSON schema."""


class ConsistencyError(EngineError):
    """A file is schema-valid but internally inconsistent."""


class MissingEntry(EngineError):
    """A required precomputed scene entry (detection, similarity, depth) is absent."""


class DomainError(EngineError):
    """A numeric argument is outside its documented domain."""


class UnrecognizedPosition(EngineError):
    """A LOCATE position string matches no entry of the synonym table."""


class TransportError(EngineError):
    """The chat endpoint is unreachable or returned a malformed response."""


class InternalError(Exception):
    """Invariant violation: a validated program failed a shape check at runtime."""
