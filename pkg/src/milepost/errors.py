"""Error taxonomy shared by the engine, CLI, and HTTP surfaces.

Every failure carries a stable machine-readable ``code`` so the CLI can
print one-line errors and the HTTP layer can map classes to status codes.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class; `code` is stable across releases."""

    code = "engine_error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return self.message


class ValidationError(EngineError):
    code = "validation"


class DuplicateError(EngineError):
    code = "duplicate"


class NotFoundError(EngineError):
    code = "not_found"


class IllegalTransitionError(EngineError):
    code = "illegal_transition"


class RoleError(EngineError):
    code = "role_mismatch"


class StaleValueError(EngineError):
    """Optimistic-concurrency failure: recorded old value or revision no
    longer matches the live model."""

    code = "stale"


class PhaseError(EngineError):
    """Operation invoked outside its legal lifecycle phase."""

    code = "phase_gate"


class StoreError(EngineError):
    """Persistence failure: corrupt file, bad version, unreadable path."""

    code = "store"
