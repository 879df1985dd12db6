"""Command dispatch table.

Every mutating operation registers a handler here. Handlers must be
deterministic functions of (model, params, ctx) — no wall clock, no RNG —
so replaying the command log reconstructs the exact model state. Handlers
validate before mutating; on error the model is untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import NotFoundError
from .model import Model, Role

Handler = Callable[[Model, dict, "Ctx"], dict]

HANDLERS: dict[str, Handler] = {}


@dataclass
class Ctx:
    """Execution context supplied by the engine (or the replayed log entry)."""

    timestamp: str
    sequence_number: int
    actor_role: Role
    # blobs written by the handler this call; the engine persists them
    new_blobs: list[tuple[str, bytes]] = field(default_factory=list)


def command(name: str) -> Callable[[Handler], Handler]:
    def register(handler: Handler) -> Handler:
        if name in HANDLERS:
            raise RuntimeError(f"duplicate command registration: {name}")
        HANDLERS[name] = handler
        return handler

    return register


def get_handler(name: str) -> Handler:
    try:
        return HANDLERS[name]
    except KeyError:
        raise NotFoundError(f"unknown operation {name!r}") from None
