"""Event definitions for the command layer."""

from __future__ import annotations

from collections.abc import Awaitable, Callable
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any


if TYPE_CHECKING:
    from banditfield.commands.base import CommandContext


@dataclass
class CommandExecutedEvent[TData]:
    """Event emitted when a command finished, successfully or not."""

    command: str
    context: CommandContext[TData]
    success: bool
    result: Any | None = None
    error: Exception | None = None
    artifacts: list[str] = field(default_factory=list)


@dataclass
class CommandOutputEvent[TData]:
    """Event emitted when a command prints a message."""

    output: str
    context: CommandContext[TData]


CommandStoreEvent = CommandExecutedEvent[Any] | CommandOutputEvent[Any]


CommandStoreEventHandler = Callable[[CommandStoreEvent], Any | Awaitable[Any]]
