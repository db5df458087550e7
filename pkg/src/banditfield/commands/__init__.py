"""Declarative experiment commands and their store."""

from __future__ import annotations

from banditfield.commands.base import (
    BaseCommand,
    CommandContext,
    OutputWriter,
    parse_args,
    parse_command,
    parse_int_list,
)
from banditfield.commands.command import ExperimentCommand
from banditfield.commands.events import CommandExecutedEvent, CommandOutputEvent
from banditfield.commands.output import CallbackOutputWriter, DefaultOutputWriter
from banditfield.commands.store import CommandStore

__all__ = [
    "BaseCommand",
    "CallbackOutputWriter",
    "CommandContext",
    "CommandExecutedEvent",
    "CommandOutputEvent",
    "CommandStore",
    "DefaultOutputWriter",
    "ExperimentCommand",
    "OutputWriter",
    "parse_args",
    "parse_command",
    "parse_int_list",
]
