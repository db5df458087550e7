"""Command store: registration and execution of experiment commands."""

from __future__ import annotations

import inspect
from typing import TYPE_CHECKING, Any

from psygnal import Signal

from banditfield.commands.base import BaseCommand, CommandContext, parse_command
from banditfield.commands.events import CommandExecutedEvent
from banditfield.commands.output import CallbackOutputWriter, DefaultOutputWriter
from banditfield.exceptions import CommandError
from banditfield.log import get_logger


if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from banditfield.commands.base import OutputWriter
    from banditfield.commands.command import ExperimentCommand
    from banditfield.commands.events import CommandStoreEvent, CommandStoreEventHandler


logger = get_logger(__name__)


class CommandStore:
    """Central registry executing commands and announcing their outcome."""

    command_executed = Signal(CommandExecutedEvent)
    output = Signal(str)
    artifact_written = Signal(str)

    def __init__(
        self,
        *,
        event_handler: CommandStoreEventHandler | None = None,
        commands: Sequence[type[ExperimentCommand] | BaseCommand] | None = None,
        enable_builtins: bool = True,
    ) -> None:
        """Initialize command store.

        Args:
            event_handler: Optional async or sync handler for execution events
            commands: Optional list of additional commands to register
            enable_builtins: Whether to register run, table, mfe, diagnose and help
        """
        self._commands: dict[str, BaseCommand] = {}
        self.event_handler = event_handler
        if enable_builtins:
            self.register_builtin_commands()
        for cmd in commands or []:
            self.register_command(cmd)

    def create_context[TContextData](
        self,
        data: TContextData | None = None,
        output_writer: OutputWriter | Callable[..., Any] | None = None,
    ) -> CommandContext[TContextData]:
        """Create a command execution context.

        Args:
            data: Custom context data
            output_writer: Output writer or plain callback; rich console by default
        """
        if callable(output_writer):
            writer: OutputWriter = CallbackOutputWriter(output_writer)
        else:
            writer = output_writer or DefaultOutputWriter()
        return CommandContext(output=writer, data=data, command_store=self)

    def register_command(
        self,
        command: type[ExperimentCommand] | BaseCommand,
        *,
        replace: bool = False,
    ) -> None:
        """Register a command class or instance.

        Raises:
            ValueError: If a command with the same name exists and replace=False
        """
        if isinstance(command, type):
            command = command()
        if command.name in self._commands and not replace:
            msg = f"Command {command.name!r} already registered"
            raise ValueError(msg)
        self._commands[command.name] = command

    def unregister_command(self, name: str) -> None:
        if self._commands.pop(name, None) is not None:
            logger.debug("Unregistered command: %s", name)

    def get_command(self, name: str) -> BaseCommand | None:
        return self._commands.get(name)

    def list_commands(self, category: str | None = None) -> list[BaseCommand]:
        commands = list(self._commands.values())
        if category:
            commands = [cmd for cmd in commands if cmd.category == category]
        return commands

    def get_commands_by_category(self) -> dict[str, list[BaseCommand]]:
        result: dict[str, list[BaseCommand]] = {}
        for cmd in self._commands.values():
            result.setdefault(cmd.category, []).append(cmd)
        return result

    async def execute_command[TContextData](
        self,
        command: str | Sequence[str],
        ctx: CommandContext[TContextData],
    ) -> Any:
        """Execute a command line.

        Args:
            command: Command string or argv list, command name first
            ctx: Command execution context

        Raises:
            CommandError: If parsing fails, the command is unknown, or it raised
        """
        command_str = command if isinstance(command, str) else " ".join(command)
        try:
            parsed = parse_command(command)
            cmd = self.get_command(parsed.name)
            if not cmd:
                msg = f"Unknown command: {parsed.name}"
                raise CommandError(msg)  # noqa: TRY301

            if "help" in parsed.args.kwargs:
                await ctx.print(cmd.format_help())
                return None

            msg = "Executing command: %s (args=%s, kwargs=%s)"
            logger.debug(msg, parsed.name, parsed.args.args, parsed.args.kwargs)
            result = await cmd.execute(ctx, parsed.args.args, parsed.args.kwargs)
            event = CommandExecutedEvent(
                command=command_str,
                context=ctx,
                success=True,
                result=result,
                artifacts=[str(p) for p in ctx.artifacts],
            )
            await self.notify(event)
            self.command_executed.emit(event)
        except CommandError:
            raise
        except Exception as e:
            msg = f"Command execution failed: {e}"
            event = CommandExecutedEvent(
                command=command_str,
                context=ctx,
                success=False,
                error=e,
            )
            await self.notify(event)
            self.command_executed.emit(event)
            raise CommandError(msg) from e
        else:
            return result

    async def execute_command_with_context[T](
        self,
        command: str | Sequence[str],
        context: T | None = None,
        output_writer: OutputWriter | Callable[..., Any] | None = None,
    ) -> Any:
        """Execute a command in a freshly created context."""
        ctx = self.create_context(context, output_writer=output_writer)
        return await self.execute_command(command, ctx)

    async def notify(self, event: CommandStoreEvent) -> None:
        """Pass an event to the optional handler, awaiting it if needed."""
        if self.event_handler is None:
            return
        result = self.event_handler(event)
        if inspect.isawaitable(result):
            await result

    def register_builtin_commands(self) -> None:
        from banditfield.commands.builtin import get_builtin_commands

        logger.debug("Registering builtin commands")
        for command in get_builtin_commands():
            self.register_command(command)
