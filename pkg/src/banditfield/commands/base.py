"""Base interfaces for the command layer."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
import inspect
import shlex
from typing import (
    TYPE_CHECKING,
    Annotated,
    Any,
    Literal,
    Protocol,
    get_args,
    get_origin,
    get_type_hints,
)

from upath import UPath

from banditfield.annotations import Short
from banditfield.commands.events import CommandOutputEvent
from banditfield.exceptions import CommandError


if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from upath.types import JoinablePathLike

    from banditfield.commands.store import CommandStore


TRUE_VALUES = ("true", "1", "yes", "on")
FALSE_VALUES = ("false", "0", "no", "off")


class OutputWriter(Protocol):
    """Interface for command output."""

    async def print(self, message: str) -> None:
        """Write a message to output."""
        ...


@dataclass
class CommandContext[TData]:
    """Context passed to command handlers.

    Type Parameters:
        TData: Type of the data available to commands.
    """

    output: OutputWriter
    data: TData | None
    command_store: CommandStore
    artifacts: list[UPath] = field(default_factory=list)
    """Files the running command promised to produce."""

    async def print(self, message: str) -> None:
        """Write a message to output."""
        self.command_store.output.emit(message)
        await self.command_store.notify(CommandOutputEvent(context=self, output=message))
        await self.output.print(message)

    def record_artifact(self, path: JoinablePathLike) -> UPath:
        """Register an output file of the current command."""
        target = UPath(path)
        self.artifacts.append(target)
        self.command_store.artifact_written.emit(str(target))
        return target

    def missing_artifacts(self) -> list[UPath]:
        return [p for p in self.artifacts if not p.exists()]


@dataclass
class ParsedCommandArgs:
    """Arguments parsed from a command line."""

    args: list[str]
    kwargs: dict[str, str]


@dataclass
class ParsedCommand:
    """Complete parsed command."""

    name: str
    args: ParsedCommandArgs


class BaseCommand(ABC):
    """Abstract base class for commands."""

    name: str
    """Command name"""

    description: str
    """Command description"""

    category: str
    """Command category"""

    usage: str | None
    """Command usage"""

    help_text: str
    """Help text"""

    def format_usage(self) -> str | None:
        """Format usage string."""
        if not self.usage:
            return None
        return f"Usage: {self.name} {self.usage}"

    def format_help(self) -> str:
        sections = [
            f"Command: {self.name}",
            f"Category: {self.category}",
            "",
            "Description:",
            self.description,
            "",
        ]
        if usage := self.format_usage():
            sections.extend([usage, ""])
        if self.help_text and self.help_text != self.description:
            sections.extend(["Help:", self.help_text])
        return "\n".join(sections)

    @abstractmethod
    async def execute(
        self, ctx: CommandContext[Any], args: list[str], kwargs: dict[str, str]
    ) -> Any:
        """Execute the command with parsed arguments."""
        ...


def extract_usage_params(func: Callable[..., Any], *, skip_first: bool = False) -> list[str]:
    """Extract usage parameters from a function's signature.

    Args:
        func: The function to extract usage from
        skip_first: If True, skip the first parameter (for methods with 'self')
    """
    params = list(inspect.signature(func).parameters.items())
    if skip_first and params:
        params = params[1:]
    if params and _is_context_param(params[0][0], func):
        params = params[1:]

    shorthands = {v: k for k, v in _get_shorthand_map(func).items()}
    usage_params = []
    for name, param in params:
        flag = f"--{name}" + (f"/-{shorthands[name]}" if name in shorthands else "")
        if param.default == inspect.Parameter.empty:
            usage_params.append(f"{flag} <{name}>")
        else:
            usage_params.append(f"[{flag} <value>]")
    return usage_params


def parse_int_list(value: str) -> list[int]:
    """Parse ``"1,2,5-8"`` into ``[1, 2, 5, 6, 7, 8]``; an empty string gives ``[]``.

    Raises:
        ValueError: For malformed items or descending ranges
    """
    result: list[int] = []
    for raw in value.split(","):
        item = raw.strip()
        if not item:
            continue
        start, sep, end = item.partition("-")
        if not sep:
            result.append(int(item))
            continue
        low, high = int(start), int(end)
        if high < low:
            msg = f"descending range {item!r}"
            raise ValueError(msg)
        result.extend(range(low, high + 1))
    return result


def _unwrap(annotation: Any) -> Any:
    """Strip Annotated and Optional wrappers."""
    if get_origin(annotation) is Annotated:
        annotation = get_args(annotation)[0]
    origin = get_origin(annotation)
    if origin is not None and origin not in (list, Literal):
        non_none = [t for t in get_args(annotation) if t is not type(None)]
        if non_none:
            annotation = non_none[0]
    return annotation


def _coerce_value(value: str, annotation: Any, param_name: str) -> Any:
    """Coerce a string value to its annotated type.

    Raises:
        CommandError: If conversion fails
    """
    if annotation is inspect.Parameter.empty or not isinstance(value, str):
        return value
    annotation = _unwrap(annotation)
    origin = get_origin(annotation)
    try:
        if origin is Literal:
            choices = get_args(annotation)
            if value not in choices:
                msg = f"expected one of {list(choices)}"
                raise ValueError(msg)  # noqa: TRY301
            return value
        if origin is list:
            (item_type,) = get_args(annotation) or (str,)
            if item_type is int:
                return parse_int_list(value)
            return [v.strip() for v in value.split(",") if v.strip()]
        if annotation is int:
            return int(value)
        if annotation is float:
            return float(value)
        if annotation is bool:
            flag = value.lower()
            if flag not in TRUE_VALUES + FALSE_VALUES:
                msg = f"expected one of {list(TRUE_VALUES + FALSE_VALUES)}"
                raise ValueError(msg)  # noqa: TRY301
            return flag in TRUE_VALUES
    except (ValueError, TypeError) as e:
        ann_name = getattr(annotation, "__name__", str(annotation))
        msg = f"Cannot convert '{value}' to {ann_name} for parameter '{param_name}': {e}"
        raise CommandError(msg) from e
    return value


def _get_resolved_hints(func: Callable[..., Any]) -> dict[str, Any]:
    try:
        return get_type_hints(func, include_extras=True)
    except (TypeError, NameError):
        # unresolvable forward references: no coercion, no shorthands
        return {}


def _get_shorthand_map(func: Callable[..., Any]) -> dict[str, str]:
    """Extract shorthand -> full_name mapping from Annotated hints."""
    mapping: dict[str, str] = {}
    for param_name, hint in _get_resolved_hints(func).items():
        if get_origin(hint) is Annotated:
            for arg in get_args(hint)[1:]:
                if isinstance(arg, Short):
                    mapping[arg.char] = param_name
                    break
    return mapping


def _expand_shorthand_kwargs(
    kwargs: dict[str, str],
    shorthand_map: dict[str, str],
) -> dict[str, str]:
    """Expand shorthand keys in kwargs to full parameter names.

    Raises:
        CommandError: If shorthand and full name both provided
    """
    expanded: dict[str, str] = {}
    for key, value in kwargs.items():
        if len(key) == 1 and key in shorthand_map:
            full_name = shorthand_map[key]
            if full_name in kwargs:
                msg = f"Argument '{full_name}' provided both as '-{key}' and '--{full_name}'"
                raise CommandError(msg)
            expanded[full_name] = value
        else:
            expanded[key] = value
    return expanded


def parse_args(
    func: Callable[..., Any],
    ctx: CommandContext[Any],
    args: list[str],
    kwargs: dict[str, str],
    *,
    skip_first: bool = False,
) -> tuple[list[Any], dict[str, Any]]:
    """Bind command-line values to a function signature with type coercion.

    Args:
        func: The function to parse arguments for
        ctx: The command context, passed first if the function takes one
        args: Positional arguments from the command line
        kwargs: Keyword arguments from the command line
        skip_first: If True, skip the first parameter (for methods with 'self')

    Returns:
        Tuple of (positional_args, keyword_args) coerced to the annotated types

    Raises:
        CommandError: For unknown, missing, duplicated or unconvertible arguments
    """
    type_hints = _get_resolved_hints(func)
    kwargs = _expand_shorthand_kwargs(kwargs, _get_shorthand_map(func))

    params_list = list(inspect.signature(func).parameters.items())
    if skip_first and params_list:
        params_list = params_list[1:]
    call_args: list[Any] = []
    if params_list and _is_context_param(params_list[0][0], func):
        params_list = params_list[1:]
        call_args.append(ctx)

    positional = [
        (name, p)
        for name, p in params_list
        if p.kind in (inspect.Parameter.POSITIONAL_ONLY, inspect.Parameter.POSITIONAL_OR_KEYWORD)
    ]
    known = {name for name, p in params_list if p.kind != inspect.Parameter.VAR_KEYWORD}
    if len(args) > len(positional):
        names = [name for name, _ in positional]
        msg = (
            f"Too many positional arguments. Expected at most {len(positional)} "
            f"({names}), got {len(args)}"
        )
        raise CommandError(msg)

    bound_positional = {name for name, _ in positional[: len(args)]}
    if conflicts := bound_positional & set(kwargs):
        msg = f"Arguments provided both positionally and as keywords: {sorted(conflicts)}"
        raise CommandError(msg)
    for name in kwargs:
        if name not in known:
            msg = f"Unknown argument: {name}"
            raise CommandError(msg)
    missing = [
        name
        for name, p in params_list
        if p.default == inspect.Parameter.empty
        and p.kind not in (inspect.Parameter.VAR_POSITIONAL, inspect.Parameter.VAR_KEYWORD)
        and name not in kwargs
        and name not in bound_positional
    ]
    if missing:
        msg = f"Missing required arguments: {missing}"
        raise CommandError(msg)

    for (name, _), value in zip(positional, args):
        annotation = type_hints.get(name, inspect.Parameter.empty)
        call_args.append(_coerce_value(value, annotation, name))
    coerced_kwargs = {
        name: _coerce_value(value, type_hints.get(name, inspect.Parameter.empty), name)
        for name, value in kwargs.items()
    }
    return call_args, coerced_kwargs


def _is_context_param(param_name: str, func: Callable[..., Any] | None = None) -> bool:
    """Determine if a parameter is a context parameter (by hint, else by name)."""
    if func is not None:
        try:
            if param_name in (hints := get_type_hints(func)):
                origin = getattr(hints[param_name], "__origin__", hints[param_name])
                if origin is CommandContext or (
                    isinstance(origin, type) and issubclass(origin, CommandContext)
                ):
                    return True
        except (TypeError, AttributeError, NameError):
            pass
    return param_name in ("ctx", "context")


def parse_command(cmd: str | Sequence[str]) -> ParsedCommand:
    """Parse a command line into name and arguments.

    Args:
        cmd: Command string (shell-split) or an already split argv list

    Raises:
        CommandError: If command syntax is invalid
    """
    if isinstance(cmd, str):
        try:
            parts = shlex.split(cmd)
        except ValueError as e:
            msg = f"Invalid command syntax: {e}"
            raise CommandError(msg) from e
    else:
        parts = list(cmd)

    if not parts:
        msg = "Empty command"
        raise CommandError(msg)

    name = parts[0]
    args: list[str] = []
    kwargs: dict[str, str] = {}
    i = 1
    while i < len(parts):
        part = parts[i]
        if part == "--help":
            kwargs["help"] = "true"
            i += 1
        elif part.startswith("--"):
            key, eq, inline = part[2:].partition("=")
            if eq:
                kwargs[key] = inline
                i += 1
            elif i + 1 < len(parts):
                kwargs[key] = parts[i + 1]
                i += 2
            else:
                msg = f"Missing value for argument: {part}"
                raise CommandError(msg)
        elif part.startswith("-") and len(part) == 2 and part[1].isalpha():  # noqa: PLR2004
            if i + 1 < len(parts):
                kwargs[part[1:]] = parts[i + 1]
                i += 2
            else:
                msg = f"Missing value for argument: {part}"
                raise CommandError(msg)
        else:
            args.append(part)
            i += 1
    return ParsedCommand(name=name, args=ParsedCommandArgs(args=args, kwargs=kwargs))
