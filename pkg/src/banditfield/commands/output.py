"""Output writers for the command layer."""

from __future__ import annotations

import inspect
from typing import TYPE_CHECKING, Any

from rich.console import Console

from banditfield.commands.base import OutputWriter


if TYPE_CHECKING:
    from collections.abc import Awaitable, Callable


class DefaultOutputWriter(OutputWriter):
    """Prints command output through a rich console.

    Output is printed verbatim: paths and numbers in brackets are never read as markup.
    """

    def __init__(self, **console_kwargs: Any) -> None:
        self._console = Console(**console_kwargs)

    async def print(self, message: str) -> None:
        self._console.print(message, markup=False, highlight=False)


class CallbackOutputWriter(OutputWriter):
    """Hands every output line to a sync or async callback.

    Examples:
        ```python
        lines: list[str] = []
        ctx = store.create_context(output_writer=lines.append)
        ```
    """

    def __init__(self, callback: Callable[[str], Any | Awaitable[Any]]) -> None:
        self._callback = callback

    async def print(self, message: str) -> None:
        result = self._callback(message)
        if inspect.isawaitable(result):
            await result
