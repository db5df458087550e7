"""Command-line entry point."""

from __future__ import annotations

import asyncio
import logging
import sys
from typing import TYPE_CHECKING

from rich.console import Console
from rich.markup import escape

from banditfield.commands import CommandStore
from banditfield.exceptions import CommandError
from banditfield.log import configure_logging


if TYPE_CHECKING:
    from collections.abc import Sequence


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command line, e.g. ``["run", "--config", "game.json"]``.

    Returns:
        0 if the command succeeded and produced all of its artifacts, 1 otherwise
    """
    args = list(sys.argv[1:] if argv is None else argv) or ["help"]
    configure_logging(logging.INFO)
    errors = Console(stderr=True)
    store = CommandStore()
    ctx = store.create_context(None)
    try:
        asyncio.run(store.execute_command(args, ctx))
    except CommandError as e:
        errors.print(f"[red]error:[/red] {escape(str(e))}", highlight=False)
        return 1
    if missing := ctx.missing_artifacts():
        for path in missing:
            errors.print(f"[red]missing artifact:[/red] {escape(str(path))}", highlight=False)
        return 1
    return 0
