from __future__ import annotations

import logging

from rich.logging import RichHandler


def get_logger(name: str) -> logging.Logger:
    """Get a logger for the given name.

    Args:
        name: The name of the logger, will be prefixed with 'banditfield.'

    Returns:
        A logger instance
    """
    return logging.getLogger(f"banditfield.{name}")


def configure_logging(level: int | str = logging.WARNING) -> None:
    """Route package logs to the terminal through rich.

    Calling it again only changes the level.

    Args:
        level: Threshold for the ``banditfield`` logger hierarchy
    """
    root = logging.getLogger("banditfield")
    root.setLevel(level)
    if any(isinstance(h, RichHandler) for h in root.handlers):
        return
    handler = RichHandler(show_path=False, rich_tracebacks=True)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)
