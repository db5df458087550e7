"""Markers for experiment command parameters."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Short:
    """One-letter alias of a command option.

    ``config: Annotated[str, Short("c")]`` lets ``run -c game.json`` stand for
    ``run --config game.json``.
    """

    char: str

    def __post_init__(self) -> None:
        if len(self.char) != 1 or not self.char.isalpha():
            msg = f"Option shorthand must be a single letter, got {self.char!r}"
            raise ValueError(msg)
