"""Exceptions raised by banditfield."""

from __future__ import annotations


class BanditFieldError(Exception):
    """Base exception for all banditfield errors."""


class ConfigError(BanditFieldError, ValueError):
    """A game configuration violates one of its constraints."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class PolicyError(BanditFieldError, ValueError):
    """Invalid input to a playing policy (non-finite state, broken simplex)."""


class RewardError(BanditFieldError, ValueError):
    """Invalid reward input or an under-specified custom reward."""


class TraceError(BanditFieldError):
    """A run trace lacks the data an operation needs."""


class IntegrationError(BanditFieldError, ArithmeticError):
    """The ODE integrator left the state space or produced non-finite values."""


class AnalysisError(BanditFieldError):
    """A theorem check cannot be evaluated for the given inputs."""


class CommandError(BanditFieldError):
    """Base exception for command-related errors."""
