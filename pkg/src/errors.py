"""
Exception hierarchy for the necklace breather toolkit.

Library code raises these; only the command-line front end maps them to exit codes.
"""

from __future__ import annotations


class NecklaceError(Exception):
    """Base class for all toolkit errors."""

    pass


class ConfigurationError(NecklaceError):
    """Invalid run parameters or configuration file contents."""

    pass


class InvalidFrequencyError(ConfigurationError):
    """Breather frequency / link length combination violates the gap condition."""

    def __init__(self, message: str, reasons: list[str] | None = None) -> None:
        super().__init__(message)
        self.reasons = reasons or []


class StepSizeError(NecklaceError):
    """Integration step does not fit the segment lengths."""

    pass


class BracketError(NecklaceError):
    """Shooting bracket does not separate the two escape directions."""

    def __init__(self, message: str, signs: tuple[int, int], amplitudes: tuple[float, float]) -> None:
        super().__init__(message)
        self.signs = signs
        self.amplitudes = amplitudes


class NewtonDivergenceError(NecklaceError):
    """Damped Newton iteration stalled at the line-search floor."""

    def __init__(self, message: str, residual: float, iterations: int) -> None:
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SimulationError(NecklaceError):
    """Time stepping refused (CFL) or aborted (non-finite field)."""

    pass
