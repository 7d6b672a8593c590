"""Exception types shared across the package."""

from __future__ import annotations


class DivergenceError(RuntimeError):
    """A recursion produced a non-finite coefficient.

    Carries the first iteration at which it happened.
    """

    def __init__(self, iteration: int):
        super().__init__(f"non-finite coefficients at iteration {iteration}")
        self.iteration = iteration


class ConfigError(ValueError):
    """An experiment configuration failed to parse or validate."""
