"""Shared exception types for the fplab package."""

from __future__ import annotations

import numpy as np


class NumericError(RuntimeError):
    """An algorithm left its domain of numerical validity (instability, lost mass,
    positivity-floor violation).  Carries enough context to diagnose the run."""


class ConfigError(ValueError):
    """A configuration file or CLI argument set is structurally invalid."""


class DegenerateSpectrumError(NumericError):
    """The leading eigenvalue is not simple (or the leading eigenvector is not
    strictly positive) because the kernel support is reducible; the caller asked
    for a quantity that is only well defined in the irreducible case."""


class PowerIterationError(NumericError):
    """Power iteration failed to converge within its iteration cap.

    The last Rayleigh estimate and iterate are attached so callers can inspect
    how close the solve got.
    """

    def __init__(self, message: str, estimate: float, vector: np.ndarray, iterations: int):
        super().__init__(message)
        self.estimate = estimate
        self.vector = vector
        self.iterations = iterations


class NearCriticalWarning(UserWarning):
    """The spectral radius is within 1e-10 of 1: a nominally finite quantity was
    reported as infinite because the resolvent is numerically singular."""
