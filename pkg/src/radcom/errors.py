"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class CodesignError(Exception):
    """Base class for all errors raised by this package."""


class ScenarioError(CodesignError, ValueError):
    """A scenario failed validation (bad shapes, signs, or indices)."""


class DefinitenessError(CodesignError, np.linalg.LinAlgError):
    """A matrix required to be (semi)definite is not, beyond round-off."""


class InfeasibleError(CodesignError):
    """The requested SDR thresholds cannot be met.

    ``cell`` identifies the offending range/beam cell when one is known.
    """

    def __init__(self, message: str, cell: tuple[int, int] | None = None):
        super().__init__(message)
        self.cell = cell


class PowerBudgetError(InfeasibleError):
    """Meeting the SDR thresholds would need more radar power than available."""
