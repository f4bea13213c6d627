"""Numerical experiments on decay of correlations for continuous observables.

Subpackages and modules: :mod:`systems` (maps), :mod:`observables`,
:mod:`tower` (Young towers), :mod:`correlation` (estimators and oracles),
:mod:`rates` (predicted and fitted decay laws) and :mod:`cli`.
"""
__version__ = "0.1.0"

from .errors import ConstructionError, InsufficientDataError, UnsupportedCaseError, UsageError

__all__ = ["ConstructionError", "InsufficientDataError", "UnsupportedCaseError", "UsageError", "__version__"]
