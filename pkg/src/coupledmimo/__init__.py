"""Coupling-aware MIMO channel modelling, estimation and rate evaluation."""

from .errors import CoupledMimoError

__version__ = "0.1.0"

__all__ = ["CoupledMimoError", "__version__"]
