"""Numerical laboratory for operator algebras inside finite-dimensional C*-algebras."""
from .matcore import DEFAULT_TOL, ToleranceConfig
from .fdca import BlockElement, BlockShape, Ideal, StarHomData

__all__ = ["DEFAULT_TOL", "ToleranceConfig", "BlockElement", "BlockShape", "Ideal", "StarHomData"]
__version__ = "0.1.0"
