"""Symmetries, recursion operators and generalized hodograph solutions of
diagonal hydrodynamic-type systems and 1-D gas dynamics."""
from . import exprlang
from .core import (DiagonalSystem, QuasiLinearSystem, JetPoint, ScalarField, epsilon_system,
                   system_from_dict, validate_hyperbolic)
from .exprlang import parse, to_text, differentiate, evaluate

__version__ = "0.1.0"

__all__ = [
    "exprlang", "DiagonalSystem", "QuasiLinearSystem", "JetPoint", "ScalarField",
    "epsilon_system", "system_from_dict", "validate_hyperbolic", "parse", "to_text",
    "differentiate", "evaluate", "__version__",
]
