"""Canonical stochastic dilations of dissipative memristive circuits."""

__version__ = "0.1.0"

from .circuit import PhaseSpaceModel, constant_model, dissipation, drift_field
from .dilation import build_symplectic_dilation, build_wiener_dilation
from .functions import Poly2, ScalarFunction
from .netlist import REFERENCE_NETLIST, compile_text, parse

__all__ = [
    "PhaseSpaceModel", "constant_model", "dissipation", "drift_field",
    "build_wiener_dilation", "build_symplectic_dilation", "Poly2", "ScalarFunction",
    "REFERENCE_NETLIST", "compile_text", "parse",
]
