"""Certified multiplicity of positive solutions for coupled perturbed Hammerstein systems."""
from .constants import TheoryConstants, compute_all
from .errors import ConekitError
from .expr import Expression, parse
from .index import check_index0, check_index1, multiplicity
from .problem import ProblemDef, load, loads

__version__ = "0.1.0"

__all__ = [
    "ConekitError", "Expression", "ProblemDef", "TheoryConstants", "__version__",
    "check_index0", "check_index1", "compute_all", "load", "loads", "multiplicity", "parse",
]
