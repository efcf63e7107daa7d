"""Indefinite affine spheres, their Tzitzeica transforms and loop-group dressing."""
from .errors import TzlabError
from .grids import Grid
from .immersion import ImmersionGrid
from .loopalgebra import ProjLine
from .rational_elements import Kind, LoopProduct, SimpleElement
from .report import VerificationReport

__version__ = "0.1.0"

__all__ = ["Grid", "ImmersionGrid", "Kind", "LoopProduct", "ProjLine", "SimpleElement",
           "TzlabError", "VerificationReport", "__version__"]
