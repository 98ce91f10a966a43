"""Transition graphs, loop-class L^q spectra and the multifractal formalism
for self-similar measures satisfying the finite neighbour condition."""

from .config import AnalysisConfig, example, parse_config
from .errors import MfError
from .exact import AlgebraicReal, NumberField, field_make, rational_field
from .graph import TransitionGraph, build_graph, make_path
from .ifs import WIFS, Similarity, normalize_hull
from .loops import analyse_classes, loop_classes
from .netintervals import IterationRule, NeighbourSet, subdivide
from .spectra import formalism_verdict, loop_lq_spectrum

__version__ = "0.1.0"
