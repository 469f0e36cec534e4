"""Contractive Markov systems: graph-directed IFS with place-dependent probabilities."""

__version__ = "0.1.0"

from .graph import DirectedMultigraph, Edge, admissible_words, is_aperiodic, is_irreducible
from .space import Metric, SequencePoint, distance
from .system import EuclideanSystem, MarkovSystem, SequenceSystem, builtin, load_system, validate

__all__ = [
    "DirectedMultigraph", "Edge", "admissible_words", "is_aperiodic", "is_irreducible",
    "Metric", "SequencePoint", "distance",
    "EuclideanSystem", "MarkovSystem", "SequenceSystem", "builtin", "load_system", "validate",
]
