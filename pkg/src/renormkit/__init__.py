"""Configuration-space BPHZ renormalization with forest sums and integrability probes."""

from __future__ import annotations

__version__ = "0.1.0"

from .forestry import (
    ActiveFamily,
    Forest,
    base,
    default_active_family,
    enumerate_forests,
    equivalence_classes,
    renormalization_parts,
    saturate,
    special_sets,
)
from .graph import Configuration, Graph, IntegrationSet, Subgraph, parse_graph
from .jet import Jet, jet_space
from .taylor import (
    RenormalizedEvaluator,
    SubtractionScheme,
    forest_term,
    line_complement,
    r_evaluate,
    r_evaluate_reordered,
    subtraction_point,
)
from .weights import EdgeKernel, VertexCoupling, WeightModel, eval_weight, jet_eval, parse_weight_model

__all__ = [
    "ActiveFamily",
    "Configuration",
    "EdgeKernel",
    "Forest",
    "Graph",
    "IntegrationSet",
    "Jet",
    "RenormalizedEvaluator",
    "Subgraph",
    "SubtractionScheme",
    "VertexCoupling",
    "WeightModel",
    "base",
    "default_active_family",
    "enumerate_forests",
    "equivalence_classes",
    "eval_weight",
    "forest_term",
    "jet_eval",
    "jet_space",
    "line_complement",
    "parse_graph",
    "parse_weight_model",
    "r_evaluate",
    "r_evaluate_reordered",
    "renormalization_parts",
    "saturate",
    "special_sets",
    "subtraction_point",
]
