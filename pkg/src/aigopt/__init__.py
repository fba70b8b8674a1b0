"""Search- and learning-guided synthesis recipe optimization for AIGs."""

from .aig import (
    Aig,
    AigBuilder,
    AigStats,
    AigerError,
    Equivalence,
    SequentialCircuitError,
    equivalent,
    node_features,
    parse_aiger,
    simulate,
    stats,
    write_aiger,
)
from .transforms import Action, Recipe, apply, apply_recipe

__all__ = [
    "Aig",
    "AigBuilder",
    "AigStats",
    "AigerError",
    "Equivalence",
    "SequentialCircuitError",
    "Action",
    "Recipe",
    "apply",
    "apply_recipe",
    "equivalent",
    "node_features",
    "parse_aiger",
    "simulate",
    "stats",
    "write_aiger",
]
