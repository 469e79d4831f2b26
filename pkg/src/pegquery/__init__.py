"""Threshold subgraph matching over probabilistic entity graphs."""
from .model import (PGD, EntityGraph, Match, PGDError, ComponentTooLarge, Violation,
                    build_entity_graph, match_probability, node_existence_marginal,
                    validate_pgd)
from .worlds import enumerate_possible_worlds, oracle_subgraph_match

__all__ = [
    "PGD", "EntityGraph", "Match", "PGDError", "ComponentTooLarge", "Violation",
    "build_entity_graph", "match_probability", "node_existence_marginal", "validate_pgd",
    "enumerate_possible_worlds", "oracle_subgraph_match",
]
__version__ = "0.1.0"
