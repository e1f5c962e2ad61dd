"""Graph language model toolkit: Levi-graph preprocessing, relative-position
plan compilation, and a relative-position-bias encoder.

The heavy lifting lives in the compiled extension; this package re-exports
its surface.
"""

from ._core import (
    EncoderConfig,
    ExtendedLeviGraph,
    GraphOfTriplets,
    ParameterSet,
    PlanVariant,
    PositionPlan,
    Triplet,
    WhitespaceTokenizer,
    bucketize,
    build_global,
    build_joint,
    build_local,
    encode,
    export_weights,
    import_weights,
    init_params,
    mask_subgraph,
    mask_target_relation,
    relation_label_set,
    sequence_encode,
    sequence_plan,
    tokenize_graph,
    verbalize_relation,
)

__all__ = [
    "EncoderConfig",
    "ExtendedLeviGraph",
    "GraphOfTriplets",
    "ParameterSet",
    "PlanVariant",
    "PositionPlan",
    "Triplet",
    "WhitespaceTokenizer",
    "bucketize",
    "build_global",
    "build_joint",
    "build_local",
    "encode",
    "export_weights",
    "import_weights",
    "init_params",
    "mask_subgraph",
    "mask_target_relation",
    "relation_label_set",
    "sequence_encode",
    "sequence_plan",
    "tokenize_graph",
    "verbalize_relation",
]
