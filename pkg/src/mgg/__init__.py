"""Boolean-matrix graph rewriting.

Typed simple digraphs as Boolean adjacency matrices, rewrite rules as matrix
tuples, closed-form sequence analysis (coherence, initial digraphs,
composition, independence), matching and derivations with automatic
dangling-edge handling, graph constraints / application conditions, and
Petri-net-style reachability via a generalized state equation.
"""

from .matrix import (
    BoolMatrix,
    BoolVector,
    CompletionPolicy,
    ConflictingIdentification,
    DimensionMismatch,
    NodeId,
    NodeUniverse,
    TypedGraph,
    boolean_product,
    complete_all,
    completion_plan,
    compatibility_witness,
    is_compatible,
    kronecker_product,
    norm1,
    outer_product,
)
from .production import (
    IncompatibleRule,
    MatchNotFound,
    Production,
    WouldDangle,
    apply_to_graph,
    availability_matrix,
    make_production,
    nihilation_matrix,
    split_add_erase,
)
from .sequence import (
    AnalysisReport,
    BudgetExceeded,
    CoherenceReport,
    InitialDigraphSet,
    NotCoherent,
    NotCompatible,
    OverflowOutsideMinusOneZeroOne,
    RuleSequence,
    check_coherence,
    check_sequence_compatibility,
    compose,
    composition_sums,
    delta,
    enumerate_initial_set,
    minimal_initial_digraph,
    nabla,
    negative_initial_digraph,
    sequence_image,
)

__version__ = "0.1.0"
