"""Fair, skill-diverse group formation from course marks."""

__version__ = "0.1.0"

from .cohort import (
    AffinitySpec,
    AttributeTable,
    MarkMatrix,
    load_attributes,
    load_marks,
    population_ratio,
    synth_cohort,
    three_affinity_specs,
    write_attributes,
    write_marks,
)
from .fairness import BalanceRecord, balance, count_window, group_ratio
from .graph import GraphParams, WeightedGraph, build_similarity_graph, degree_vector, pearson_corr
from .partition import (
    DistanceMatrix,
    PartitionProblem,
    PartitionSolution,
    brute_force_oracle,
    distance_matrix,
    edge_vector,
    feasibility_check,
    objective_value,
    solve_exact,
    validate_solution,
)
from .spectral import (
    EigenSystem,
    SpectralEmbedding,
    embed,
    embedding_to_rgb,
    laplacian,
    normalized_laplacian,
    symmetric_eigendecomposition,
)
