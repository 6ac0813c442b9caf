"""trsparse: spectral graph sparsification by trace reduction.

Extracts ultra-sparse, spectrally similar subgraphs from weighted undirected
graphs and uses them as PCG preconditioners for SDD systems, power-grid
transient simulation, and Fiedler-vector partitioning.
"""

from .cholesky import (ApproxInverse, CholeskyFactor, FactorizationError,
                       approx_column_dot, approx_inverse, factorize, solve)
from .graph import (DEFAULT_GAMMA, AdjacencyView, GammaPolicy, Graph,
                    GraphError, IndicatorDiff, LoadedGraph, MatrixMarketError,
                    RegularizedLaplacian, build_laplacian, generate, grid2d,
                    laplacian_from_edges, load_matrix_market, random_geometric,
                    write_matrix_market, write_remap_csv)
from .partition import FiedlerResult, fiedler, partition_relerr
from .scores import (EdgeScore, OracleSizeError, VoltageMap,
                     approx_truncated_scores, dense_trace,
                     exact_trace_reduction, trace_after_recovery,
                     tree_edge_voltages, tree_truncated_scores)
from .solver import (SolveContext, SolveReport, dense_generalized_eigs,
                     estimate_condition, estimate_trace, pcg_solve)
from .sparsify import (ExclusionMarks, RoundStats, Sparsifier, SparsifyConfig,
                       mark_similar, sparsify)
from .transient import (PiecewiseLinearSource, TransientSystem, Waveform,
                        synthetic_power_grid, transient_simulate)
from .tree import (Neighborhood, SpanningTree, bfs_neighborhood,
                   max_weight_spanning_tree, offline_lca, tree_from_edges,
                   tree_effective_resistance, tree_path_edges)

__version__ = "0.1.0"
