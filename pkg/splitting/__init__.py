"""
Frugal resolvent splitting: matrix-parameterized schemes for finding a zero
of a sum of maximal monotone operators, with a decentralized simulator.
"""

from .errors import (CommunicationError, ConfigError, ConnectivityError, ConstructionError,
                     ContractError, ConvexityError, DocumentError, EdgeListParseError,
                     EmbeddingError, GraphError, MonotonicityError, RegularityError,
                     ShapeError, SplittingError, UnsupportedOperatorError)
from .graph import (Graph, adjacency, complete_graph, cycle_graph, degree_matrix, hypercube_graph,
                    is_connected, is_regular, laplacian, load_edge_list, oriented_incidence,
                    path_graph, petersen_graph)
from .iteration import (StopRule, Trace, TraceStatus, apply_T, check_averaged_inequality,
                        embed_solution, fp_residual, iterate, iterate_reduced, recover_solution,
                        solve_x)
from .operators import (MonotoneOperator, OperatorTuple, affine_op, custom_op, prox_op, saddle_op,
                        scale_op, zero_op)
from .problems import (Problem, affine_consensus, interval_feasibility, lasso_split,
                       quadratic_game)
from .scheme_core import SplittingScheme, ValidationReport, defect, derive_S, load_scheme, validate
from .schemes import douglas_rachford, extended_ryu, minimal_lifting, regular_graph_scheme, ryu3
from .simulator import SimTrace, audit_messages, equivalence_check, simulate

__version__ = "1.0.0"
