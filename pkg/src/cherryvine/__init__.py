"""Cherry-tree and cherry-vine copulas: structures, densities, learning."""
from .bicop import BivariateCopula, Family, fit_bicop
from .errors import (CherryVineError, ConvergenceError, DataError, InputFormatError,
                     NumericalError, ParameterError, StructureError)
from .evalm import (DivergenceEstimate, information_criteria, kl_divergence_mc,
                    log_likelihood)
from .graph_core import (CherryTree, JunctionTree, ValidationReport, Violation,
                         build_junction_tree, expand_cherry_tree, validate_hypergraph)
from .learn import (fit_truncated_vine, greedy_cherry_tree,
                    junction_tree_to_cherry_tree, pseudo_observations)
from .vine_model import (CherryVineStructure, JunctionTreeCopulaModel, VineModel,
                         build_cherry_vine, junction_tree_log_density,
                         lift_cherry_tree_copula, log_density, sample,
                         to_cherry_tree_copula, truncate)

__version__ = "0.1.0"
