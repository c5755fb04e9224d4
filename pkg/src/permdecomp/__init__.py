"""Spatial decompositions of wavefunctions: the w functional, refinement trees,
branch trajectories and asymptotic-velocity channels."""

__version__ = "0.1.0"

from .decomposition import (BornMeasure, CoarseningMap, Decomposition, born_measure, is_finer,
                            w_general, w_plus, w_two_spatial)
from .errors import (ConfigError, InvalidInputError, NotFoundError, NumericalError, PSDError,
                     ResolutionError, ResourceLimitError)
from .finite import AtomicSpectralMeasure, MatrixPropagator, StateVector, brute_force_w
from .geometry import ConfigMetric, branch_trajectory, centroid, general_spread, spread
from .measurelab import continuity_surrogate, continuity_partition, weak_convergence_check
from .partition import WReport
from .scattering import (AsymptoticVelocityMeasure, ChannelPartition, convergence_diagnostic,
                         channel_separation_curve)
from .tree import (Branch, SpatialTree, TreeNode, branches, hat_T, tree_to_json, validate_tree,
                   w_plus_tree)
from .wavegrid import (GaussianPacketParams, GridSpec, GridWavefunction, MomentumMeasure,
                       PositionMeasure, SplitStepPropagator, analytic_gaussian_wE,
                       analytic_gaussian_wF, make_gaussian)

__all__ = [
    "AsymptoticVelocityMeasure", "AtomicSpectralMeasure", "BornMeasure", "Branch",
    "ChannelPartition", "CoarseningMap", "ConfigError", "ConfigMetric", "Decomposition",
    "GaussianPacketParams", "GridSpec", "GridWavefunction", "InvalidInputError",
    "MatrixPropagator", "MomentumMeasure", "NotFoundError", "NumericalError", "PSDError",
    "PositionMeasure", "ResolutionError", "ResourceLimitError", "SpatialTree",
    "SplitStepPropagator", "StateVector", "TreeNode", "WReport", "analytic_gaussian_wE",
    "analytic_gaussian_wF", "born_measure", "branch_trajectory", "branches", "brute_force_w",
    "centroid", "continuity_surrogate", "convergence_diagnostic", "continuity_partition",
    "general_spread", "hat_T", "is_finer", "make_gaussian", "spread", "channel_separation_curve",
    "tree_to_json", "validate_tree", "w_general", "w_plus", "w_plus_tree", "w_two_spatial",
    "weak_convergence_check",
]
