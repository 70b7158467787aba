"""Likelihood-adjusted SDP clustering for heterogeneous Gaussian mixtures.

Cluster labels are 0-based throughout the Python API; the CLI's file formats
are 1-based. Data matrices are ``(p, n)`` with samples in columns.
"""

from .baselines import em_gmm, hierarchical, kmeans, mem, perturb_labels, spectral_clustering
from .enhance import ftest_screen, lda_reduce, sketch_and_lift
from .errors import (
    ConfigError,
    CovarianceSingularityError,
    DegeneratePartitionError,
    EmptySoftClusterError,
    LaclustError,
    NotRankOneError,
    NumericFailureError,
    ValidationError,
)
from .generators import GeneratorSpec, family_params, generate, landsat_transform
from .likelihood import (
    GmmParams,
    SimilarityMatrix,
    covariance_update,
    observed_loglik,
    profile_loglik,
    psd_floor,
    similarity_matrix,
    similarity_stack,
    soft_decomposition,
)
from .metrics import SeparationDiagnostics, misclustering_error, separation_diagnostics
from .model import (
    AssignmentMatrix,
    Dataset,
    FeasibilityResiduals,
    LiftedMembership,
    Partition,
    feasibility_residuals,
    key_identity_check,
    lift,
    single_lift,
)
from .pipeline import IlasdpConfig, IlasdpTrace, ilasdp, init_cov_from_partition, oracle_lasdp
from .rounding import blockmass_round, spectral_round
from .sdp import (
    BmFactor,
    SdpProblem,
    SolveReport,
    SolverOptions,
    solve_kmeans_sdp,
    solve_lasdp_admm,
    solve_lasdp_bm,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentMatrix",
    "BmFactor",
    "ConfigError",
    "CovarianceSingularityError",
    "Dataset",
    "DegeneratePartitionError",
    "EmptySoftClusterError",
    "FeasibilityResiduals",
    "GeneratorSpec",
    "GmmParams",
    "IlasdpConfig",
    "IlasdpTrace",
    "LaclustError",
    "LiftedMembership",
    "NotRankOneError",
    "NumericFailureError",
    "Partition",
    "SdpProblem",
    "SeparationDiagnostics",
    "SimilarityMatrix",
    "SolveReport",
    "SolverOptions",
    "ValidationError",
    "blockmass_round",
    "covariance_update",
    "em_gmm",
    "family_params",
    "feasibility_residuals",
    "ftest_screen",
    "generate",
    "hierarchical",
    "ilasdp",
    "init_cov_from_partition",
    "key_identity_check",
    "kmeans",
    "landsat_transform",
    "lda_reduce",
    "lift",
    "mem",
    "misclustering_error",
    "observed_loglik",
    "oracle_lasdp",
    "perturb_labels",
    "profile_loglik",
    "psd_floor",
    "separation_diagnostics",
    "similarity_matrix",
    "similarity_stack",
    "single_lift",
    "sketch_and_lift",
    "soft_decomposition",
    "solve_kmeans_sdp",
    "solve_lasdp_admm",
    "solve_lasdp_bm",
    "spectral_clustering",
    "spectral_round",
]
