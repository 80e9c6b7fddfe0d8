"""Geometry of covariance matrices under the Bures-Wasserstein metric.

Distances, optimal transport maps, geodesics, tangent-space calculus,
Frechet means, multicouplings, tangent PCA, and generative experiments for
positive semidefinite operators, together with a deterministic CLI.
"""

__version__ = "0.1.0"

from .barycenter import (
    JointCovariance,
    MeanConfig,
    MeanResult,
    fixed_point_residual,
    frechet_functional,
    mean_fixed_point,
    mean_procrustes_averaging,
    multicoupling,
    multicoupling_cost,
    pairwise_alignment,
)
from .bures import (
    AlignmentResult,
    TransportMap,
    gaussian_w2,
    kernel_condition,
    optimal_map,
    procrustes_distance,
    procrustes_distance_squared,
    procrustes_distance_via_alignment,
)
from .errors import (
    BwGeomError,
    DegenerateError,
    DimMismatchError,
    EmptyFamilyError,
    KernelConditionError,
    LeavesConeError,
    MatrixParseError,
    MaxIterExceeded,
    NonFiniteError,
    NotPSDError,
    OutOfRangeError,
)
from .geometry import (
    TangentVector,
    exp_map,
    geodesic,
    log_map,
    tangent_inner,
    tangent_norm,
)
from .simulate import (
    DeformationFamily,
    RngSpec,
    convergence_equivalence,
    counterexample_family,
    deformation_family,
    equivalence_constant,
    fourth_moment_check,
    project,
    projection_error,
    projection_stability_experiment,
    sample_gaussian,
)
from .spectral import (
    Covariance,
    Spectrum,
    SymMatrix,
    sqrt_psd,
    sym_eigen,
    trace_sqrt,
    validate_psd,
)
from .tpca import PcaResult, lift, principal_geodesic, reconstruct, tangent_pca

__all__ = [
    "__version__",
    "AlignmentResult",
    "BwGeomError",
    "Covariance",
    "DeformationFamily",
    "DegenerateError",
    "DimMismatchError",
    "EmptyFamilyError",
    "JointCovariance",
    "KernelConditionError",
    "LeavesConeError",
    "MatrixParseError",
    "MaxIterExceeded",
    "MeanConfig",
    "MeanResult",
    "NonFiniteError",
    "NotPSDError",
    "OutOfRangeError",
    "PcaResult",
    "RngSpec",
    "Spectrum",
    "SymMatrix",
    "TangentVector",
    "TransportMap",
    "convergence_equivalence",
    "counterexample_family",
    "deformation_family",
    "equivalence_constant",
    "exp_map",
    "fixed_point_residual",
    "fourth_moment_check",
    "frechet_functional",
    "gaussian_w2",
    "geodesic",
    "kernel_condition",
    "lift",
    "log_map",
    "mean_fixed_point",
    "mean_procrustes_averaging",
    "multicoupling",
    "multicoupling_cost",
    "optimal_map",
    "pairwise_alignment",
    "principal_geodesic",
    "procrustes_distance",
    "procrustes_distance_squared",
    "procrustes_distance_via_alignment",
    "project",
    "projection_error",
    "projection_stability_experiment",
    "reconstruct",
    "sample_gaussian",
    "sqrt_psd",
    "sym_eigen",
    "tangent_inner",
    "tangent_norm",
    "tangent_pca",
    "trace_sqrt",
    "validate_psd",
]
