"""Anisotropic geometric-measure analysis of weighted point clouds.

The package computes, over discrete approximations of Radon measures in
ambient dimension 2-4, the quantitative objects of anisotropic density
analysis: ellipse masses for a point-dependent SPD metric field, density and
doubling defects, multiscale flatness coefficients (centered beta, bilateral
b-beta, smooth L2 beta), local moments with quadratic-residual checks,
blow-up rescalings with an exact dual-Lipschitz measure metric, and a
plane / light-cone / singular-point classifier.
"""

__version__ = "0.1.0"

from .metric_field import (
    SpdMatrix,
    MetricField,
    CompactBounds,
    compact_bounds,
    ellipse_contains,
    nested_radii,
)
from .measure import DiscreteMeasure, load_measure_csv, save_measure_csv
from .density import (
    DensityProfile,
    DoublingDefect,
    density_profile,
    doubling_defect,
    theta_lambda,
    normalize_by_density,
)
from .flatness import (
    Plane,
    KernelSpec,
    FlatnessProfile,
    hausdorff_distance,
    fit_plane_weighted,
    beta_centered,
    bbeta,
    beta2_smooth,
    flatness_comparison_check,
    flatness_profile,
    decay_fit,
)
from .moments import TildeFrame, MomentData, tilde_transform, moments, moment_residuals
from .blowup import (
    RescaledMeasure,
    FlatFunctionalResult,
    rescale,
    fr_distance,
    f_distance,
    flatness_functional,
    tangent_flatness_trajectory,
    uniformity_defect,
    conicality_defect,
)
from .classify import (
    PointClassification,
    KpVerdict,
    kp_classify,
    cone_plane_gap,
    regular_singular_partition,
    beta2_propagation_check,
    singularity_persistence,
)
from .synth import SurfaceSpec, sample, analytic_mass, make_field

__all__ = [
    "SpdMatrix",
    "MetricField",
    "CompactBounds",
    "compact_bounds",
    "ellipse_contains",
    "nested_radii",
    "DiscreteMeasure",
    "load_measure_csv",
    "save_measure_csv",
    "DensityProfile",
    "DoublingDefect",
    "density_profile",
    "doubling_defect",
    "theta_lambda",
    "normalize_by_density",
    "Plane",
    "KernelSpec",
    "FlatnessProfile",
    "hausdorff_distance",
    "fit_plane_weighted",
    "beta_centered",
    "bbeta",
    "beta2_smooth",
    "flatness_comparison_check",
    "flatness_profile",
    "decay_fit",
    "TildeFrame",
    "MomentData",
    "tilde_transform",
    "moments",
    "moment_residuals",
    "RescaledMeasure",
    "FlatFunctionalResult",
    "rescale",
    "fr_distance",
    "f_distance",
    "flatness_functional",
    "tangent_flatness_trajectory",
    "uniformity_defect",
    "conicality_defect",
    "PointClassification",
    "KpVerdict",
    "kp_classify",
    "cone_plane_gap",
    "regular_singular_partition",
    "beta2_propagation_check",
    "singularity_persistence",
    "SurfaceSpec",
    "sample",
    "analytic_mass",
    "make_field",
]
