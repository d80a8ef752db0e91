"""Clustering data sampled from unions of low-dimensional flats.

The package estimates local best-fit flats at data-driven neighborhood
scales, clusters points by global flat selection (:class:`LBF`), spectral
clustering on local-fit similarities (:class:`SLBF`), or alternating
refitting (:class:`KFlats`), and estimates the number of clusters from
elbow statistics of the within-cluster error curve.
"""

__version__ = "0.1.0"

from .geometry import (
    Flat,
    PointCloud,
    ReduceWhiten,
    TubeMixture,
    as_point_array,
    dist_to_flat,
    fit_flat,
    min_principal_angle,
    nearest_flat,
    reduce_and_whiten,
)
from .kflats import KFlats, farthest_insertion_init, kflats
from .kmeans import kmeans
from .lbf import LBF, energy, generate_candidates, greedy_select, lbf_cluster
from .metrics import match_labels, misclassification_rate
from .model_order import estimate_k, sod_values, wk_curve
from .scale import (
    ScaleParams,
    ScaleProfile,
    beta2,
    estimate_noise_epsilon,
    local_best_fit_flat,
    select_neighborhood,
)
from .slbf import (
    SLBF,
    build_similarity,
    local_flats_all,
    segmentation_error,
    slbf_cluster,
    spectral_embed,
)
from .synth import (
    SynthSpec,
    generate_hybrid,
    random_flats,
    sample_tube_mixture,
    sample_uniform_ball,
    tube_mixture_from_flats,
)
from .theorem import (
    ClaimResult,
    TheoremReport,
    beta2_continuous,
    condition_check,
    verify_theorem,
)
from .utils import parallel_map, resolve_threads

__all__ = [
    "__version__",
    "Flat",
    "PointCloud",
    "ReduceWhiten",
    "TubeMixture",
    "as_point_array",
    "dist_to_flat",
    "fit_flat",
    "min_principal_angle",
    "nearest_flat",
    "reduce_and_whiten",
    "KFlats",
    "farthest_insertion_init",
    "kflats",
    "kmeans",
    "LBF",
    "energy",
    "generate_candidates",
    "greedy_select",
    "lbf_cluster",
    "match_labels",
    "misclassification_rate",
    "estimate_k",
    "sod_values",
    "wk_curve",
    "ScaleParams",
    "ScaleProfile",
    "beta2",
    "estimate_noise_epsilon",
    "local_best_fit_flat",
    "select_neighborhood",
    "SLBF",
    "build_similarity",
    "local_flats_all",
    "segmentation_error",
    "slbf_cluster",
    "spectral_embed",
    "SynthSpec",
    "generate_hybrid",
    "random_flats",
    "sample_tube_mixture",
    "sample_uniform_ball",
    "tube_mixture_from_flats",
    "ClaimResult",
    "TheoremReport",
    "beta2_continuous",
    "condition_check",
    "verify_theorem",
    "parallel_map",
    "resolve_threads",
]
