"""Similarity-preserving grid layouts and layout quality metrics."""

from __future__ import annotations

from ._backend import NAME as BACKEND
from .assignment import best_permutation_small, build_cost_matrix, solve_lap
from .constraints import MaskSource, Pin, PinDecl, anisotropic_preset, apply_pins, grid_from_mask, heart_bitmap
from .core import (
    CLAMP,
    TORUS,
    Arrangement,
    Dataset,
    DistanceConfig,
    GridSpec,
    InvalidInputError,
    grid_distance,
    hd_distance,
    make_rng,
    random_arrangement,
    validate,
)
from .filtering import FilterSpec, MapState, box_filter, fill_inactive, weighted_box_filter
from .metrics import (
    TIE_MEAN,
    TIE_SORTED,
    QualityReport,
    UndefinedMetricError,
    arrangement_map,
    cross_correlation,
    distance_curves,
    dpq,
    energy,
    evaluate,
    np_k_curve,
    npq,
)
from .sorters import (
    FlasParams,
    LasParams,
    SomParams,
    SsmParams,
    flas_sort,
    las_sort,
    preset_params,
    random_sort,
    run_algorithm,
    som_sort,
    ssm_sort,
)

__version__ = "0.1.0"
