"""Functional-connectivity classification, architecture search and feature importance."""

from ._fcprobe import (
    FcprobeError,
    Model,
    ModelConfig,
    __version__,
    auroc,
    default_settings,
    estimate_covariance,
    init_model,
    kde_peaks,
    kfold_indices,
    load_model,
    make_cohort,
    pfi,
    reference_mean,
    run,
    spd_logm,
    stratified_split,
    sym_expm,
    tangent_embed,
    train,
    upper_triangle_pairs,
    zscore_rank,
    zscores,
)

__all__ = [
    "FcprobeError",
    "Model",
    "ModelConfig",
    "__version__",
    "auroc",
    "default_settings",
    "estimate_covariance",
    "init_model",
    "kde_peaks",
    "kfold_indices",
    "load_model",
    "make_cohort",
    "pfi",
    "reference_mean",
    "run",
    "spd_logm",
    "stratified_split",
    "sym_expm",
    "tangent_embed",
    "train",
    "upper_triangle_pairs",
    "zscore_rank",
    "zscores",
]
