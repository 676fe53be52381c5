"""Multi-rater optic disc/cup label fusion guided by a frozen diagnosis network."""

from ._core import (
    DataError,
    DiagNet,
    NumericError,
    Sample,
    ShapeError,
    auc,
    degrade_mask,
    dice,
    fuse,
    hf_energy_ratio,
    iou,
    majority_vote,
    normalize_expertness,
    optimize_diagfirst,
    random_fuse,
    read_split,
    run_cli,
    staple,
    synth_sample,
    vcdr_score,
)

__all__ = [
    "DataError",
    "DiagNet",
    "NumericError",
    "Sample",
    "ShapeError",
    "auc",
    "degrade_mask",
    "dice",
    "fuse",
    "hf_energy_ratio",
    "iou",
    "majority_vote",
    "normalize_expertness",
    "optimize_diagfirst",
    "random_fuse",
    "read_split",
    "run_cli",
    "staple",
    "synth_sample",
    "vcdr_score",
]
