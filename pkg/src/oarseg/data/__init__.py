from .augment import augment, derive_seed
from .io import list_patients, load_dataset, load_patient, save_patient
from .patches import pad_to_shape, sample_patch
from .preprocess import merge_masks, normalize_intensity, preprocess
from .splits import load_split_manifest, save_split_manifest, split_patients
from .synthetic import make_synthetic_dataset, synthetic_spec
from .types import (
    BACKGROUND,
    DATASET_CLASSES,
    AugmentationConfig,
    DatasetSpec,
    LabelMap,
    SplitAssignment,
    Volume,
)

__all__ = [
    "BACKGROUND",
    "DATASET_CLASSES",
    "AugmentationConfig",
    "DatasetSpec",
    "LabelMap",
    "SplitAssignment",
    "Volume",
    "augment",
    "derive_seed",
    "list_patients",
    "load_dataset",
    "load_patient",
    "load_split_manifest",
    "make_synthetic_dataset",
    "merge_masks",
    "normalize_intensity",
    "pad_to_shape",
    "preprocess",
    "sample_patch",
    "save_patient",
    "save_split_manifest",
    "split_patients",
    "synthetic_spec",
]
