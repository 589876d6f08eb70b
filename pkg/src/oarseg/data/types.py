"""Core value types of the data pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidConfig, LabelOutOfRange, ShapeMismatch

BACKGROUND = "background"


@dataclass
class Volume:
    """A 3D scalar image with physical voxel spacing in mm."""

    voxels: np.ndarray
    spacing: tuple[float, float, float]
    patient_id: str

    def __post_init__(self):
        self.voxels = np.asarray(self.voxels)
        if self.voxels.ndim != 3:
            raise ShapeMismatch(
                f"volume must have 3 axes, got {self.voxels.ndim}", patient=self.patient_id
            )
        if min(self.voxels.shape) < 1:
            raise ShapeMismatch(
                f"every volume extent must be >= 1, got {self.voxels.shape}",
                patient=self.patient_id,
            )
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise InvalidConfig(f"spacing must be 3 positive values, got {self.spacing}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.voxels.shape


@dataclass
class LabelMap:
    """Integer class labels per voxel; index 0 of class_names is background."""

    labels: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 3:
            raise ShapeMismatch(f"label map must have 3 axes, got {self.labels.ndim}")
        if not np.issubdtype(self.labels.dtype, np.integer):
            raise LabelOutOfRange(f"labels must be integers, got dtype {self.labels.dtype}")
        self.class_names = list(self.class_names)
        if not self.class_names or self.class_names[0] != BACKGROUND:
            raise InvalidConfig("class_names[0] must be 'background'")
        if self.labels.size:
            lo, hi = int(self.labels.min()), int(self.labels.max())
            if lo < 0 or hi >= len(self.class_names):
                raise LabelOutOfRange(
                    f"label values span [{lo}, {hi}] but only "
                    f"{len(self.class_names)} classes are declared"
                )

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape

    @property
    def foreground_names(self) -> list[str]:
        return self.class_names[1:]


# Organ lists of the three supported public datasets, in label-index order.
DATASET_CLASSES = {
    "openkbp": ["brainstem", "spinal_cord", "parotid_r", "parotid_l", "mandible"],
    "pddca": ["brainstem", "chiasm", "optic_nerve_l", "optic_nerve_r", "parotid_l", "parotid_r"],
    "nsclc": ["spinal_cord", "lung_l", "lung_r"],
}

# Row order used when rendering report tables (falls back to class order).
DATASET_TABLE_ORDER = {
    "nsclc": ["lung_r", "lung_l", "spinal_cord"],
    "pddca": ["brainstem", "chiasm", "optic_nerve_l", "optic_nerve_r", "parotid_r", "parotid_l"],
}

PATIENT_DIR_LAYOUT = "patient-dir-v1"


@dataclass
class DatasetSpec:
    """Names the dataset and the ordered foreground organ list it requires."""

    name: str
    class_names: list[str] = field(default_factory=list)
    root_layout: str = PATIENT_DIR_LAYOUT

    def __post_init__(self):
        if not self.class_names:
            if self.name not in DATASET_CLASSES:
                raise InvalidConfig(
                    f"dataset {self.name!r} has no built-in organ list; pass class_names"
                )
            self.class_names = list(DATASET_CLASSES[self.name])
        else:
            self.class_names = list(self.class_names)
        expected = DATASET_CLASSES.get(self.name)
        if expected is not None and self.class_names != expected:
            raise InvalidConfig(
                f"dataset {self.name!r} requires organs {expected}, got {self.class_names}"
            )
        if BACKGROUND in self.class_names:
            raise InvalidConfig("class_names lists foreground organs only")
        if len(set(self.class_names)) != len(self.class_names):
            raise InvalidConfig("duplicate organ names")

    @property
    def all_class_names(self) -> list[str]:
        return [BACKGROUND] + self.class_names

    @property
    def num_classes(self) -> int:
        """Foreground organs + background."""
        return len(self.class_names) + 1

    def table_order(self) -> list[str]:
        return list(DATASET_TABLE_ORDER.get(self.name, self.class_names))


@dataclass
class SplitAssignment:
    train_ids: list[str]
    val_ids: list[str]
    test_ids: list[str]
    ratios: tuple[float, float, float]
    seed: int

    def __post_init__(self):
        groups = [set(self.train_ids), set(self.val_ids), set(self.test_ids)]
        total = sum(len(g) for g in groups)
        if total != len(set().union(*groups)):
            raise InvalidConfig("split groups overlap")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train_ids), len(self.val_ids), len(self.test_ids))

    def ids_for(self, split: str) -> list[str]:
        try:
            return {"train": self.train_ids, "val": self.val_ids, "test": self.test_ids}[split]
        except KeyError:
            raise InvalidConfig(f"unknown split {split!r}") from None


@dataclass
class AugmentationConfig:
    """Preprocessing and stochastic augmentation parameters.

    Spatial and intensity defaults are mild; every random transform fires
    independently with its own probability.
    """

    crop_margin: int = 4
    min_crop_extent: int = 16
    normalization: str = "zscore"  # or "none"
    gamma_range: tuple[float, float] = (0.8, 1.25)
    rotation_deg: float = 10.0
    scale_range: tuple[float, float] = (0.9, 1.1)
    translation_vox: float = 5.0
    elastic_sigma: float = 8.0
    elastic_magnitude: float = 2.0
    noise_std: float = 0.05
    p_contrast: float = 0.3
    p_affine: float = 0.3
    p_elastic: float = 0.3
    p_noise: float = 0.3

    def __post_init__(self):
        for name in ("p_contrast", "p_affine", "p_elastic", "p_noise"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1], got {p}")
        for name in ("gamma_range", "scale_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidConfig(f"{name} must satisfy lo <= hi, got ({lo}, {hi})")
        if self.gamma_range[0] <= 0:
            raise InvalidConfig("gamma_range must be positive")
        if self.scale_range[0] <= 0:
            raise InvalidConfig("scale_range must be positive")
        if self.crop_margin < 0 or self.min_crop_extent < 1:
            raise InvalidConfig("crop_margin must be >= 0 and min_crop_extent >= 1")
        if self.normalization not in ("zscore", "none"):
            raise InvalidConfig(f"unknown normalization mode {self.normalization!r}")
        if self.elastic_sigma <= 0 or self.elastic_magnitude < 0 or self.noise_std < 0:
            raise InvalidConfig("elastic_sigma must be > 0; magnitudes must be >= 0")

    @classmethod
    def no_op(cls) -> "AugmentationConfig":
        """All random transforms disabled; crop/normalize still apply."""
        return cls(p_contrast=0.0, p_affine=0.0, p_elastic=0.0, p_noise=0.0)
