"""Mask merging, boundary cropping, and intensity normalization."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from .types import BACKGROUND, AugmentationConfig, LabelMap, Volume

# Below this, a volume is treated as constant and normalizes to zeros.
STD_GUARD = 1e-8


def merge_masks(masks: list[np.ndarray], class_names: list[str]) -> LabelMap:
    """Merge per-organ binary masks into one multi-class label map.

    Voxel label = 1-based index of the last listed mask set at that voxel
    (later organs override earlier ones on overlap), 0 where no mask is set.
    """
    if len(masks) != len(class_names):
        raise ShapeMismatch(
            f"got {len(masks)} masks for {len(class_names)} class names"
        )
    if not masks:
        raise ShapeMismatch("need at least one mask")
    shape = np.asarray(masks[0]).shape
    labels = np.zeros(shape, dtype=np.int16)
    for idx, mask in enumerate(masks):
        mask = np.asarray(mask)
        if mask.shape != shape:
            raise ShapeMismatch(f"mask {idx} has shape {mask.shape}, expected {shape}")
        vals = np.unique(mask)
        if not np.isin(vals, (0, 1)).all():
            raise ValueError(f"mask {idx} is not binary (values {vals[:8]})")
        labels[mask == 1] = idx + 1
    return LabelMap(labels=labels, class_names=[BACKGROUND] + list(class_names))


def foreground_bounding_box(labels: np.ndarray) -> tuple[tuple[int, int], ...] | None:
    """Inclusive (lo, hi) per axis of the nonzero region, or None if empty."""
    nz = np.nonzero(labels)
    if nz[0].size == 0:
        return None
    return tuple((int(ax.min()), int(ax.max())) for ax in nz)


def _crop_slices(labels: np.ndarray, margin: int, min_extent: int) -> tuple[slice, ...]:
    shape = labels.shape
    bbox = foreground_bounding_box(labels)
    if bbox is None:
        # Fully-background volume: keep a centered block of the minimum extent.
        slices = []
        for dim in shape:
            keep = min(min_extent, dim)
            lo = (dim - keep) // 2
            slices.append(slice(lo, lo + keep))
        return tuple(slices)
    slices = []
    for (lo, hi), dim in zip(bbox, shape):
        lo = max(0, lo - margin)
        hi = min(dim - 1, hi + margin)
        slices.append(slice(lo, hi + 1))
    return tuple(slices)


def normalize_intensity(voxels: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance standardization with a constant-volume guard.

    Statistics accumulate in float64 so large volumes stay within tolerance;
    the result is float32.
    """
    voxels = voxels.astype(np.float32)
    std = float(voxels.std(dtype=np.float64))
    if std < STD_GUARD:
        return np.zeros_like(voxels)
    mean = float(voxels.mean(dtype=np.float64))
    return ((voxels - mean) / std).astype(np.float32)


def preprocess(
    volume: Volume, labels: LabelMap, cfg: AugmentationConfig
) -> tuple[Volume, LabelMap]:
    """Crop all-background border slabs (keeping cfg.crop_margin) and standardize.

    Labels are only cropped; spacing is preserved. A fully-background volume
    crops to a centered block of cfg.min_crop_extent per axis.
    """
    if volume.shape != labels.shape:
        raise ShapeMismatch(
            f"volume {volume.shape} vs labels {labels.shape}", patient=volume.patient_id
        )
    sl = _crop_slices(labels.labels, cfg.crop_margin, cfg.min_crop_extent)
    vox = volume.voxels[sl]
    if cfg.normalization == "zscore":
        vox = normalize_intensity(vox)
    else:
        vox = vox.astype(np.float32)
    out_volume = Volume(voxels=vox, spacing=volume.spacing, patient_id=volume.patient_id)
    out_labels = LabelMap(labels=labels.labels[sl].copy(), class_names=labels.class_names)
    return out_volume, out_labels
