"""Dataset directory ingestion.

Layout (one directory per patient):

    <root>/<patient_id>/volume.npy
    <root>/<patient_id>/mask_<organ>.npy      one binary mask per organ
    <root>/<patient_id>/meta.json             {"spacing_mm": [...], "organs": [...]}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import MissingStructure, ShapeMismatch
from .preprocess import merge_masks
from .types import DatasetSpec, LabelMap, Volume

VOLUME_FILE = "volume.npy"
META_FILE = "meta.json"
DEFAULT_SPACING = (1.0, 1.0, 1.0)


def mask_filename(organ: str) -> str:
    return f"mask_{organ}.npy"


def list_patients(root: str | Path) -> list[str]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    return sorted(p.name for p in root.iterdir() if p.is_dir())


def load_patient(root: str | Path, patient_id: str, spec: DatasetSpec) -> tuple[Volume, LabelMap]:
    """Load one patient's volume and merged multi-class label map.

    Raises MissingStructure if the volume or any required organ mask is
    absent, ShapeMismatch if a mask's shape disagrees with the volume.
    """
    pdir = Path(root) / patient_id
    vol_path = pdir / VOLUME_FILE
    if not vol_path.is_file():
        raise MissingStructure(patient_id, "volume")
    voxels = np.load(vol_path).astype(np.float32)

    spacing = DEFAULT_SPACING
    meta_path = pdir / META_FILE
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text())
        spacing = tuple(meta.get("spacing_mm", DEFAULT_SPACING))
    volume = Volume(voxels=voxels, spacing=spacing, patient_id=patient_id)

    masks = []
    for organ in spec.class_names:
        mpath = pdir / mask_filename(organ)
        if not mpath.is_file():
            raise MissingStructure(patient_id, organ)
        mask = np.load(mpath)
        if mask.shape != volume.shape:
            raise ShapeMismatch(
                f"mask {organ!r} shape {mask.shape} != volume shape {volume.shape}",
                patient=patient_id,
            )
        masks.append((mask > 0).astype(np.uint8))

    labels = merge_masks(masks, spec.class_names)
    return volume, labels


def load_dataset(root: str | Path, spec: DatasetSpec) -> list[tuple[Volume, LabelMap]]:
    """Load every patient directory under root; empty root yields an empty list."""
    return [load_patient(root, pid, spec) for pid in list_patients(root)]


def save_patient(
    root: str | Path,
    patient_id: str,
    voxels: np.ndarray,
    organ_masks: dict[str, np.ndarray],
    spacing: tuple[float, float, float] = DEFAULT_SPACING,
) -> Path:
    """Write one patient directory in the ingestion layout (used by tests and
    the synthetic dataset generator)."""
    pdir = Path(root) / patient_id
    pdir.mkdir(parents=True, exist_ok=True)
    np.save(pdir / VOLUME_FILE, np.asarray(voxels, dtype=np.float32))
    for organ, mask in organ_masks.items():
        np.save(pdir / mask_filename(organ), np.asarray(mask, dtype=np.uint8))
    meta = {"spacing_mm": list(spacing), "organs": list(organ_masks)}
    (pdir / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return pdir
