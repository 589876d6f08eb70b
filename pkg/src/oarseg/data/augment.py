"""Stochastic paired augmentation of a volume and its label map.

The transform chain is contrast adjustment, a single combined spatial warp
(affine composed with an elastic displacement field), then additive Gaussian
noise. Intensity transforms never touch the labels; the spatial warp is
shared, with linear interpolation for intensities and nearest neighbor for
labels. Everything is deterministic given the seed.
"""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from ..errors import ShapeMismatch
from .types import AugmentationConfig, LabelMap, Volume


def _rotation_matrix(angles_rad: np.ndarray) -> np.ndarray:
    ax, ay, az = angles_rad
    rx = np.array([[1, 0, 0], [0, np.cos(ax), -np.sin(ax)], [0, np.sin(ax), np.cos(ax)]])
    ry = np.array([[np.cos(ay), 0, np.sin(ay)], [0, 1, 0], [-np.sin(ay), 0, np.cos(ay)]])
    rz = np.array([[np.cos(az), -np.sin(az), 0], [np.sin(az), np.cos(az), 0], [0, 0, 1]])
    return rz @ ry @ rx


def _sample_params(cfg: AugmentationConfig, rng: np.random.Generator, shape) -> dict:
    # Gates and scalar parameters are drawn unconditionally in a fixed order;
    # only the large field draws are gated.
    params = {
        "do_contrast": rng.random() < cfg.p_contrast,
        "do_affine": rng.random() < cfg.p_affine,
        "do_elastic": rng.random() < cfg.p_elastic,
        "do_noise": rng.random() < cfg.p_noise,
        "gamma": rng.uniform(*cfg.gamma_range),
        "angles": np.deg2rad(rng.uniform(-cfg.rotation_deg, cfg.rotation_deg, size=3)),
        "scale": rng.uniform(*cfg.scale_range),
        "translation": rng.uniform(-cfg.translation_vox, cfg.translation_vox, size=3),
    }
    if params["do_elastic"]:
        disp = np.stack(
            [
                gaussian_filter(rng.uniform(-1.0, 1.0, size=shape), cfg.elastic_sigma)
                for _ in range(3)
            ]
        )
        peak = np.abs(disp).max()
        if peak > 0:
            disp *= cfg.elastic_magnitude / peak
        params["elastic_disp"] = disp
    if params["do_noise"]:
        params["noise"] = rng.normal(0.0, cfg.noise_std, size=shape)
    return params


def _adjust_contrast(voxels: np.ndarray, gamma: float) -> np.ndarray:
    lo, hi = float(voxels.min()), float(voxels.max())
    span = hi - lo
    if span <= 0:
        return voxels.copy()
    scaled = (voxels - lo) / span
    return (scaled**gamma) * span + lo


def augment(
    volume: Volume, labels: LabelMap, cfg: AugmentationConfig, rng_seed: int
) -> tuple[Volume, LabelMap]:
    """Apply the configured random transforms to a (volume, labels) pair.

    Output shape equals input shape. With all probabilities zero the inputs
    are returned unchanged (array copies).
    """
    if volume.shape != labels.shape:
        raise ShapeMismatch(
            f"volume {volume.shape} vs labels {labels.shape}", patient=volume.patient_id
        )
    rng = np.random.default_rng(rng_seed)
    params = _sample_params(cfg, rng, volume.shape)

    vox = volume.voxels.astype(np.float32).copy()
    lab = labels.labels.copy()

    if params["do_contrast"]:
        vox = _adjust_contrast(vox, params["gamma"])

    if params["do_affine"] or params["do_elastic"]:
        shape = vox.shape
        grid = np.stack(
            np.meshgrid(*[np.arange(n, dtype=np.float64) for n in shape], indexing="ij")
        )
        coords = grid.reshape(3, -1)
        if params["do_affine"]:
            center = (np.array(shape, dtype=np.float64) - 1.0) / 2.0
            matrix = _rotation_matrix(params["angles"]) * params["scale"]
            inv = np.linalg.inv(matrix)
            shifted = coords - (center + params["translation"])[:, None]
            coords = inv @ shifted + center[:, None]
        coords = coords.reshape(grid.shape)
        if params["do_elastic"]:
            coords = coords + params["elastic_disp"]
        vox = map_coordinates(vox, coords, order=1, mode="nearest").astype(np.float32)
        lab = map_coordinates(lab, coords, order=0, mode="nearest")

    if params["do_noise"]:
        vox = vox + params["noise"].astype(np.float32)

    out_volume = Volume(voxels=vox, spacing=volume.spacing, patient_id=volume.patient_id)
    out_labels = LabelMap(labels=lab, class_names=labels.class_names)
    return out_volume, out_labels


def derive_seed(global_seed: int, patient_id: str, epoch: int) -> int:
    """Stable per-(patient, epoch) seed for parallel-safe augmentation."""
    digest = hashlib.blake2b(
        f"{global_seed}|{patient_id}|{epoch}".encode(), digest_size=4
    ).digest()
    return int.from_bytes(digest, "big")
