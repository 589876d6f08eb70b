"""Synthetic phantom dataset used by the smoke-test pipeline.

Each generated patient holds three structures on a noisy background, sized
to echo the organ mix of the clinical datasets: a large ellipsoid (lung
analogue), a thin tube running through the depth axis (spinal-cord
analogue), and a small low-contrast sphere (chiasm analogue, deliberately
the hardest class).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .io import save_patient
from .types import DatasetSpec

SYNTHETIC_CLASSES = ["lung", "spinal_cord", "chiasm"]

# mean intensity added inside each structure (background is 0 + noise);
# the sphere is well separated in intensity so its difficulty comes from
# its size alone
ELLIPSOID_INTENSITY = 1.0
TUBE_INTENSITY = 2.0
SPHERE_INTENSITY = 3.0
NOISE_STD = 0.12


def synthetic_spec() -> DatasetSpec:
    return DatasetSpec(name="synthetic", class_names=list(SYNTHETIC_CLASSES))


def _grid(shape):
    return np.meshgrid(*[np.arange(n, dtype=np.float64) for n in shape], indexing="ij")


def _ellipsoid(shape, center, semi_axes) -> np.ndarray:
    zz, yy, xx = _grid(shape)
    d = (
        ((zz - center[0]) / semi_axes[0]) ** 2
        + ((yy - center[1]) / semi_axes[1]) ** 2
        + ((xx - center[2]) / semi_axes[2]) ** 2
    )
    return (d <= 1.0).astype(np.uint8)


def _tube(shape, center_yx, radius) -> np.ndarray:
    _, yy, xx = _grid(shape)
    d = (yy - center_yx[0]) ** 2 + (xx - center_yx[1]) ** 2
    return (d <= radius**2).astype(np.uint8)


def make_phantom(
    shape: tuple[int, int, int], rng: np.random.Generator
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """One phantom volume plus its per-organ binary masks."""
    nz, ny, nx = shape

    lung_center = (
        nz / 2 + rng.uniform(-2, 2),
        ny * 0.32 + rng.uniform(-2, 2),
        nx * 0.35 + rng.uniform(-2, 2),
    )
    lung_axes = (
        nz * 0.28 + rng.uniform(-1, 1),
        ny * 0.22 + rng.uniform(-1, 1),
        nx * 0.22 + rng.uniform(-1, 1),
    )
    lung = _ellipsoid(shape, lung_center, lung_axes)

    cord_center = (ny * 0.75 + rng.uniform(-2, 2), nx * 0.5 + rng.uniform(-2, 2))
    cord = _tube(shape, cord_center, radius=1.8 + rng.uniform(-0.3, 0.3))

    sphere_center = (
        nz * 0.5 + rng.uniform(-4, 4),
        ny * 0.35 + rng.uniform(-2, 2),
        nx * 0.75 + rng.uniform(-2, 2),
    )
    r = 2.2 + rng.uniform(-0.4, 0.4)
    sphere = _ellipsoid(shape, sphere_center, (r, r, r))

    voxels = np.zeros(shape, dtype=np.float32)
    voxels += lung * ELLIPSOID_INTENSITY
    voxels = np.where(cord > 0, TUBE_INTENSITY, voxels)
    voxels = np.where(sphere > 0, SPHERE_INTENSITY, voxels)
    bias = gaussian_filter(rng.normal(0.0, 1.0, size=shape), sigma=8.0)
    peak = np.abs(bias).max()
    if peak > 0:
        bias *= 0.15 / peak
    voxels = voxels + bias + rng.normal(0.0, NOISE_STD, size=shape)

    masks = {"lung": lung, "spinal_cord": cord, "chiasm": sphere}
    return voxels.astype(np.float32), masks


def make_synthetic_dataset(
    root: str | Path,
    n_patients: int = 8,
    shape: tuple[int, int, int] = (32, 32, 32),
    seed: int = 0,
    spacing: tuple[float, float, float] = (1.5, 1.0, 1.0),
) -> DatasetSpec:
    """Write n_patients phantom directories under root in the ingestion layout."""
    rng = np.random.default_rng(seed)
    for i in range(n_patients):
        voxels, masks = make_phantom(shape, rng)
        save_patient(root, f"case_{i:03d}", voxels, masks, spacing=spacing)
    return synthetic_spec()
