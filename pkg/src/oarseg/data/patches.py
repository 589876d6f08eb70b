"""Fixed-size 3D patch sampling for training on variable-shape volumes."""

from __future__ import annotations

import numpy as np

FOREGROUND_BIAS = 0.5


def pad_to_shape(arr: np.ndarray, target: tuple[int, int, int], mode="edge") -> np.ndarray:
    pads = [(0, max(0, t - s)) for s, t in zip(arr.shape, target)]
    if any(hi for _, hi in pads):
        arr = np.pad(arr, pads, mode=mode)
    return arr


def sample_patch(
    voxels: np.ndarray,
    labels: np.ndarray,
    patch_size: tuple[int, int, int],
    rng: np.random.Generator,
    fg_prob: float = FOREGROUND_BIAS,
) -> tuple[np.ndarray, np.ndarray]:
    """Random patch of exactly patch_size; with probability fg_prob the crop
    is centered on a random foreground voxel. Volumes smaller than the patch
    are edge-padded first."""
    voxels = pad_to_shape(voxels, patch_size)
    labels = pad_to_shape(labels, patch_size)
    shape = voxels.shape

    draw_fg = rng.random() < fg_prob
    fg = np.argwhere(labels > 0)
    if draw_fg and fg.size:
        center = fg[rng.integers(len(fg))]
        corner = [
            int(np.clip(c - p // 2, 0, s - p)) for c, p, s in zip(center, patch_size, shape)
        ]
    else:
        corner = [int(rng.integers(0, s - p + 1)) for p, s in zip(patch_size, shape)]
    sl = tuple(slice(c, c + p) for c, p in zip(corner, patch_size))
    return voxels[sl], labels[sl]
