"""Full-volume prediction: sliding-window tiling for 3D networks, per-slice
stacking for 2D networks, with mean-logit blending on overlaps."""

from __future__ import annotations

import numpy as np
import torch

OVERLAP = 0.5


def _pad_amounts(shape: tuple[int, ...], divisor: int) -> list[tuple[int, int]]:
    return [(0, (-n) % divisor) for n in shape]


def _window_starts(extent: int, size: int, stride: int) -> list[int]:
    if extent <= size:
        return [0]
    starts = list(range(0, extent - size + 1, stride))
    if starts[-1] != extent - size:
        starts.append(extent - size)
    return starts


def _forward_batch(model, arrays: list[np.ndarray]) -> np.ndarray:
    batch = torch.from_numpy(np.stack(arrays)[:, None].astype(np.float32))
    with torch.no_grad():
        logits = model(batch)
    return logits.numpy()


def predict_logits(
    model: torch.nn.Module,
    voxels: np.ndarray,
    patch_size: tuple[int, int, int] | None = None,
    batch_size: int | None = None,
) -> np.ndarray:
    """Class logits of shape (C, *voxels.shape) for one volume."""
    cfg = model.config
    was_training = model.training
    model.eval()
    try:
        if cfg.dim == 3:
            out = _predict_3d(model, voxels, patch_size, batch_size or 1)
        else:
            out = _predict_2d(model, voxels, batch_size or 8)
    finally:
        if was_training:
            model.train()
    return out


def _predict_3d(model, voxels, patch_size, batch_size) -> np.ndarray:
    cfg = model.config
    divisor = cfg.divisor
    orig_shape = voxels.shape
    pads = _pad_amounts(orig_shape, divisor)
    padded = np.pad(voxels, pads, mode="edge")

    if patch_size is None:
        window = padded.shape
    else:
        # clamp to the padded volume and round up to the divisor
        window = tuple(
            min(int(np.ceil(p / divisor)) * divisor, s)
            for p, s in zip(patch_size, padded.shape)
        )
    strides = [max(divisor, int(w * (1 - OVERLAP))) for w in window]
    starts = [
        _window_starts(s, w, st) for s, w, st in zip(padded.shape, window, strides)
    ]

    logit_sum = np.zeros((cfg.num_classes, *padded.shape), dtype=np.float32)
    counts = np.zeros(padded.shape, dtype=np.float32)
    tiles, corners = [], []

    def flush():
        if not tiles:
            return
        logits = _forward_batch(model, tiles)
        for tile_logits, corner in zip(logits, corners):
            sl = tuple(slice(c, c + w) for c, w in zip(corner, window))
            logit_sum[(slice(None), *sl)] += tile_logits
            counts[sl] += 1.0
        tiles.clear()
        corners.clear()

    for z in starts[0]:
        for y in starts[1]:
            for x in starts[2]:
                corner = (z, y, x)
                sl = tuple(slice(c, c + w) for c, w in zip(corner, window))
                tiles.append(padded[sl])
                corners.append(corner)
                if len(tiles) == batch_size:
                    flush()
    flush()

    blended = logit_sum / counts[None]
    crop = tuple(slice(0, n) for n in orig_shape)
    return blended[(slice(None), *crop)]


def _predict_2d(model, voxels, batch_size) -> np.ndarray:
    cfg = model.config
    divisor = cfg.divisor
    depth_axis, height, width = voxels.shape
    pads = _pad_amounts((height, width), divisor)
    out = np.zeros((cfg.num_classes, depth_axis, height, width), dtype=np.float32)

    for lo in range(0, depth_axis, batch_size):
        idx = range(lo, min(lo + batch_size, depth_axis))
        slices = [np.pad(voxels[i], pads, mode="edge") for i in idx]
        logits = _forward_batch(model, slices)
        for k, i in enumerate(idx):
            out[:, i] = logits[k][:, :height, :width]
    return out


def predict_labels(
    model: torch.nn.Module,
    voxels: np.ndarray,
    patch_size: tuple[int, int, int] | None = None,
    batch_size: int | None = None,
) -> np.ndarray:
    logits = predict_logits(model, voxels, patch_size, batch_size)
    return np.argmax(logits, axis=0).astype(np.int16)
