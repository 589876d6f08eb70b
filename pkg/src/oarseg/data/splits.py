"""Deterministic train/val/test partitioning and split manifests."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..errors import InvalidRatios
from .types import SplitAssignment

RATIO_TOL = 1e-9


def split_patients(
    ids: list[str], ratios: tuple[float, float, float], seed: int
) -> SplitAssignment:
    """Seeded uniform shuffle split into train/val/test.

    Val and test sizes are floor(ratio * N); train takes the remainder, so a
    tiny cohort always keeps a nonempty training set. Identical (id set, seed)
    inputs reproduce identical lists regardless of input order.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise InvalidRatios(f"ratios must be 3 nonnegative values, got {ratios}")
    if abs(sum(ratios) - 1.0) > RATIO_TOL:
        raise InvalidRatios(f"ratios must sum to 1, got {sum(ratios)!r}")
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise InvalidRatios("patient ids must be unique")

    n = len(ids)
    n_val = math.floor(ratios[1] * n)
    n_test = math.floor(ratios[2] * n)
    # canonical order first so the shuffle only depends on the id *set*
    rng = np.random.default_rng(seed)
    pool = sorted(ids)
    order = [pool[i] for i in rng.permutation(n)]
    n_train = n - n_val - n_test
    return SplitAssignment(
        train_ids=order[:n_train],
        val_ids=order[n_train : n_train + n_val],
        test_ids=order[n_train + n_val :],
        ratios=ratios,
        seed=int(seed),
    )


def save_split_manifest(split: SplitAssignment, path: str | Path) -> None:
    payload = {
        "seed": split.seed,
        "ratios": list(split.ratios),
        "train": split.train_ids,
        "val": split.val_ids,
        "test": split.test_ids,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_split_manifest(path: str | Path) -> SplitAssignment:
    payload = json.loads(Path(path).read_text())
    return SplitAssignment(
        train_ids=payload["train"],
        val_ids=payload["val"],
        test_ids=payload["test"],
        ratios=tuple(payload["ratios"]),
        seed=int(payload["seed"]),
    )
