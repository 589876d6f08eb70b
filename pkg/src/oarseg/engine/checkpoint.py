"""Checkpoint archive with integrity hash and config validation."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

import torch

from ..errors import ConfigMismatch, CorruptCheckpoint
from ..models.config import ModelConfig
from ..models.nets import build_model


def _payload_hash(state_dict: dict) -> str:
    h = hashlib.sha256()
    for key in sorted(state_dict):
        tensor = state_dict[key]
        h.update(key.encode())
        h.update(str(tensor.dtype).encode())
        h.update(str(tuple(tensor.shape)).encode())
        h.update(tensor.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def save_checkpoint(model: torch.nn.Module, state: dict, path: str | Path) -> None:
    """Atomic write (temp file + rename) of parameters, config, and metadata."""
    path = Path(path)
    state_dict = model.state_dict()
    payload = {
        "model_config": model.config.to_dict(),
        "state_dict": state_dict,
        "meta": dict(state),
        "sha256": _payload_hash(state_dict),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(
    path: str | Path, expected_config: ModelConfig | None = None
) -> tuple[torch.nn.Module, dict]:
    """Restore (model, metadata); verifies the stored hash and, when given,
    that the stored config equals the expected one."""
    try:
        payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CorruptCheckpoint(f"cannot read checkpoint {path}: {exc}") from exc
    for key in ("model_config", "state_dict", "sha256"):
        if key not in payload:
            raise CorruptCheckpoint(f"checkpoint {path} lacks field {key!r}")
    if _payload_hash(payload["state_dict"]) != payload["sha256"]:
        raise CorruptCheckpoint(f"checkpoint {path} failed its integrity hash")
    stored = ModelConfig.from_dict(payload["model_config"])
    if expected_config is not None and stored.to_dict() != expected_config.to_dict():
        raise ConfigMismatch(
            f"checkpoint config {stored.to_dict()} != expected {expected_config.to_dict()}"
        )
    model = build_model(stored)
    model.load_state_dict(payload["state_dict"])
    return model, dict(payload.get("meta", {}))
