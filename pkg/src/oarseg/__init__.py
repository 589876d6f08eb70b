"""Config-driven multi-class organ-at-risk segmentation for 3D medical volumes."""

__version__ = "0.1.0"

from . import data, engine, metrics, models, optim  # noqa: F401
