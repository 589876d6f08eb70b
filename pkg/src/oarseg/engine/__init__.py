from .checkpoint import load_checkpoint, save_checkpoint
from .compare import ComparisonTable, compare, compare_reports
from .config import DataConfig, ExperimentConfig, apply_overrides, load_config_dict
from .inference import predict_labels, predict_logits
from .train import TrainState, default_runs_dir, evaluate_checkpoint, fit

__all__ = [
    "ComparisonTable",
    "DataConfig",
    "ExperimentConfig",
    "TrainState",
    "apply_overrides",
    "compare",
    "compare_reports",
    "default_runs_dir",
    "evaluate_checkpoint",
    "fit",
    "load_checkpoint",
    "load_config_dict",
    "predict_labels",
    "predict_logits",
    "save_checkpoint",
]
