from .losses import LossConfig, ce_loss, combined_loss, dice_loss
from .optimizers import make_optimizer, set_lr
from .schedule import POLICIES, SchedulerConfig, lr_at, read_lr_trace, write_lr_trace

__all__ = [
    "POLICIES",
    "LossConfig",
    "SchedulerConfig",
    "ce_loss",
    "combined_loss",
    "dice_loss",
    "lr_at",
    "make_optimizer",
    "read_lr_trace",
    "set_lr",
    "write_lr_trace",
]
