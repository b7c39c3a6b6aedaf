from . import tensor as F
from .checkpoint import config_hash, file_sha256, load_checkpoint, save_checkpoint
from .gradcheck import check_gradients, numerical_grads, relative_error
from .layers import Conv1d, InstanceNorm, Linear, Module, parameter
from .optim import Adam, AdamState, LrSchedule, NonFiniteGradientError, adam_step, lr_at
from .tensor import Tape, Tensor, backward

__all__ = [
    "Adam",
    "AdamState",
    "Conv1d",
    "F",
    "InstanceNorm",
    "Linear",
    "LrSchedule",
    "Module",
    "NonFiniteGradientError",
    "Tape",
    "Tensor",
    "adam_step",
    "backward",
    "check_gradients",
    "config_hash",
    "file_sha256",
    "load_checkpoint",
    "lr_at",
    "numerical_grads",
    "parameter",
    "relative_error",
    "save_checkpoint",
]
