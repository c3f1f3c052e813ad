"""From-scratch fully convolutional network: layers, model, training, checkpoints."""

from .model import ArchConfig, FcnModel, backward, forward, init_model, loss, predict
from .train import AdamState, TrainConfig, TrainResult, adam_step, fine_tune, train
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, gradient_check

__all__ = [
    "ArchConfig",
    "FcnModel",
    "AdamState",
    "TrainConfig",
    "TrainResult",
    "GradCheckReport",
    "init_model",
    "forward",
    "predict",
    "loss",
    "backward",
    "adam_step",
    "train",
    "fine_tune",
    "save_checkpoint",
    "load_checkpoint",
    "gradient_check",
]
