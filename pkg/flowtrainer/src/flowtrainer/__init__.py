"""Toy displacement-field completion trainer for depthwarp datasets."""

from .losses import LossWeights, loss_content, loss_total, loss_tv
from .model import DepthModel, FlowModel, build_model
from .train import TrainConfig, TrainResult, train_depthnet, train_flow

__version__ = "0.1.0"

__all__ = [
    "LossWeights",
    "loss_content",
    "loss_total",
    "loss_tv",
    "DepthModel",
    "FlowModel",
    "build_model",
    "TrainConfig",
    "TrainResult",
    "train_depthnet",
    "train_flow",
    "__version__",
]
