from .layers import (
    ConfigError,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    GlobalAvgPool,
    Layer,
    MaxPool2d,
    ReLU,
    ResidualBlock,
    ShapeError,
    Sigmoid,
    he_uniform,
)
from .losses import mean_bce, mse, softmax_cross_entropy
from .network import GradientTape, Network, NonFiniteError, TapeConsumedError
from .optim import SGD, Adam, make_optimizer
from .serialize import FormatError, load_params, save_params

__all__ = [
    "Adam", "ConfigError", "Conv2d", "Dense", "Dropout", "Flatten",
    "FormatError", "GlobalAvgPool", "GradientTape", "Layer", "MaxPool2d",
    "Network", "NonFiniteError", "ReLU", "ResidualBlock", "SGD",
    "ShapeError", "Sigmoid", "TapeConsumedError", "he_uniform",
    "load_params", "make_optimizer", "mean_bce", "mse", "save_params",
    "softmax_cross_entropy",
]
