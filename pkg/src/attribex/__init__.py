"""Attribution engine for small feed-forward and convolutional networks."""
__version__ = "0.1.0"

from .errors import (AttribexError, ConfigError, InputShapeError, ModelFormatError,
                     NumericsError, SizeError)
from .runtime import (AvgPool2D, Conv2D, Dense, Flatten, LogSumExpPool, MaxPool2D, Network, ReLU,
                      SoftMinHead, forward, gradient, predict, run)
from .io import load_data, load_model, save_data, save_model
from .attribution import (IGConfig, LRP0, LRPEps, LRPGamma, OcclusionConfig, RuleMap, ZB,
                          Explanation, bilrp, composite_rules, gradient_x_input,
                          integrated_gradients, lrp, occlusion, simple_taylor, smoothgrad)
from .methods import explain

__all__ = [
    "AttribexError", "ConfigError", "InputShapeError", "ModelFormatError", "NumericsError",
    "SizeError", "Dense", "Conv2D", "ReLU", "MaxPool2D", "AvgPool2D", "Flatten", "SoftMinHead",
    "LogSumExpPool", "Network", "forward", "gradient", "predict", "run", "load_model",
    "save_model", "load_data", "save_data", "Explanation", "OcclusionConfig", "IGConfig",
    "RuleMap", "LRP0", "LRPEps", "LRPGamma", "ZB", "composite_rules", "occlusion",
    "simple_taylor", "gradient_x_input", "smoothgrad", "integrated_gradients", "lrp", "bilrp",
    "explain",
]
