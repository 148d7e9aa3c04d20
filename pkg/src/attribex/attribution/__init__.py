from .bilrp import bilrp, similarity
from .explanation import Explanation, load_explanation, save_explanation
from .gradients import (IGConfig, gradient_explanation, gradient_x_input, integrate_path,
                        integrated_gradients, simple_taylor, smooth_ig_config, smoothgrad)
from .lrp import (LRP0, ZB, LRPEps, LRPGamma, RuleMap, composite_rules, lrp, parse_rules,
                  relprop)
from .occlusion import OcclusionConfig, occlusion

__all__ = [
    "Explanation", "load_explanation", "save_explanation",
    "OcclusionConfig", "occlusion",
    "IGConfig", "smooth_ig_config", "simple_taylor", "gradient_x_input", "gradient_explanation",
    "smoothgrad", "integrated_gradients", "integrate_path",
    "LRP0", "LRPEps", "LRPGamma", "ZB", "RuleMap", "composite_rules", "lrp", "relprop",
    "parse_rules", "bilrp", "similarity",
]
