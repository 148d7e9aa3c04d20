"""Name-based dispatch over the explanation methods, shared by the CLI and
the benchmarks."""
import numpy as np

from .attribution import (IGConfig, OcclusionConfig, Explanation, gradient_explanation,
                          gradient_x_input, integrated_gradients, lrp, occlusion, parse_rules,
                          smooth_ig_config, smoothgrad)
from .errors import ConfigError
from .runtime import predict, resolve_target

METHODS = ("occlusion", "gradient", "gxi", "smoothgrad", "ig", "smooth-ig", "lrp", "bilrp")
STOCHASTIC = ("smoothgrad", "smooth-ig")


def explain(net, x, method, target=None, seed=None, rules="lrp0", steps=None, samples=None,
            sigma=None, patch=1, stride=1):
    """One explanation for ``x``. ``bilrp`` is pairwise and lives in
    :func:`attribex.attribution.bilrp`."""
    if method in STOCHASTIC and seed is None:
        raise ConfigError(f"method {method!r} requires a seed")
    if method == "occlusion":
        return occlusion(net, x, OcclusionConfig(patch, stride), target)
    if method == "gradient":
        return gradient_explanation(net, x, target)
    if method == "gxi":
        return gradient_x_input(net, x, target)
    if method == "smoothgrad":
        t = resolve_target(net, predict(net, x), target)
        g = smoothgrad(net, x, 0.1 if sigma is None else sigma, samples or 25, seed, t)
        return Explanation(g, "smoothgrad", t, seed)
    if method == "ig":
        return integrated_gradients(net, x, IGConfig(steps=steps or 32), target, seed)
    if method == "smooth-ig":
        cfg = smooth_ig_config(steps or 5, samples or 5)
        if sigma is not None:
            cfg = IGConfig(cfg.steps, cfg.samples, sigma, "random")
        return integrated_gradients(net, x, cfg, target, seed)
    if method == "lrp":
        rulemap = parse_rules(rules, net, x) if isinstance(rules, str) else rules
        return lrp(net, x, rulemap, target)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
