"""Gradient-based attributions: simple Taylor, Gradient x Input, SmoothGrad,
Integrated Gradients and its smoothed variant.

All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64).
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ConfigError, InputShapeError
from ..runtime import _check_input, forward, gradient, predict, resolve_target, value_and_gradient
from .explanation import Explanation

ROOT_POLICIES = ("origin", "fixed", "random")


def _target(net, x, target):
    return resolve_target(net, predict(net, x), target)


def simple_taylor(net, x, root, target=None):
    """First-order Taylor terms ``grad f(root) * (x - root)``."""
    x = _check_input(net, x)
    root = np.asarray(root, dtype=np.float64)
    if root.shape != x.shape:
        raise InputShapeError(f"root shape {root.shape} != input shape {x.shape}")
    target = _target(net, x, target)
    rel = gradient(net, root, target) * (x - root)
    return Explanation(rel, "taylor", target)


def gradient_x_input(net, x, target=None):
    x = _check_input(net, x)
    target = _target(net, x, target)
    return Explanation(gradient(net, x, target) * x, "gxi", target)


def smoothgrad(net, x, sigma, samples, seed, target=None):
    """Mean gradient over ``samples`` Gaussian perturbations of ``x``.

    ``sigma == 0`` returns the plain gradient without drawing noise.
    """
    if sigma < 0 or samples < 1:
        raise ConfigError("smoothgrad needs sigma >= 0 and samples >= 1")
    x = _check_input(net, x)
    target = _target(net, x, target)
    if sigma == 0:
        return gradient(net, x, target)
    rng = np.random.default_rng(seed)
    acc = np.zeros(x.shape)
    for _ in range(samples):
        acc += gradient(net, x + sigma * rng.standard_normal(x.shape), target)
    return acc / samples


@dataclass(frozen=True)
class IGConfig:
    """Integration setup.

    ``root``: ``"origin"`` (x~ = 0), ``"fixed"`` (x~ = ``baseline``) or
    ``"random"`` (x~ ~ N(0, sigma^2 I), drawn ``samples`` times). For the
    random policy ``sigma=None`` means ``0.01 * rms(x)``.
    """

    steps: int = 32
    samples: int = 1
    sigma: Optional[float] = 0.0
    root: str = "origin"
    baseline: Optional[np.ndarray] = None

    def validate(self):
        if self.steps < 1 or self.samples < 1:
            raise ConfigError("steps and samples must be >= 1")
        if self.root not in ROOT_POLICIES:
            raise ConfigError(f"unknown root policy {self.root!r}")
        if self.root == "random":
            if self.sigma is not None and self.sigma < 0:
                raise ConfigError("sigma must be >= 0")
            if self.sigma == 0 and self.samples != 1:
                raise ConfigError("samples must be 1 when sigma == 0")
        elif self.samples != 1:
            raise ConfigError(f"root policy {self.root!r} is deterministic; samples must be 1")
        if self.root == "fixed" and self.baseline is None:
            raise ConfigError("fixed root policy needs a baseline")


def smooth_ig_config(steps=5, samples=5):
    """Five integration steps from five random roots near the origin."""
    return IGConfig(steps=steps, samples=samples, sigma=None, root="random")


def _roots(cfg, x, rng):
    if cfg.root == "origin":
        return [np.zeros(x.shape)]
    if cfg.root == "fixed":
        base = np.asarray(cfg.baseline, dtype=np.float64)
        if base.shape != x.shape:
            raise InputShapeError(f"baseline shape {base.shape} != input shape {x.shape}")
        return [base]
    sigma = 0.01 * float(np.sqrt(np.mean(x * x))) if cfg.sigma is None else cfg.sigma
    return [sigma * rng.standard_normal(x.shape) for _ in range(cfg.samples)]


def integrated_gradients(net, x, cfg=IGConfig(), target=None, seed=None):
    """Midpoint-rule Integrated Gradients averaged over ``cfg.samples`` roots.

    ``extras["reference_output"]`` holds the mean ``f(root)``, so completeness
    reads ``sum(R) ~ f(x) - reference_output``.
    """
    cfg.validate()
    x = _check_input(net, x)
    target = _target(net, x, target)
    if cfg.root == "random" and seed is None:
        raise ConfigError("random root policy requires a seed")
    rng = np.random.default_rng(seed)
    acc = np.zeros(x.shape)
    ref = 0.0
    roots = _roots(cfg, x, rng)
    for root in roots:
        delta = x - root
        ref += forward(net, root, target)[0]
        for t in range(1, cfg.steps + 1):
            acc += delta * gradient(net, root + (t - 0.5) / cfg.steps * delta, target)
    rel = acc / (cfg.steps * len(roots))
    method = "smooth-ig" if cfg.root == "random" else "ig"
    return Explanation(rel, method, target, seed=seed,
                       extras={"reference_output": ref / len(roots), "steps": cfg.steps,
                               "samples": len(roots)})


def integrate_path(net, points, target=None):
    """Left Riemann sum of ``grad f`` along an explicit polyline of inputs."""
    points = [np.asarray(p, dtype=np.float64) for p in points]
    if len(points) < 2:
        raise ConfigError("a path needs at least two points")
    target = _target(net, points[-1], target)
    rel = np.zeros(points[0].shape)
    for p, q in zip(points[:-1], points[1:]):
        rel += gradient(net, p, target) * (q - p)
    return Explanation(rel, "ig-path", target)


def gradient_explanation(net, x, target=None):
    x = _check_input(net, x)
    target = _target(net, x, target)
    _, g = value_and_gradient(net, x, target)
    return Explanation(g, "gradient", target)
