from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..runtime import forward, _check_input, resolve_target, predict
from .explanation import Explanation


@dataclass(frozen=True)
class OcclusionConfig:
    """Square patches over the trailing spatial axes (grid inputs) or windows
    over a 1-D input. ``patch=1, stride=1`` occludes single features."""

    patch: int = 1
    stride: int = 1
    value: float = 0.0


def _patch_slices(shape, patch, stride):
    if patch < 1 or stride < 1:
        raise ConfigError("patch and stride must be >= 1")
    spatial = shape[-2:] if len(shape) >= 2 else shape
    if any(patch > s for s in spatial):
        raise ConfigError(f"patch {patch} larger than input {tuple(spatial)}")
    starts = [range(0, s - patch + 1, stride) for s in spatial]
    lead = (slice(None),) * (len(shape) - len(spatial))
    if len(spatial) == 1:
        return [lead + (slice(i, i + patch),) for i in starts[0]]
    return [lead + (slice(i, i + patch), slice(j, j + patch)) for i in starts[0] for j in starts[1]]


def occlusion(net, x, cfg=OcclusionConfig(), target=None):
    """Score each patch by ``f(x) - f(x with patch set to cfg.value)``.

    Positions covered by several patches receive the mean of their scores;
    positions never covered receive 0.
    """
    x = _check_input(net, x)
    target = resolve_target(net, predict(net, x), target)
    fx, _ = forward(net, x, target)
    total = np.zeros(x.shape)
    count = np.zeros(x.shape)
    for sl in _patch_slices(x.shape, cfg.patch, cfg.stride):
        xo = x.copy()
        xo[sl] = cfg.value
        score = fx - forward(net, xo, target)[0]
        total[sl] += score
        count[sl] += 1
    rel = np.divide(total, count, out=np.zeros(x.shape), where=count > 0)
    return Explanation(rel, "occlusion", target, extras={"patch": cfg.patch, "stride": cfg.stride})
