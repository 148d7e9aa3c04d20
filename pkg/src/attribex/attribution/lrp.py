"""Layer-wise relevance propagation with per-layer rules.

Weighted layers (Dense, Conv2D, the linear part of SoftMinHead) use the
generalized rule

    R_j = sum_k a_j rho(w_jk) / (eps + sum_{0,j} a_j rho(w_jk)) R_k,
    rho(w) = w + gamma * max(0, w),

computed as forward pass, division, transposed pass, product. The first
weighted layer may use the z^B box rule instead. ReLU and Flatten are
transparent, max pools route relevance to the winner, average pools and
log-sum-exp pools redistribute in proportion to each input's share.
"""
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .. import kernels
from ..errors import ConfigError
from ..runtime import (AvgPool2D, Conv2D, Dense, Flatten, LogSumExpPool, MaxPool2D, ReLU,
                       SoftMinHead, resolve_target, run)
from .explanation import Explanation

TINY = 1e-12


@dataclass(frozen=True)
class LRP0:
    pass


@dataclass(frozen=True)
class LRPEps:
    """``relative=True`` scales ``eps`` by the mean absolute denominator of the layer."""

    eps: float = 1e-6
    relative: bool = False

    def __post_init__(self):
        if self.eps < 0:
            raise ConfigError("epsilon must be >= 0")


@dataclass(frozen=True)
class LRPGamma:
    gamma: float = 0.25

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")


@dataclass(frozen=True)
class ZB:
    """Box rule for the input layer; ``low``/``high`` broadcast against the input."""

    low: Union[float, np.ndarray] = 0.0
    high: Union[float, np.ndarray] = 1.0


Rule = Union[LRP0, LRPEps, LRPGamma, ZB]


@dataclass(frozen=True)
class RuleMap:
    """Rules keyed by layer index in ``net.layers``; unlisted layers use ``default``."""

    rules: dict = field(default_factory=dict)
    default: Rule = LRP0()

    def rule_for(self, index):
        return self.rules.get(index, self.default)


def composite_rules(net, low=0.0, high=1.0, gamma=0.25, eps=1e-6):
    """Layered preset: z^B on the input layer, LRP-gamma on the lower half of the
    remaining weighted layers, relative LRP-eps on the upper half, LRP-0 on the
    output layer."""
    idx = net.weighted_indices()
    rules = {}
    if not idx:
        return RuleMap(rules)
    rules[idx[0]] = ZB(low, high)
    if len(idx) > 1:
        rules[idx[-1]] = LRP0()
    middle = idx[1:-1]
    n_gamma = (len(middle) + 1) // 2
    for k, i in enumerate(middle):
        rules[i] = LRPGamma(gamma) if k < n_gamma else LRPEps(eps, relative=True)
    return RuleMap(rules)


def stabilize(z):
    """Push denominators with ``|z| < 1e-12`` away from zero, keeping their sign
    (zero counts as positive)."""
    sgn = np.where(z >= 0, 1.0, -1.0)
    return np.where(np.abs(z) < TINY, z + sgn * TINY, z)


def _bias_share(layer, b, s):
    if isinstance(layer, Conv2D):
        return float(np.dot(b, s.reshape(s.shape[0], -1).sum(axis=1)))
    return float(np.dot(b, s))


def _relprop_linear(layer, a, R, rule):
    W, b = layer.W, layer.b
    if isinstance(rule, LRPGamma):
        W = W + rule.gamma * np.maximum(W, 0.0)
        b = b + rule.gamma * np.maximum(b, 0.0)
    z = layer.apply(a, W, b)
    if isinstance(rule, LRPEps):
        eps = rule.eps * float(np.mean(np.abs(z))) if rule.relative else rule.eps
        z = z + np.where(z >= 0, eps, -eps)
    s = R / stabilize(z)
    c = layer.apply_transpose(s, W, a.shape)
    return a * c, _bias_share(layer, b, s)


def _relprop_zb(layer, x, R, rule):
    low = np.broadcast_to(np.asarray(rule.low, dtype=np.float64), x.shape)
    high = np.broadcast_to(np.asarray(rule.high, dtype=np.float64), x.shape)
    if np.any(low > x) or np.any(x > high):
        raise ConfigError("z^B bounds violated: need low <= x <= high")
    W = layer.W
    Wp, Wn = np.maximum(W, 0.0), np.minimum(W, 0.0)
    zero = np.zeros(W.shape[0])
    z = layer.apply(x, W, zero) - layer.apply(low, Wp, zero) - layer.apply(high, Wn, zero)
    s = R / stabilize(z)
    c1 = layer.apply_transpose(s, W, x.shape)
    c2 = layer.apply_transpose(s, Wp, x.shape)
    c3 = layer.apply_transpose(s, Wn, x.shape)
    return x * c1 - low * c2 - high * c3


def relprop(layer, a, R, rule, first_weighted=False):
    """Relevance of a layer's input given relevance ``R`` at its output.

    Returns ``(R_in, bias_relevance)``.
    """
    if isinstance(rule, ZB) and layer.weighted and not first_weighted:
        raise ConfigError("the z^B rule applies only to the first weighted layer")
    if isinstance(layer, (Dense, Conv2D)):
        if isinstance(rule, ZB):
            return _relprop_zb(layer, a, R, rule), 0.0
        return _relprop_linear(layer, a, R, rule)
    if isinstance(layer, SoftMinHead):
        Rk = layer.weights(a) * R[0]
        if isinstance(rule, ZB):
            return _relprop_zb(layer, a, Rk, rule), 0.0
        return _relprop_linear(layer, a, Rk, rule)
    if isinstance(layer, (ReLU, Flatten)):
        return R.reshape(a.shape), 0.0
    if isinstance(layer, MaxPool2D):
        return kernels.maxpool_backward(R, layer.argmax(a), a.shape), 0.0
    if isinstance(layer, AvgPool2D):
        s = R / stabilize(layer.forward(a))
        return a * kernels.avgpool_backward(s, a.shape, layer.size, layer.stride), 0.0
    if isinstance(layer, LogSumExpPool):
        Rin = np.zeros(a.shape)
        share = layer.weights(a) * R[:, None]
        np.add.at(Rin, layer._idx[layer._mask], share[layer._mask])
        return Rin, 0.0
    raise ConfigError(f"no relevance rule for layer kind {layer.kind}")


def lrp(net, x, rules=None, target=None, init=None):
    """Propagate the target output back to the input.

    ``init`` overrides the starting relevance at the output (default: the
    target score itself, every other output zero). The relevance absorbed by
    bias terms is returned in ``extras["bias_relevance"]``.
    """
    rules = RuleMap() if rules is None else rules
    trace = run(net, x)
    out = trace[-1]
    target = resolve_target(net, out, target)
    if init is None:
        R = np.zeros(out.size)
        R[target] = out.ravel()[target]
        R = R.reshape(out.shape)
    else:
        R = np.asarray(init, dtype=np.float64).reshape(out.shape)
    weighted = net.weighted_indices()
    first = weighted[0] if weighted else -1
    bias_rel = 0.0
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        rule = rules.rule_for(i) if layer.weighted else None
        R, br = relprop(layer, trace[i], R, rule, first_weighted=(i == first))
        bias_rel += br
    return Explanation(R, "lrp", target, extras={"bias_relevance": bias_rel,
                                                  "output": float(out.ravel()[target])})


def parse_rules(spec, net, x=None):
    """Build a :class:`RuleMap` from a CLI string.

    ``lrp0``, ``eps=V``, ``gamma=V`` apply one rule everywhere; ``composite``
    uses :func:`composite_rules` with bounds from the input's value range;
    ``zb:L,H`` puts z^B with bounds L, H on the input layer and LRP-0 elsewhere.
    """
    spec = spec.strip()
    try:
        if spec == "lrp0":
            return RuleMap()
        if spec.startswith("eps="):
            return RuleMap(default=LRPEps(float(spec[4:])))
        if spec.startswith("gamma="):
            return RuleMap(default=LRPGamma(float(spec[6:])))
        if spec == "composite":
            low, high = (0.0, 1.0) if x is None else (min(0.0, float(np.min(x))), max(1.0, float(np.max(x))))
            return composite_rules(net, low, high)
        if spec.startswith("zb:"):
            low, high = (float(v) for v in spec[3:].split(","))
            idx = net.weighted_indices()
            return RuleMap({idx[0]: ZB(low, high)} if idx else {})
    except ValueError:
        pass
    raise ConfigError(f"cannot parse rules {spec!r}")
