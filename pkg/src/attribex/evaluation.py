"""Faithfulness (pixel-flipping), a compressed-size interpretability proxy, and
throughput benchmarks for explanation methods."""
from dataclasses import dataclass, field
import os
import platform
import statistics
import sys
import time
import zlib

import numpy as np

from . import kernels
from .errors import ConfigError
from .runtime import forward, predict, resolve_target

IMPUTATION_KINDS = ("zero", "mean", "neighbor")


@dataclass(frozen=True)
class ImputationPolicy:
    """How removed features are filled.

    ``zero``: set to 0. ``mean``: take the value from ``mean`` (a dataset mean
    shaped like the input). ``neighbor``: start from ``mean`` (or, without one,
    the mean of the original input) and replace every removed pixel by the
    average of its in-bounds 4-neighbours, ``iterations`` times.
    """

    kind: str = "zero"
    mean: np.ndarray = None
    iterations: int = 10

    def __post_init__(self):
        if self.kind not in IMPUTATION_KINDS:
            raise ConfigError(f"unknown imputation {self.kind!r}")
        if self.kind == "mean" and self.mean is None:
            raise ConfigError("dataset-mean imputation needs a dataset mean")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")

    def check(self, x):
        if self.mean is not None and np.shape(self.mean) != x.shape:
            raise ConfigError(f"dataset mean shape {np.shape(self.mean)} != input shape {x.shape}")
        if self.kind == "neighbor" and x.ndim < 2:
            raise ConfigError("neighbour-mean imputation needs grid-shaped input")

    def apply(self, x, removed):
        """Return a copy of ``x`` with ``removed`` (boolean, shaped like x) imputed."""
        out = x.copy()
        if self.kind == "zero":
            out[removed] = 0.0
            return out
        base = np.broadcast_to(self.mean if self.mean is not None else np.mean(x), x.shape)
        out[removed] = base[removed]
        if self.kind == "mean":
            return out
        return _inpaint(out, removed, self.iterations)


def _inpaint(img, removed, iterations):
    H, W = img.shape[-2:]
    ones = np.ones((H, W))
    count = np.zeros((H, W))
    count[1:] += ones[:-1]
    count[:-1] += ones[1:]
    count[:, 1:] += ones[:, :-1]
    count[:, :-1] += ones[:, 1:]
    for _ in range(iterations):
        acc = np.zeros(img.shape)
        acc[..., 1:, :] += img[..., :-1, :]
        acc[..., :-1, :] += img[..., 1:, :]
        acc[..., :, 1:] += img[..., :, :-1]
        acc[..., :, :-1] += img[..., :, 1:]
        img = np.where(removed, acc / count, img)
    return img


@dataclass
class FlipCurve:
    scores: np.ndarray
    steps: np.ndarray
    auc: float = field(init=False)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.steps = np.asarray(self.steps, dtype=np.int64)
        if self.scores.shape != self.steps.shape:
            raise ValueError("scores and steps must have equal length")
        self.auc = flip_auc(self.scores)


def flip_auc(scores):
    """Trapezoidal area under the curve, per step and relative to the initial score."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 2:
        return 1.0
    area = float(np.sum((scores[1:] + scores[:-1]) / 2.0)) / (scores.size - 1)
    ref = abs(scores[0])
    return area / ref if ref > 0 else area


def _flip(net, x, order, policy, step_size, target):
    if step_size < 1:
        raise ConfigError("step_size must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    policy.check(x)
    target = resolve_target(net, predict(net, x), target)
    removed = np.zeros(x.size, dtype=bool)
    scores = [forward(net, x, target)[0]]
    steps = [0]
    for start in range(0, x.size, step_size):
        removed[order[start:start + step_size]] = True
        scores.append(forward(net, policy.apply(x, removed.reshape(x.shape)), target)[0])
        steps.append(min(start + step_size, x.size))
    return FlipCurve(np.array(scores), np.array(steps))


def removal_order(relevance):
    """Most to least relevant; equal scores go in flat-index order."""
    return np.argsort(-np.asarray(relevance).ravel(), kind="stable")


def pixel_flip(net, x, expl, policy=ImputationPolicy(), step_size=1, target=None):
    rel = expl.relevance if hasattr(expl, "relevance") else np.asarray(expl)
    if rel.shape != np.shape(x):
        raise ConfigError(f"explanation shape {rel.shape} != input shape {np.shape(x)}")
    if target is None and hasattr(expl, "target"):
        target = expl.target
    return _flip(net, x, removal_order(rel), policy, step_size, target)


def random_flip_baseline(net, x, seed, policy=ImputationPolicy(), step_size=1, target=None):
    order = np.random.default_rng(seed).permutation(np.size(x))
    return _flip(net, x, order, policy, step_size, target)


def quantize(relevance, bins):
    """Map relevance onto levels symmetric about zero (max-abs scaling).

    Zero always lands on the middle level, so an even ``bins`` uses
    ``bins - 1`` levels; ``bins=2`` keeps only the sign.
    """
    if not 2 <= bins <= 256:
        raise ConfigError("bins must be in [2, 256]")
    r = np.asarray(relevance, dtype=np.float64)
    scale = float(np.max(np.abs(r))) if r.size else 0.0
    u = r / scale if scale > 0 else np.zeros(r.shape)
    if bins == 2:
        return (u > 0).astype(np.uint8)
    half = (bins - 1) // 2
    return (np.rint(u * half) + half).astype(np.uint8)


def _raster(relevance):
    r = np.asarray(relevance)
    if r.ndim >= 3:
        r = r.sum(axis=tuple(range(r.ndim - 2)))
    return np.atleast_2d(r)


def filesize_proxy(expl, bins=256, level=9):
    """Byte length of the quantized heatmap after DEFLATE compression."""
    rel = expl.relevance if hasattr(expl, "relevance") else expl
    raster = quantize(_raster(rel), bins)
    return len(zlib.compress(raster.tobytes(), level))


def environment():
    return {"python": sys.version.split()[0], "numpy": np.__version__, "platform": platform.platform(),
            "machine": platform.machine(), "cpus": os.cpu_count(), "backend": kernels.get_backend()}


def runtime_bench(methods, samples, repetitions=3):
    """Explanations per second for each ``name -> callable(x)``.

    Every method is warmed up once (JIT compilation is excluded); the reported
    throughput is the median over ``repetitions`` passes over ``samples``.
    """
    if repetitions < 3:
        raise ConfigError("repetitions must be >= 3")
    samples = list(samples)
    table = {}
    for name, fn in methods.items():
        fn(samples[0])
        rates = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            for x in samples:
                fn(x)
            rates.append(len(samples) / (time.perf_counter() - t0))
        table[name] = {"explanations_per_second": statistics.median(rates), "runs": rates,
                       "spread": (max(rates) - min(rates)) / statistics.median(rates)}
    return {"methods": table, "repetitions": repetitions, "samples": len(samples),
            "environment": environment()}
