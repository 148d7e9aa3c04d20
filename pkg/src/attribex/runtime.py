"""Layers, networks, forward pass with activation trace, and exact reverse-mode
gradients. Everything is float64; networks are immutable once built."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import InputShapeError, ModelFormatError, NumericsError


def as_tensor(x, name="tensor") -> np.ndarray:
    """Float64 copy of ``x`` with finiteness checked. Arrays returned by the
    library are plain ndarrays; this is the single validation gate."""
    arr = np.array(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if any(s <= 0 for s in arr.shape):
        raise InputShapeError(f"{name} has a zero-length axis: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"{name} contains NaN or Inf")
    return arr


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _check_finite(a, where):
    if not np.all(np.isfinite(a)):
        raise NumericsError(f"non-finite activation after {where}")


def logsumexp_sorted(z, axis=-1):
    """Stable log-sum-exp whose summation runs over sorted terms, so any
    permutation of ``z`` along ``axis`` gives a bit-identical result."""
    m = np.max(z, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    e = np.sort(np.exp(z - m_safe), axis=axis)
    return np.squeeze(m_safe, axis=axis) + np.log(np.sum(e, axis=axis))


def softmax(z, axis=-1):
    m = np.max(z, axis=axis, keepdims=True)
    e = np.exp(z - m)
    return e / np.sum(e, axis=axis, keepdims=True)


class Layer:
    kind = "Layer"
    weighted = False

    def output_shape(self, in_shape):
        return tuple(in_shape)

    def forward(self, a):
        raise NotImplementedError

    def backward(self, a, g):
        raise NotImplementedError

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True, eq=False)
class Dense(Layer):
    """Affine map ``W @ a + b`` with ``W`` of shape (out, in)."""

    W: np.ndarray
    b: Optional[np.ndarray] = None
    kind = "Dense"
    weighted = True

    def __post_init__(self):
        W = _frozen(self.W)
        if W.ndim != 2:
            raise ModelFormatError("Dense weight must be 2-D", field="W")
        b = _frozen(np.zeros(W.shape[0]) if self.b is None else self.b)
        if b.shape != (W.shape[0],):
            raise ModelFormatError(f"bias length {b.size} != {W.shape[0]} outputs", field="b")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.W.shape[1],):
            raise ModelFormatError(f"expects input ({self.W.shape[1]},), got {tuple(in_shape)}", field="W")
        return (self.W.shape[0],)

    def apply(self, a, W, b):
        return W @ a + b

    def apply_transpose(self, g, W, in_shape):
        return W.T @ g

    def forward(self, a):
        return self.W @ a + self.b

    def backward(self, a, g):
        return self.W.T @ g

    def to_dict(self):
        return {"kind": self.kind, "W": self.W.ravel().tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class Conv2D(Layer):
    """2-D convolution on (C, H, W) inputs with explicit zero padding."""

    W: np.ndarray
    b: Optional[np.ndarray] = None
    stride: int = 1
    pad: int = 0
    kind = "Conv2D"
    weighted = True

    def __post_init__(self):
        W = _frozen(self.W)
        if W.ndim != 4:
            raise ModelFormatError("Conv2D weight must be 4-D (out, in, kh, kw)", field="W")
        b = _frozen(np.zeros(W.shape[0]) if self.b is None else self.b)
        if b.shape != (W.shape[0],):
            raise ModelFormatError(f"bias length {b.size} != {W.shape[0]} channels", field="b")
        if int(self.stride) < 1:
            raise ModelFormatError("stride must be >= 1", field="stride")
        if int(self.pad) < 0:
            raise ModelFormatError("pad must be >= 0", field="pad")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "stride", int(self.stride))
        object.__setattr__(self, "pad", int(self.pad))

    def output_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.W.shape[1]:
            raise ModelFormatError(f"expects ({self.W.shape[1]}, H, W) input, got {tuple(in_shape)}", field="W")
        _, H, W = in_shape
        kh, kw = self.W.shape[2:]
        Ho = (H + 2 * self.pad - kh) // self.stride + 1
        Wo = (W + 2 * self.pad - kw) // self.stride + 1
        if Ho < 1 or Wo < 1:
            raise ModelFormatError("kernel larger than padded input", field="kernel")
        return (self.W.shape[0], Ho, Wo)

    def apply(self, a, W, b):
        return kernels.conv2d_forward(a, W, b, self.stride, self.pad)

    def apply_transpose(self, g, W, in_shape):
        return kernels.conv2d_backward_input(g, W, in_shape, self.stride, self.pad)

    def forward(self, a):
        return kernels.conv2d_forward(a, self.W, self.b, self.stride, self.pad)

    def backward(self, a, g):
        return kernels.conv2d_backward_input(g, self.W, a.shape, self.stride, self.pad)

    def to_dict(self):
        return {"kind": self.kind, "W": self.W.ravel().tolist(), "b": self.b.tolist(),
                "kernel": list(self.W.shape[2:]), "stride": self.stride, "pad": self.pad}


@dataclass(frozen=True, eq=False)
class ReLU(Layer):
    kind = "ReLU"

    def forward(self, a):
        return np.maximum(a, 0.0)

    def backward(self, a, g):
        return np.where(a > 0.0, g, 0.0)


@dataclass(frozen=True, eq=False)
class _Pool2D(Layer):
    size: int = 2
    stride: Optional[int] = None

    def __post_init__(self):
        stride = self.size if self.stride is None else self.stride
        if int(self.size) < 1 or int(stride) < 1:
            raise ModelFormatError("pool size and stride must be >= 1", field="stride")
        object.__setattr__(self, "size", int(self.size))
        object.__setattr__(self, "stride", int(stride))

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ModelFormatError(f"expects (C, H, W) input, got {tuple(in_shape)}", field="kernel")
        C, H, W = in_shape
        Ho = (H - self.size) // self.stride + 1
        Wo = (W - self.size) // self.stride + 1
        if Ho < 1 or Wo < 1:
            raise ModelFormatError("pool window larger than input", field="kernel")
        return (C, Ho, Wo)

    def to_dict(self):
        return {"kind": self.kind, "kernel": self.size, "stride": self.stride}


class MaxPool2D(_Pool2D):
    """Max pooling; ties go to the lowest flat index in the window."""

    kind = "MaxPool2D"

    def forward(self, a):
        return kernels.maxpool_forward(a, self.size, self.stride)[0]

    def argmax(self, a):
        return kernels.maxpool_forward(a, self.size, self.stride)[1]

    def backward(self, a, g):
        return kernels.maxpool_backward(g, self.argmax(a), a.shape)


class AvgPool2D(_Pool2D):
    kind = "AvgPool2D"

    def forward(self, a):
        return kernels.avgpool_forward(a, self.size, self.stride)

    def backward(self, a, g):
        return kernels.avgpool_backward(g, a.shape, self.size, self.stride)


@dataclass(frozen=True, eq=False)
class Flatten(Layer):
    kind = "Flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, a):
        return a.reshape(-1)

    def backward(self, a, g):
        return g.reshape(a.shape)


@dataclass(frozen=True, eq=False)
class SoftMinHead(Layer):
    """Scalar head ``-1/beta * log sum_k exp(-beta * (W a + b)_k)``.

    Row k of ``W`` holds ``w_c - w_k`` for competitor class k.
    """

    W: np.ndarray
    b: Optional[np.ndarray] = None
    beta: float = 1.0
    kind = "SoftMinHead"
    weighted = True

    def __post_init__(self):
        Dense.__post_init__(self)
        if not float(self.beta) > 0:
            raise ModelFormatError("beta must be > 0", field="beta")
        object.__setattr__(self, "beta", float(self.beta))

    def output_shape(self, in_shape):
        Dense.output_shape(self, in_shape)
        return (1,)

    apply = Dense.apply
    apply_transpose = Dense.apply_transpose

    def scores(self, a):
        return self.W @ a + self.b

    def weights(self, a):
        """Soft-min assignment over competitors (gradient of the head w.r.t. scores)."""
        return softmax(-self.beta * self.scores(a))

    def forward(self, a):
        return np.array([-logsumexp_sorted(-self.beta * self.scores(a)) / self.beta])

    def backward(self, a, g):
        return self.W.T @ (self.weights(a) * g[0])

    def to_dict(self):
        return {"kind": self.kind, "W": self.W.ravel().tolist(), "b": self.b.tolist(), "beta": self.beta}


@dataclass(frozen=True, eq=False)
class LogSumExpPool(Layer):
    """Soft max (sign=+1) or soft min (sign=-1) over index groups of a flat input.

    Group g outputs ``sign/beta * log sum_{i in g} exp(sign * beta * a_i)``.
    """

    groups: Sequence[Sequence[int]] = field(default_factory=list)
    sign: int = 1
    beta: float = 1.0
    kind = "LogSumExpPool"

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        if not groups or any(len(g) == 0 for g in groups):
            raise ModelFormatError("groups must be non-empty", field="groups")
        if self.sign not in (1, -1):
            raise ModelFormatError("sign must be +1 or -1", field="sign")
        if not float(self.beta) > 0:
            raise ModelFormatError("beta must be > 0", field="beta")
        width = max(len(g) for g in groups)
        idx = np.zeros((len(groups), width), dtype=np.int64)
        mask = np.zeros((len(groups), width), dtype=bool)
        for r, g in enumerate(groups):
            idx[r, :len(g)] = g
            mask[r, :len(g)] = True
        idx.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "_idx", idx)
        object.__setattr__(self, "_mask", mask)

    def output_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ModelFormatError(f"expects flat input, got {tuple(in_shape)}", field="groups")
        if int(self._idx.max()) >= in_shape[0] or int(self._idx.min()) < 0:
            raise ModelFormatError("group index out of range", field="groups")
        return (len(self.groups),)

    def _scaled(self, a):
        return np.where(self._mask, self.sign * self.beta * a[self._idx], -np.inf)

    def weights(self, a):
        """Per-group soft assignment, padded to a rectangular (groups, width) array."""
        return softmax(self._scaled(a), axis=1)

    def forward(self, a):
        return self.sign * logsumexp_sorted(self._scaled(a), axis=1) / self.beta

    def backward(self, a, g):
        gx = np.zeros(a.shape)
        contrib = self.weights(a) * g[:, None]
        np.add.at(gx, self._idx[self._mask], contrib[self._mask])
        return gx

    def to_dict(self):
        return {"kind": self.kind, "groups": [list(g) for g in self.groups],
                "sign": self.sign, "beta": self.beta}


LAYER_KINDS = {cls.kind: cls for cls in
               (Dense, Conv2D, ReLU, MaxPool2D, AvgPool2D, Flatten, SoftMinHead, LogSumExpPool)}


@dataclass(frozen=True, eq=False)
class Network:
    layers: tuple
    input_shape: tuple
    name: str = ""
    labels: tuple = ()

    def __post_init__(self):
        layers = tuple(self.layers)
        shape = tuple(int(s) for s in self.input_shape)
        shapes = [shape]
        for i, layer in enumerate(layers):
            try:
                shape = tuple(layer.output_shape(shape))
            except ModelFormatError as exc:
                raise ModelFormatError(str(exc), layer=i) from None
            shapes.append(shape)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "input_shape", shapes[0])
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "shapes", tuple(shapes))

    @property
    def output_shape(self):
        return self.shapes[-1]

    @property
    def n_outputs(self):
        return int(np.prod(self.output_shape))

    def weighted_indices(self):
        return [i for i, layer in enumerate(self.layers) if layer.weighted]

    def has_bias(self):
        return any(layer.weighted and np.any(layer.b != 0) for layer in self.layers)


@dataclass(frozen=True)
class ActivationTrace:
    """Input activation of every layer plus the final output: ``len == L + 1``."""

    activations: tuple

    def __len__(self):
        return len(self.activations)

    def __getitem__(self, i):
        return self.activations[i]


def _check_input(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != net.input_shape:
        raise InputShapeError(f"input shape {x.shape} != network input shape {net.input_shape}")
    if not np.all(np.isfinite(x)):
        raise NumericsError("input contains NaN or Inf")
    return x


def resolve_target(net, output, target):
    """``None`` selects the single output, or the argmax for multi-output nets."""
    n = net.n_outputs
    if target is None:
        return 0 if n == 1 else int(np.argmax(output.ravel()))
    target = int(target)
    if not 0 <= target < n:
        raise InputShapeError(f"target {target} out of range for {n} outputs")
    return target


def run(net, x):
    """Forward pass returning the full :class:`ActivationTrace`."""
    a = _check_input(net, x)
    acts = [a]
    for i, layer in enumerate(net.layers):
        # overflow is reported by the finiteness check, not as a warning
        with np.errstate(over="ignore", invalid="ignore"):
            a = layer.forward(a)
        _check_finite(a, f"layer {i} ({layer.kind})")
        acts.append(a)
    return ActivationTrace(tuple(acts))


def predict(net, x):
    return run(net, x)[-1]


def forward(net, x, target=None):
    """Scalar output ``f(x)`` for the selected target plus the activation trace."""
    trace = run(net, x)
    t = resolve_target(net, trace[-1], target)
    return float(trace[-1].ravel()[t]), trace


def backward(net, trace, g):
    for i in range(len(net.layers) - 1, -1, -1):
        g = net.layers[i].backward(trace[i], g)
    return g


def gradient(net, x, target=None):
    """Exact gradient of the selected output w.r.t. the input."""
    trace = run(net, x)
    t = resolve_target(net, trace[-1], target)
    g = np.zeros(trace[-1].size)
    g[t] = 1.0
    return backward(net, trace, g.reshape(trace[-1].shape))


def value_and_gradient(net, x, target=None):
    trace = run(net, x)
    t = resolve_target(net, trace[-1], target)
    g = np.zeros(trace[-1].size)
    g[t] = 1.0
    return float(trace[-1].ravel()[t]), backward(net, trace, g.reshape(trace[-1].shape))
