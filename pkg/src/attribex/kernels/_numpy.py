"""Pure-numpy kernels. Same signatures and semantics as the numba twins."""
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _out_size(n, k, stride, pad):
    return (n + 2 * pad - k) // stride + 1


def conv2d_forward(x, w, b, stride, pad):
    kh, kw = w.shape[2], w.shape[3]
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.einsum("chwij,ocij->ohw", win, w, optimize=True)
    return out + b[:, None, None]


def conv2d_backward_input(g, w, in_shape, stride, pad):
    C, H, W = in_shape
    kh, kw = w.shape[2], w.shape[3]
    Ho, Wo = g.shape[1], g.shape[2]
    gp = np.zeros((C, H + 2 * pad, W + 2 * pad))
    for ky in range(kh):
        for kx in range(kw):
            contrib = np.einsum("ohw,oc->chw", g, w[:, :, ky, kx])
            gp[:, ky:ky + stride * (Ho - 1) + 1:stride, kx:kx + stride * (Wo - 1) + 1:stride] += contrib
    return gp[:, pad:pad + H, pad:pad + W].copy()


def maxpool_forward(x, size, stride):
    C, H, W = x.shape
    win = sliding_window_view(x, (size, size), axis=(1, 2))[:, ::stride, ::stride]
    Ho, Wo = win.shape[1], win.shape[2]
    flat = win.reshape(C, Ho, Wo, size * size)
    k = np.argmax(flat, axis=-1)  # first occurrence == lowest flat index
    out = np.take_along_axis(flat, k[..., None], axis=-1)[..., 0]
    ky, kx = np.divmod(k, size)
    oy = np.arange(Ho)[None, :, None] * stride
    ox = np.arange(Wo)[None, None, :] * stride
    arg = (oy + ky) * W + (ox + kx)
    return out, arg.astype(np.int64)


def maxpool_backward(g, arg, in_shape):
    C, H, W = in_shape
    gx = np.zeros((C, H * W))
    ch = np.broadcast_to(np.arange(C)[:, None, None], arg.shape)
    np.add.at(gx, (ch.ravel(), arg.ravel()), g.ravel())
    return gx.reshape(C, H, W)


def avgpool_forward(x, size, stride):
    win = sliding_window_view(x, (size, size), axis=(1, 2))[:, ::stride, ::stride]
    return win.sum(axis=(-2, -1)) / (size * size)


def avgpool_backward(g, in_shape, size, stride):
    C, H, W = in_shape
    Ho, Wo = g.shape[1], g.shape[2]
    gx = np.zeros((C, H, W))
    share = g / (size * size)
    for ky in range(size):
        for kx in range(size):
            gx[:, ky:ky + stride * (Ho - 1) + 1:stride, kx:kx + stride * (Wo - 1) + 1:stride] += share
    return gx


def _popcounts(d):
    masks = np.arange(1 << d, dtype=np.int64)
    counts = np.zeros(1 << d, dtype=np.int64)
    for i in range(d):
        counts += (masks >> i) & 1
    return masks, counts


def shapley_from_values(values, d):
    masks, sizes = _popcounts(d)
    alpha = np.array([math.factorial(s) * math.factorial(d - 1 - s) / math.factorial(d)
                      for s in range(d)])
    phi = np.zeros(d)
    for i in range(d):
        bit = 1 << i
        sel = masks[(masks & bit) == 0]
        phi[i] = np.sum(alpha[sizes[sel]] * (values[sel | bit] - values[sel]))
    return phi


def interaction_from_values(values, d, i, j):
    masks, sizes = _popcounts(d)
    alpha = np.array([math.factorial(s) * math.factorial(d - 2 - s) / (2 * math.factorial(d - 1))
                      for s in range(d - 1)])
    bi, bj = 1 << i, 1 << j
    sel = masks[(masks & (bi | bj)) == 0]
    delta = values[sel | bi | bj] - values[sel | bi] - values[sel | bj] + values[sel]
    return float(np.sum(alpha[sizes[sel]] * delta))


def jacobi_eigh(a, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns eigenvalues in ascending order and the matching eigenvectors as
    columns.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.sqrt(np.sum(a * a))
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a * a) - np.sum(np.diag(a) ** 2))
        if off <= tol * max(scale, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :]
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
