"""numba-compiled kernels. Loop order fixes the floating-point summation order,
so results are bit-identical across runs."""
import math

import numpy as np

from .._jit import njit


@njit
def _pad(x, pad):
    C, H, W = x.shape
    xp = np.zeros((C, H + 2 * pad, W + 2 * pad))
    xp[:, pad:pad + H, pad:pad + W] = x
    return xp


@njit
def _conv2d_forward(x, w, b, stride, pad):
    xp = _pad(x, pad)
    C, Hp, Wp = xp.shape
    O, _, kh, kw = w.shape
    Ho = (Hp - kh) // stride + 1
    Wo = (Wp - kw) // stride + 1
    out = np.empty((O, Ho, Wo))
    for o in range(O):
        out[o] = b[o]
        for c in range(C):
            for ky in range(kh):
                for kx in range(kw):
                    wv = w[o, c, ky, kx]
                    if wv == 0.0:
                        continue
                    for oy in range(Ho):
                        iy = oy * stride + ky
                        for ox in range(Wo):
                            out[o, oy, ox] += wv * xp[c, iy, ox * stride + kx]
    return out


def conv2d_forward(x, w, b, stride, pad):
    return _conv2d_forward(np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(w),
                           np.ascontiguousarray(b, dtype=np.float64), stride, pad)


@njit
def _conv2d_backward_input(g, w, C, H, W, stride, pad):
    O, _, kh, kw = w.shape
    Ho, Wo = g.shape[1], g.shape[2]
    gp = np.zeros((C, H + 2 * pad, W + 2 * pad))
    for o in range(O):
        for c in range(C):
            for ky in range(kh):
                for kx in range(kw):
                    wv = w[o, c, ky, kx]
                    if wv == 0.0:
                        continue
                    for oy in range(Ho):
                        iy = oy * stride + ky
                        for ox in range(Wo):
                            gp[c, iy, ox * stride + kx] += wv * g[o, oy, ox]
    return gp[:, pad:pad + H, pad:pad + W].copy()


def conv2d_backward_input(g, w, in_shape, stride, pad):
    C, H, W = in_shape
    return _conv2d_backward_input(np.ascontiguousarray(g, dtype=np.float64), np.ascontiguousarray(w),
                                  C, H, W, stride, pad)


@njit
def maxpool_forward(x, size, stride):
    C, H, W = x.shape
    Ho = (H - size) // stride + 1
    Wo = (W - size) // stride + 1
    out = np.empty((C, Ho, Wo))
    arg = np.empty((C, Ho, Wo), dtype=np.int64)
    for c in range(C):
        for oy in range(Ho):
            for ox in range(Wo):
                best = -np.inf
                bi = -1
                for ky in range(size):
                    for kx in range(size):
                        iy = oy * stride + ky
                        ix = ox * stride + kx
                        v = x[c, iy, ix]
                        if bi < 0 or v > best:
                            best = v
                            bi = iy * W + ix
                out[c, oy, ox] = best
                arg[c, oy, ox] = bi
    return out, arg


@njit
def _maxpool_backward(g, arg, C, H, W):
    gx = np.zeros((C, H * W))
    for c in range(C):
        for oy in range(g.shape[1]):
            for ox in range(g.shape[2]):
                gx[c, arg[c, oy, ox]] += g[c, oy, ox]
    return gx.reshape((C, H, W))


def maxpool_backward(g, arg, in_shape):
    C, H, W = in_shape
    return _maxpool_backward(g, arg, C, H, W)


@njit
def avgpool_forward(x, size, stride):
    C, H, W = x.shape
    Ho = (H - size) // stride + 1
    Wo = (W - size) // stride + 1
    out = np.empty((C, Ho, Wo))
    n = size * size
    for c in range(C):
        for oy in range(Ho):
            for ox in range(Wo):
                acc = 0.0
                for ky in range(size):
                    for kx in range(size):
                        acc += x[c, oy * stride + ky, ox * stride + kx]
                out[c, oy, ox] = acc / n
    return out


@njit
def _avgpool_backward(g, C, H, W, size, stride):
    gx = np.zeros((C, H, W))
    n = size * size
    for c in range(C):
        for oy in range(g.shape[1]):
            for ox in range(g.shape[2]):
                share = g[c, oy, ox] / n
                for ky in range(size):
                    for kx in range(size):
                        gx[c, oy * stride + ky, ox * stride + kx] += share
    return gx


def avgpool_backward(g, in_shape, size, stride):
    C, H, W = in_shape
    return _avgpool_backward(g, C, H, W, size, stride)


@njit
def _popcount(m):
    c = 0
    while m:
        m &= m - 1
        c += 1
    return c


@njit
def _shapley(values, d, alpha):
    phi = np.zeros(d)
    n = 1 << d
    for i in range(d):
        bit = 1 << i
        acc = 0.0
        for m in range(n):
            if m & bit:
                continue
            acc += alpha[_popcount(m)] * (values[m | bit] - values[m])
        phi[i] = acc
    return phi


def shapley_from_values(values, d):
    alpha = np.array([math.factorial(s) * math.factorial(d - 1 - s) / math.factorial(d)
                      for s in range(d)])
    return _shapley(values, d, alpha)


@njit
def _interaction(values, d, i, j, alpha):
    bi = 1 << i
    bj = 1 << j
    acc = 0.0
    for m in range(1 << d):
        if m & (bi | bj):
            continue
        acc += alpha[_popcount(m)] * (values[m | bi | bj] - values[m | bi] - values[m | bj] + values[m])
    return acc


def interaction_from_values(values, d, i, j):
    alpha = np.array([math.factorial(s) * math.factorial(d - 2 - s) / (2 * math.factorial(d - 1))
                      for s in range(d - 1)])
    return float(_interaction(values, d, i, j, alpha))


@njit
def _jacobi(a, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n)
    scale = math.sqrt(np.sum(a * a))
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += a[p, q] * a[p, q]
        if math.sqrt(off) <= tol * max(scale, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sgn = 1.0 if theta >= 0.0 else -1.0
                t = sgn / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for r in range(n):
                    arp = a[r, p]
                    arq = a[r, q]
                    a[r, p] = c * arp - s * arq
                    a[r, q] = s * arp + c * arq
                for r in range(n):
                    apr = a[p, r]
                    aqr = a[q, r]
                    a[p, r] = c * apr - s * aqr
                    a[q, r] = s * apr + c * aqr
                for r in range(n):
                    vrp = v[r, p]
                    vrq = v[r, q]
                    v[r, p] = c * vrp - s * vrq
                    v[r, q] = s * vrp + c * vrq
    return a, v


def jacobi_eigh(a, tol=1e-14, max_sweeps=100):
    a, v = _jacobi(np.array(a, dtype=np.float64, copy=True), tol, max_sweeps)
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
