import numpy as np

from ..errors import ConfigError
from ..runtime import predict
from .lrp import lrp


def bilrp(net, x, x_prime, rules=None):
    """Attribute the similarity ``<phi(x), phi(x')>`` to pairs of input features.

    Each embedding component m gets its own LRP branch on both inputs; the pair
    relevance is ``R[i, i'] = sum_m R^m_i(x) R^m_i'(x')`` with flat feature indices.
    """
    phi, phi_p = predict(net, x), predict(net, x_prime)
    if phi.shape != phi_p.shape or phi.ndim != 1:
        raise ConfigError(f"embedding dimensions differ or are not flat: {phi.shape} vs {phi_p.shape}")
    m = phi.size
    left = np.empty((m, np.size(x)))
    right = np.empty((m, np.size(x_prime)))
    for k in range(m):
        left[k] = lrp(net, x, rules, target=k).relevance.ravel()
        right[k] = lrp(net, x_prime, rules, target=k).relevance.ravel()
    return left.T @ right


def similarity(net, x, x_prime):
    return float(np.dot(predict(net, x), predict(net, x_prime)))
