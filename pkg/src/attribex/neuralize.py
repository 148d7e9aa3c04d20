"""Rewrite shallow models as detection/pooling networks so relevance
propagation applies to them.

Kernel k-means with a Gaussian kernel ``exp(-gamma ||x - x'||^2)`` gives the
cluster log-odds

    beta * softmin^beta_{k != c} softmin^gamma_{j in C_k} softmax^gamma_{i in C_c}
        (w_ij . x + b_ijk)

with ``w_ij = 2 (x_i - x_j)`` and
``b_ijk = ||x_j||^2 - ||x_i||^2 + (log Z_k - log Z_c) / gamma``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ModelFormatError, NumericsError
from .io import read_json, write_json
from .runtime import Dense, LogSumExpPool, Network, SoftMinHead, logsumexp_sorted


@dataclass(frozen=True, eq=False)
class KernelKMeansModel:
    clusters: tuple
    gamma: float
    beta: float
    Z: np.ndarray

    def __post_init__(self):
        clusters = tuple(np.atleast_2d(np.asarray(c, dtype=np.float64)) for c in self.clusters)
        if len(clusters) < 2:
            raise ConfigError("kernel k-means needs at least two clusters")
        dims = {c.shape[1] for c in clusters}
        if len(dims) != 1 or any(c.shape[0] < 1 for c in clusters):
            raise ConfigError("every cluster needs >= 1 representative of a common dimension")
        Z = np.asarray(self.Z, dtype=np.float64)
        if Z.shape != (len(clusters),) or np.any(Z <= 0):
            raise ConfigError("need one positive normalizer per cluster")
        if not (self.gamma > 0 and self.beta > 0):
            raise ConfigError("gamma and beta must be > 0")
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self):
        return self.clusters[0].shape[1]

    @property
    def n_clusters(self):
        return len(self.clusters)

    def to_dict(self):
        return {"gamma": self.gamma, "beta": self.beta, "Z": self.Z.tolist(),
                "clusters": [c.ravel().tolist() for c in self.clusters], "dim": self.dim}

    @classmethod
    def from_dict(cls, doc):
        try:
            dim = int(doc["dim"])
            clusters = [np.array(c, dtype=np.float64).reshape(-1, dim) for c in doc["clusters"]]
            return cls(tuple(clusters), float(doc["gamma"]), float(doc["beta"]), np.array(doc["Z"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed kernel k-means file: {exc}") from None


def save_kkm(model, path):
    write_json(path, model.to_dict())


def load_kkm(path):
    return KernelKMeansModel.from_dict(read_json(path))


def _check_cluster(model, c):
    if not 0 <= c < model.n_clusters:
        raise ConfigError(f"cluster {c} does not exist")


def kkm_logit_direct(model, x, c):
    """``log[P(c|x) / (1 - P(c|x))]`` evaluated in the log domain."""
    _check_cluster(model, c)
    x = np.asarray(x, dtype=np.float64).ravel()
    with np.errstate(over="ignore", divide="ignore"):
        log_density = np.array([
            logsumexp_sorted(-model.gamma * np.sum((reps - x) ** 2, axis=1)) - np.log(model.Z[k])
            for k, reps in enumerate(model.clusters)])
    if not np.all(np.isfinite(log_density)):
        raise NumericsError("kernel sum underflowed to zero")
    r = model.beta / model.gamma
    others = np.delete(r * log_density, c)
    return float(r * log_density[c] - logsumexp_sorted(others))


def kkm_neuralize(model, c):
    """Detection layer, soft-max over C_c, soft-min over C_k, soft-min over
    competitors k, then scaling by beta."""
    _check_cluster(model, c)
    reps_c = model.clusters[c]
    n_c = reps_c.shape[0]
    rows, bias, pool_i, pool_j = [], [], [], []
    unit = 0
    for k, reps_k in enumerate(model.clusters):
        if k == c:
            continue
        shift = (np.log(model.Z[k]) - np.log(model.Z[c])) / model.gamma
        j_group = []
        for xj in reps_k:
            pool_i.append(list(range(unit, unit + n_c)))
            j_group.append(len(pool_i) - 1)
            for xi in reps_c:
                rows.append(2.0 * (xi - xj))
                bias.append(xj @ xj - xi @ xi + shift)
                unit += 1
        pool_j.append(j_group)
    layers = (
        Dense(np.array(rows), np.array(bias)),
        LogSumExpPool(pool_i, sign=1, beta=model.gamma),
        LogSumExpPool(pool_j, sign=-1, beta=model.gamma),
        LogSumExpPool([list(range(len(pool_j)))], sign=-1, beta=model.beta),
        Dense(np.array([[model.beta]])),
    )
    return Network(layers, (model.dim,), name=f"kkm-logit-{c}")


def neuralize_logit(net, c, beta=1.0):
    """Replace the final Dense class-score layer by a soft-min over
    ``(w_c - w_k) . a + (b_c - b_k)``; ``beta=1`` reproduces the softmax log-odds."""
    if not net.layers or not isinstance(net.layers[-1], Dense):
        raise ConfigError("the network must end in a Dense class-score layer")
    head = net.layers[-1]
    n_classes = head.W.shape[0]
    if n_classes < 2:
        raise ConfigError("a single-class model has no competitors")
    if not 0 <= c < n_classes:
        raise ConfigError(f"class {c} does not exist")
    others = [k for k in range(n_classes) if k != c]
    W = head.W[c][None, :] - head.W[others]
    b = head.b[c] - head.b[others]
    label = net.labels[c] if c < len(net.labels) else str(c)
    return Network(net.layers[:-1] + (SoftMinHead(W, b, beta),), net.input_shape,
                   name=f"{net.name}-logit-{label}", labels=(label,))
