"""Dataset-wide explanation analysis: relevance pooling over feature and sample
groups, and spectral clustering / embedding of normalized explanations."""
from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np
from scipy.ndimage import gaussian_filter

from . import kernels
from .errors import ConfigError


@dataclass
class RelevanceMatrix:
    """N x d relevances, one row per sample."""

    R: np.ndarray
    sample_ids: list = None
    feature_names: list = None

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=np.float64)
        if self.R.ndim != 2:
            raise ConfigError("relevance matrix must be 2-D (samples x features)")
        n, d = self.R.shape
        self.sample_ids = list(range(n)) if self.sample_ids is None else list(self.sample_ids)
        self.feature_names = [str(i) for i in range(d)] if self.feature_names is None else list(self.feature_names)

    @classmethod
    def from_explanations(cls, explanations, sample_ids=None):
        return cls(np.stack([np.ravel(e.relevance) for e in explanations]), sample_ids)


@dataclass
class GroupSpec:
    feature_groups: list
    data_groups: list

    def validate(self, n, d):
        for groups, size, what in ((self.feature_groups, d, "feature"), (self.data_groups, n, "data")):
            flat = sorted(i for g in groups for i in g)
            if any(len(g) == 0 for g in groups) or flat != list(range(size)):
                raise ConfigError(f"{what} groups must be a partition of 0..{size - 1}")


@dataclass
class PooledRelevance:
    """Cells ``R[I, G]`` laid out as (data groups) x (feature groups).

    ``cells`` are correctly rounded; ``exact`` keeps the exact rational sums
    that the conservation check runs on.
    """

    cells: np.ndarray
    exact: list

    def conservation_defect(self, R):
        total = sum((Fraction(float(v)) for v in np.ravel(R)), Fraction(0))
        pooled = sum((c for row in self.exact for c in row), Fraction(0))
        return float(pooled - total)


def pool(R, spec):
    """Sum relevance over each (data group, feature group) cell.

    Members are summed in sorted index order with exact rational arithmetic,
    so the cells partition the grand total exactly.
    """
    M = R.R if isinstance(R, RelevanceMatrix) else np.asarray(R, dtype=np.float64)
    n, d = M.shape
    spec.validate(n, d)
    exact = []
    for G in spec.data_groups:
        rows = sorted(G)
        row = []
        for I in spec.feature_groups:
            cols = sorted(I)
            block = M[np.ix_(rows, cols)].ravel()
            row.append(sum((Fraction(float(v)) for v in block), Fraction(0)))
        exact.append(row)
    cells = np.array([[float(c) for c in row] for row in exact])
    return PooledRelevance(cells, exact)


# --- SpRAy ------------------------------------------------------------------

def normalize_explanations(explanations, blur=None):
    """Optional Gaussian blur over the two trailing axes (kernel truncated at
    3 sigma), then scaling of every explanation to unit L2 norm. All-zero
    explanations stay zero."""
    X = np.asarray(explanations, dtype=np.float64)
    if blur and X.ndim >= 3:
        sigma = [0.0] * (X.ndim - 2) + [blur, blur]
        X = np.stack([gaussian_filter(x, sigma=sigma[1:], truncate=3.0, mode="constant") for x in X])
    flat = X.reshape(X.shape[0], -1)
    norms = np.sqrt(np.sum(flat * flat, axis=1))
    out = np.zeros(flat.shape)
    nz = norms > 0
    out[nz] = flat[nz] / norms[nz, None]
    return out


def knn_affinity(X, n_neighbors=10):
    """Symmetric k-NN graph with Gaussian weights ``exp(-d^2 / (s_i s_j))``,
    where ``s_i`` is the median distance from point i to its neighbours."""
    n = X.shape[0]
    k = min(n_neighbors, n - 1)
    sq = np.sum(X * X, axis=1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(D2, 0.0)
    D = np.sqrt(D2)
    order = np.argsort(D + np.diag(np.full(n, np.inf)), axis=1, kind="stable")[:, :k]
    scale = np.median(np.take_along_axis(D, order, axis=1), axis=1)
    A = np.zeros((n, n), dtype=bool)
    A[np.repeat(np.arange(n), k), order.ravel()] = True
    A = A | A.T
    ss = scale[:, None] * scale[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        Wt = np.where(D2 == 0, 1.0, np.exp(-D2 / np.where(ss > 0, ss, np.inf)))
    Wt = np.where(A, Wt, 0.0)
    np.fill_diagonal(Wt, 0.0)
    return Wt


def normalized_laplacian(Wt):
    deg = Wt.sum(axis=1)
    inv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    L = np.eye(Wt.shape[0]) - inv[:, None] * Wt * inv[None, :]
    return (L + L.T) / 2.0


def kmeans(X, k, seed, restarts=20, max_iter=300):
    """Lloyd's algorithm; each restart seeds from k distinct random points drawn
    from ``default_rng(seed + restart)``. Returns labels of the lowest-inertia run."""
    n = X.shape[0]
    best_labels, best_inertia = None, math.inf
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        centers = X[rng.choice(n, size=k, replace=False)].copy()
        labels = np.full(n, -1)
        for _ in range(max_iter):
            d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
            new = np.argmin(d2, axis=1)
            if np.array_equal(new, labels):
                break
            labels = new
            for c in range(k):
                members = X[labels == c]
                if len(members):
                    centers[c] = members.mean(axis=0)
        inertia = float(np.sum((X - centers[labels]) ** 2))
        if inertia < best_inertia - 1e-12:
            best_labels, best_inertia = labels.copy(), inertia
    return canonical_labels(best_labels)


def canonical_labels(labels):
    """Renumber clusters by first appearance so equal partitions get equal labels."""
    mapping = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        out[i] = mapping.setdefault(int(lab), len(mapping))
    return out


def adjusted_rand_index(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    comb = lambda v: v * (v - 1) / 2.0  # noqa: E731
    index = comb(table).sum()
    sa, sb = comb(table.sum(axis=1)).sum(), comb(table.sum(axis=0)).sum()
    expected = sa * sb / comb(len(a)) if len(a) > 1 else 0.0
    top = (sa + sb) / 2.0
    if top == expected:
        return 1.0
    return float((index - expected) / (top - expected))


@dataclass
class SprayResult:
    normalized: np.ndarray
    affinity: np.ndarray
    labels: np.ndarray
    embedding: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {"labels": self.labels.tolist(), "embedding": self.embedding.tolist(),
                "eigenvalues": self.eigenvalues.tolist()}


def default_blur(sample_shape):
    """One pixel for grid-shaped explanations, none for tabular ones."""
    return 1.0 if len(sample_shape) >= 2 else None


def spray(explanations, k=2, blur="auto", seed=0, n_neighbors=10, restarts=20):
    """Cluster and embed a stack of explanations.

    Steps: normalize (blur, by default one pixel on grid data; unit norm), symmetric k-NN Gaussian affinity,
    normalized Laplacian eigendecomposition by cyclic Jacobi, seeded k-means on
    the row-normalized k smallest eigenvectors, and a 2-D Laplacian-eigenmap
    embedding from the two smallest nontrivial eigenvectors.
    """
    X = np.asarray([getattr(e, "relevance", e) for e in explanations], dtype=np.float64)
    n = X.shape[0]
    if k < 2:
        raise ConfigError("k must be >= 2")
    if k > n:
        raise ConfigError(f"k={k} exceeds the number of explanations ({n})")
    if blur == "auto":
        blur = default_blur(X.shape[1:])
    Xn = normalize_explanations(X, blur)
    if np.all(Xn == Xn[0]):
        Wt = np.ones((n, n)) - np.eye(n)
        return SprayResult(Xn, Wt, np.zeros(n, dtype=np.int64), np.zeros((n, 2)), np.zeros(n))
    Wt = knn_affinity(Xn, n_neighbors)
    L = normalized_laplacian(Wt)
    evals, evecs = kernels.jacobi_eigh(L)
    U = evecs[:, :k]
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    U = U / np.where(norms > 0, norms, 1.0)
    labels = kmeans(U, k, seed, restarts)
    deg = Wt.sum(axis=1)
    inv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    embedding = inv[:, None] * evecs[:, 1:3]
    if embedding.shape[1] < 2:
        embedding = np.hstack([embedding, np.zeros((n, 2 - embedding.shape[1]))])
    return SprayResult(Xn, Wt, labels, embedding, evals, evecs)
