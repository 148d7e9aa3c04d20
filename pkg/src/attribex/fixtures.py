"""Seeded desk-scale fixtures: random dense/conv nets, a handcrafted
planted-pattern detector CNN with known relevant pixels, a 2-D three-cluster
kernel k-means model, and a planted two-strategy explanation set."""
from pathlib import Path
import math

import numpy as np

from .io import save_data, save_model, write_json
from .neuralize import KernelKMeansModel, save_kkm
from .runtime import AvgPool2D, Conv2D, Dense, Flatten, MaxPool2D, Network, ReLU
from .theory import random_relu_net

IMAGE = 16
PLUS = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))


def random_conv_net(rng, bias=False, size=8, channels=4):
    def b(n):
        return 0.1 * rng.standard_normal(n) if bias else None

    c1 = Conv2D(rng.standard_normal((channels, 1, 3, 3)) / 3.0, b(channels), stride=1, pad=1)
    c2 = Conv2D(rng.standard_normal((channels, channels, 3, 3)) / math.sqrt(9 * channels), b(channels), pad=1)
    side = size // 4
    head = Dense(rng.standard_normal((1, channels * side * side)) / math.sqrt(channels * side * side), b(1))
    layers = (c1, ReLU(), MaxPool2D(2), c2, ReLU(), AvgPool2D(2), Flatten(), head)
    return Network(layers, (1, size, size), name="random-conv" + ("-bias" if bias else ""))


def planted_cnn(seed=0, textures=2, teeth=12, delta=0.05, slope=2.0, hidden=6):
    """Detector for a 5-pixel plus sign on a dim noisy background.

    Channel 0 of the first convolution is a thresholded matched filter that
    fires only on a complete plus, and is summed straight into the class-0
    score. The other channels are random texture filters passed through a
    ReLU zig-zag (a triangle wave of height ``slope * delta``): their value,
    and hence the effect of removing pixels, stays small, but the gradient
    flips between +slope and -slope, like the shattered gradients of a deep
    net. Class 0 is "plus present", class 1 its negation.
    """
    rng = np.random.default_rng(seed)
    plus = np.full((3, 3), -0.5)
    for dy, dx in PLUS:
        plus[1 + dy, 1 + dx] = 1.0
    W1 = np.zeros((1 + textures, 1, 3, 3))
    W1[0, 0] = plus
    tex = rng.standard_normal((textures, 3, 3))
    # positive mean keeps the texture units active on the background
    W1[1:, 0] = tex - tex.mean(axis=(1, 2), keepdims=True) + 0.3
    conv1 = Conv2D(W1, np.r_[-1.5, np.zeros(textures)], pad=1)

    # ramps ReLU(y - k delta), recombined with alternating slopes
    n_ramp = 1 + textures * teeth
    W2 = np.zeros((n_ramp, 1 + textures, 1, 1))
    b2 = np.zeros(n_ramp)
    W3 = np.zeros((1 + textures, n_ramp, 1, 1))
    W2[0, 0] = W3[0, 0] = 1.0
    slopes = slope * np.array([(-1.0) ** k for k in range(teeth)])
    coef = np.diff(np.r_[0.0, slopes])
    for t in range(textures):
        for k in range(teeth):
            ch = 1 + t * teeth + k
            W2[ch, 1 + t] = 1.0
            b2[ch] = -k * delta
            W3[1 + t, ch] = coef[k]
    conv2 = Conv2D(W2, b2)
    conv3 = Conv2D(W3, None)

    side = IMAGE // 2
    n = side * side
    W4 = np.zeros((hidden, (1 + textures) * n))
    W4[0, :n] = 1.0
    W4[1:, n:] = rng.standard_normal((hidden - 1, textures * n)) / side
    b4 = np.r_[0.0, np.ones(hidden - 1)]
    W5 = np.zeros((2, hidden))
    W5[0, 0] = 1.0
    W5[0, 1:] = 0.5 * rng.choice((-1.0, 1.0), hidden - 1)
    W5[1, 0] = -1.0
    # cancel the constant offset of the always-on texture units
    b5 = np.array([-float(W5[0, 1:] @ b4[1:]), 1.0])
    layers = (conv1, ReLU(), conv2, ReLU(), conv3, ReLU(), MaxPool2D(2), Flatten(),
              Dense(W4, b4), ReLU(), Dense(W5, b5))
    return Network(layers, (1, IMAGE, IMAGE), name="planted-plus", labels=("plus", "no-plus"))


def planted_samples(seed, n, background=0.3):
    """Images in [0, 1] with one plus at a random position; returns
    ``(images, relevant_pixel_sets)`` with flat pixel indices."""
    rng = np.random.default_rng(seed)
    images, truth = [], []
    for _ in range(n):
        img = background * rng.uniform(size=(1, IMAGE, IMAGE))
        r, c = rng.integers(1, IMAGE - 1, size=2)
        idx = []
        for dy, dx in PLUS:
            img[0, r + dy, c + dx] = 1.0
            idx.append(int((r + dy) * IMAGE + c + dx))
        images.append(img)
        truth.append(sorted(idx))
    return images, truth


def three_cluster_kkm(seed=0, per_cluster=5, gamma=0.5, beta=2.0):
    rng = np.random.default_rng(seed)
    centers = np.array([[-2.0, 0.0], [2.0, 0.0], [0.0, 2.5]])
    clusters = tuple(c + 0.5 * rng.standard_normal((per_cluster, 2)) for c in centers)
    return KernelKMeansModel(clusters, gamma, beta, np.full(3, float(per_cluster)))


def planted_strategies(seed=0, n=60, shape=(8, 8), noise=0.1):
    """Explanations whose mass sits on the left (strategy 0) or right
    (strategy 1) half of the features. Returns ``(explanations, labels)``."""
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % 2)
    d = int(np.prod(shape))
    half = d // 2
    out = np.empty((n,) + tuple(shape))
    for i, lab in enumerate(labels):
        r = noise * rng.standard_normal(d)
        sl = slice(0, half) if lab == 0 else slice(half, d)
        r[sl] += np.abs(rng.standard_normal(half))
        out[i] = r.reshape(shape)
    return out, labels


def gen_fixtures(seed, out_dir, n_planted=50):
    """Write the full fixture set to ``out_dir``; returns ``{name: path}``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = {}

    def model(name, net):
        p = out / f"{name}.json"
        save_model(net, p)
        paths[name] = p

    model("dense_nobias", random_relu_net(rng, 8, bias=False))
    model("dense_bias", random_relu_net(rng, 8, bias=True))
    model("conv_nobias", random_conv_net(rng, bias=False))
    model("conv_bias", random_conv_net(rng, bias=True))
    paths["tabular_data"] = out / "tabular_data.json"
    save_data([(rng.standard_normal(8), None) for _ in range(10)], paths["tabular_data"])

    model("planted_cnn", planted_cnn(seed))
    images, truth = planted_samples(seed + 1, n_planted)
    paths["planted_data"] = out / "planted_data.json"
    save_data([(img, 0) for img in images], paths["planted_data"])
    paths["planted_truth"] = out / "planted_truth.json"
    write_json(paths["planted_truth"], {"shape": [1, IMAGE, IMAGE], "relevant_pixels": truth})

    paths["kkm"] = out / "kkm.json"
    save_kkm(three_cluster_kkm(seed), paths["kkm"])

    expl, labels = planted_strategies(seed)
    paths["spray_explanations"] = out / "spray_explanations.json"
    write_json(paths["spray_explanations"], [
        {"method": "planted", "target": 0, "seed": seed, "shape": list(e.shape),
         "relevance": e.ravel().tolist(), "sum": float(math.fsum(e.ravel()))} for e in expl])
    paths["spray_labels"] = out / "spray_labels.json"
    write_json(paths["spray_labels"], {"labels": labels.tolist()})
    return paths
