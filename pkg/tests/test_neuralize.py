import numpy as np
import pytest
from scipy.special import logsumexp

from attribex.attribution import lrp
from attribex.errors import ConfigError, ModelFormatError, NumericsError
from attribex.fixtures import three_cluster_kkm
from attribex.neuralize import (KernelKMeansModel, kkm_logit_direct, kkm_neuralize, load_kkm,
                                neuralize_logit, save_kkm)
from attribex.runtime import Dense, Network, ReLU, forward, predict
from attribex.theory import random_relu_net


def kkm_oracle(model, x, c):
    # plain-probability form: P(c|x) from powered kernel densities
    dens = np.array([np.exp(-model.gamma * np.sum((reps - x) ** 2, axis=1)).sum() / model.Z[k]
                     for k, reps in enumerate(model.clusters)])
    p = dens ** (model.beta / model.gamma)
    p = p / p.sum()
    return np.log(p[c] / (1 - p[c]))


def test_mirrored_clusters_give_zero_logit():
    m = KernelKMeansModel(([[1.0, 0.0]], [[-1.0, 0.0]]), 1.0, 2.0, [1.0, 1.0])
    assert kkm_logit_direct(m, [0.0, 3.0], 0) == 0.0


def test_own_representative_wins():
    m = KernelKMeansModel(([[0.0, 0.0]], [[10.0, 10.0]]), 1.0, 1.0, [1.0, 1.0])
    assert kkm_logit_direct(m, [0.0, 0.0], 0) > 50


def test_direct_matches_probability_oracle():
    m = three_cluster_kkm(0)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.uniform(-2, 2, 2)
        for c in range(3):
            assert kkm_logit_direct(m, x, c) == pytest.approx(kkm_oracle(m, x, c), rel=1e-9)


def test_singleton_clusters_reduce_to_linear():
    x1, x2 = np.array([1.0, 2.0]), np.array([-0.5, 0.25])
    m = KernelKMeansModel(([x1], [x2]), 0.7, 1.3, [2.0, 3.0])
    net = kkm_neuralize(m, 0)
    w = 2 * (x1 - x2)
    b = x2 @ x2 - x1 @ x1 + (np.log(3.0) - np.log(2.0)) / 0.7
    for x in np.random.default_rng(0).standard_normal((5, 2)):
        assert forward(net, x)[0] == pytest.approx(1.3 * (w @ x + b), rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("c", range(3))
def test_neuralized_matches_direct(c):
    m = three_cluster_kkm(0)
    net = kkm_neuralize(m, c)
    xs = np.random.default_rng(2).uniform(-3, 3, (100, 2))
    err = max(abs(forward(net, x)[0] - kkm_logit_direct(m, x, c)) / max(abs(kkm_logit_direct(m, x, c)), 1e-12)
              for x in xs)
    assert err < 1e-6


def test_grid_agreement_other_parameters():
    m = three_cluster_kkm(3, per_cluster=4, gamma=1.5, beta=0.7)
    g = np.linspace(-3, 3, 9)
    for c in range(3):
        net = kkm_neuralize(m, c)
        for a in g:
            for b in g:
                x = np.array([a, b])
                d = kkm_logit_direct(m, x, c)
                assert abs(forward(net, x)[0] - d) <= 1e-6 * max(abs(d), 1.0)


def test_lrp_conservation_with_absorbed_bias():
    m = three_cluster_kkm(0)
    rng = np.random.default_rng(4)
    for c in range(3):
        net = kkm_neuralize(m, c)
        for _ in range(5):
            x = rng.uniform(-2, 2, 2)
            e = lrp(net, x)
            logit = forward(net, x)[0]
            assert abs(e.sum_relevance + e.extras["bias_relevance"] - logit) <= 1e-5 * max(abs(logit), 1.0)


def test_cluster_relabeling_permutes_logits():
    m = three_cluster_kkm(0)
    perm = [2, 0, 1]
    m2 = KernelKMeansModel(tuple(m.clusters[p] for p in perm), m.gamma, m.beta, m.Z[perm])
    x = np.array([0.3, 1.1])
    a = [kkm_logit_direct(m, x, c) for c in range(3)]
    b = [kkm_logit_direct(m2, x, c) for c in range(3)]
    np.testing.assert_allclose(b, [a[p] for p in perm], rtol=1e-12)
    assert perm[int(np.argmax(b))] == int(np.argmax(a))


def test_far_point_stays_finite_then_overflows():
    m = KernelKMeansModel(([[0.0]], [[1.0]]), 1e3, 1.0, [1.0, 1.0])
    # exp(-gamma d^2) underflows but the log-domain sum does not
    assert np.isfinite(kkm_logit_direct(m, [1e6], 0))
    with pytest.raises(NumericsError):
        kkm_logit_direct(m, [1e200], 0)


@pytest.mark.parametrize("kwargs", [
    dict(clusters=([[0.0]],), gamma=1.0, beta=1.0, Z=[1.0]),
    dict(clusters=([[0.0]], [[1.0]]), gamma=0.0, beta=1.0, Z=[1.0, 1.0]),
    dict(clusters=([[0.0]], [[1.0]]), gamma=1.0, beta=1.0, Z=[1.0, -1.0]),
    dict(clusters=([[0.0]], [[1.0, 2.0]]), gamma=1.0, beta=1.0, Z=[1.0, 1.0]),
])
def test_invalid_models(kwargs):
    with pytest.raises(ConfigError):
        KernelKMeansModel(**kwargs)


def test_unknown_cluster():
    with pytest.raises(ConfigError):
        kkm_neuralize(three_cluster_kkm(0), 3)


def test_kkm_file_round_trip(tmp_path):
    m = three_cluster_kkm(0)
    save_kkm(m, tmp_path / "k.json")
    back = load_kkm(tmp_path / "k.json")
    assert all(np.array_equal(a, b) for a, b in zip(m.clusters, back.clusters))
    assert (back.gamma, back.beta) == (m.gamma, m.beta)
    (tmp_path / "bad.json").write_text('{"gamma": 1}')
    with pytest.raises(ModelFormatError):
        load_kkm(tmp_path / "bad.json")


# --- logit heads -----------------------------------------------------------------

def classifier(seed, classes, d=5):
    return random_relu_net(np.random.default_rng(seed), d, hidden=(8,), bias=True, outputs=classes)


def test_two_class_head_is_exact_difference():
    net = classifier(0, 2)
    x = np.random.default_rng(1).standard_normal(5)
    s = predict(net, x)
    for beta in (0.1, 1.0, 50.0):
        assert forward(neuralize_logit(net, 0, beta), x)[0] == pytest.approx(s[0] - s[1], abs=1e-12)


def test_logit_equals_softmax_log_odds():
    net = classifier(2, 4)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.standard_normal(5)
        s = predict(net, x)
        for c in range(4):
            p = np.exp(s - logsumexp(s))
            assert forward(neuralize_logit(net, c), x)[0] == pytest.approx(np.log(p[c] / (1 - p[c])), abs=1e-6)


def test_hard_min_limit():
    net = classifier(4, 3)
    x = np.random.default_rng(5).standard_normal(5)
    s = predict(net, x)
    hard = min(s[0] - s[1], s[0] - s[2])
    assert abs(forward(neuralize_logit(net, 0, 1e3), x)[0] - hard) < 1e-3


def test_sharpness_monotone():
    net = classifier(6, 5)
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = rng.standard_normal(5)
        s = predict(net, x)
        hard = min(s[0] - s[k] for k in range(1, 5))
        vals = [forward(neuralize_logit(net, 0, b), x)[0] for b in (1, 10, 100, 1000)]
        assert all(v <= hard + 1e-12 for v in vals)
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_competitor_order_bit_identical():
    net = classifier(8, 4)
    x = np.random.default_rng(9).standard_normal(5)
    head = neuralize_logit(net, 1, 3.0)
    sm = head.layers[-1]
    perm = [2, 0, 1]
    shuffled = Network(head.layers[:-1] + (type(sm)(sm.W[perm], sm.b[perm], sm.beta),), head.input_shape)
    assert forward(head, x)[0] == forward(shuffled, x)[0]


def test_neuralize_logit_errors():
    single = Network((Dense(np.ones((1, 3))),), (3,))
    with pytest.raises(ConfigError):
        neuralize_logit(single, 0)
    with pytest.raises(ConfigError):
        neuralize_logit(Network((Dense(np.ones((2, 3))), ReLU()), (3,)), 0)
    with pytest.raises(ConfigError):
        neuralize_logit(classifier(0, 3), 5)


def test_logit_head_lrp_conserves():
    net = random_relu_net(np.random.default_rng(10), 5, hidden=(8,), bias=False, outputs=3)
    x = np.abs(np.random.default_rng(11).standard_normal(5))
    c = int(np.argmax(predict(net, x)))
    head = neuralize_logit(net, c)
    e = lrp(head, x)
    f = forward(head, x)[0]
    assert abs(e.sum_relevance + e.extras["bias_relevance"] - f) <= 1e-6 * abs(f)
