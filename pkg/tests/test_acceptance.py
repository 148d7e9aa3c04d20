"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py``; the lines are repeated in
the terminal summary.
"""
from fractions import Fraction
import math
import time

import numpy as np
import pytest

from attribex.analysis import GroupSpec, adjusted_rand_index, pool, spray
from attribex.attribution import IGConfig, LRP0, LRPGamma, RuleMap, bilrp, integrated_gradients, lrp
from attribex.attribution.bilrp import similarity
from attribex.evaluation import ImputationPolicy, filesize_proxy, pixel_flip, random_flip_baseline, runtime_bench
from attribex.fixtures import planted_cnn, planted_samples, planted_strategies, random_conv_net, three_cluster_kkm
from attribex.methods import explain
from attribex.neuralize import kkm_logit_direct, kkm_neuralize, neuralize_logit
from attribex.runtime import forward, gradient, predict
from attribex.theory import (CoalitionGame, all_passed, interaction_matrix, interaction_rational,
                             random_additive_net, random_relu_net, shapley_exact, shapley_interaction,
                             shapley_rational, verify_propositions)
from attribex.cli import main

from conftest import min_preactivation, rel_err

RESULTS = []


def report(n, title, ok, detail):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_c01_propositions(capsys):
    t0 = time.perf_counter()
    code = main(["verify", "--seed", "0..9"])
    out = capsys.readouterr().out
    dt = time.perf_counter() - t0
    rep = verify_propositions(range(10))
    errs = {k: rep[k]["max_error"] for k in ("P1", "P2", "P3", "P4")}
    ok = code == 0 and all_passed(rep) and '"passed": true' in out and dt < 60
    report(1, "propositions P1-P4, seeds 0..9", ok,
           ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f", {dt:.1f}s")


def _integer_relu_game(rng, d, x):
    # small integer weights and inputs keep every table entry (and sums of
    # two games) exact; player 1 copies player 0 and player d-1 is a dummy
    W = rng.integers(-3, 4, (6, d)).astype(float)
    W[:, 1] = W[:, 0]
    W[:, -1] = 0.0
    b = rng.integers(-2, 3, 6).astype(float)
    v = rng.integers(-3, 4, 6).astype(float)
    return lambda z: float(v @ np.maximum(W @ z + b, 0.0))


def test_c02_shapley_axioms():
    worst = {"efficiency": 0.0, "float-vs-exact": 0.0, "additive": 0.0}
    exact_ok = {"efficiency": True, "symmetry": True, "dummy": True, "linearity": True}
    for seed in range(10):
        rng = np.random.default_rng(seed)
        d = 4 + seed % 7
        x = rng.integers(-3, 4, d).astype(float)
        x[1] = x[0]
        f, g = _integer_relu_game(rng, d, x), _integer_relu_game(rng, d, x)
        games = [CoalitionGame.from_function(d, h, x) for h in (f, g, lambda z: f(z) + g(z))]
        (pa, pb, ps) = [shapley_rational(gm) for gm in games]
        ga = games[0]
        exact_ok["efficiency"] &= sum(pa) == Fraction(ga.v(range(d))) - Fraction(ga.v([]))
        exact_ok["symmetry"] &= pa[0] == pa[1] and pb[0] == pb[1]
        exact_ok["dummy"] &= pa[-1] == 0 and pb[-1] == 0
        exact_ok["linearity"] &= all(s_ == a_ + b_ for s_, a_, b_ in zip(ps, pa, pb))
        for gm, exact in zip(games, (pa, pb, ps)):
            r = shapley_exact(gm)
            worst["efficiency"] = max(worst["efficiency"], r.efficiency_defect)
            scale = max(abs(float(e)) for e in exact) or 1.0
            worst["float-vs-exact"] = max(worst["float-vs-exact"],
                                          max(abs(r.phi[k] - float(exact[k])) for k in range(d)) / scale)
            exact_ok["dummy"] &= r.phi[-1] == 0.0
        add = CoalitionGame.from_model(random_additive_net(rng, 6), rng.standard_normal(6))
        M = interaction_matrix(add)
        worst["additive"] = max(worst["additive"], float(np.max(np.abs(M[~np.eye(6, dtype=bool)]))))
    prod = CoalitionGame.from_function(2, lambda z: z[0] * z[1], np.ones(2))
    phi12 = shapley_interaction(prod, 0, 1)
    ok = (all(exact_ok.values()) and worst["efficiency"] < 1e-10 and worst["float-vs-exact"] < 1e-12
          and worst["additive"] < 1e-12 and phi12 == 0.5 and interaction_rational(prod, 0, 1) == Fraction(1, 2))
    report(2, "Shapley axioms, 10 games", ok,
           "exact " + ", ".join(k for k, v in exact_ok.items() if v) + "; "
           + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", phi12 {phi12}")


def test_c03_lrp_conservation():
    worst = 0.0
    nets = [random_relu_net(np.random.default_rng(s), 8) for s in range(5)]
    nets += [random_conv_net(np.random.default_rng(10 + s), bias=False) for s in range(5)]
    rng = np.random.default_rng(99)
    for i in range(100):
        net = nets[i % len(nets)]
        x = rng.standard_normal(net.input_shape)
        fx = forward(net, x)[0]
        if fx == 0.0:
            continue
        for rule in (LRP0(), LRPGamma(0.25)):
            e = lrp(net, x, RuleMap(default=rule))
            worst = max(worst, abs(e.sum_relevance - fx) / abs(fx))
    report(3, "LRP conservation, 100 inputs, LRP0 + gamma 0.25", worst < 1e-6, f"max rel err {worst:.1e}")


def test_c04_ig_completeness():
    steps = (4, 8, 16, 32)
    errs = np.zeros((400, len(steps)))
    for s in range(400):
        rng = np.random.default_rng(s)
        net = random_relu_net(rng, 8, bias=True)
        x = rng.standard_normal(8)
        gap = forward(net, x)[0] - forward(net, np.zeros(8))[0]
        for j, T in enumerate(steps):
            e = integrated_gradients(net, x, IGConfig(steps=T))
            errs[s, j] = abs(e.sum_relevance - gap)
    mean = errs.mean(axis=0)
    ratios = mean[1:] / mean[:-1]
    ok = bool(np.all(np.diff(mean) < 0) and np.all((ratios >= 0.35) & (ratios <= 0.65)))
    report(4, "IG completeness decay, 400-net ensemble", ok,
           "mean err " + " ".join(f"{v:.2e}" for v in mean) + "; ratios " + " ".join(f"{r:.3f}" for r in ratios))


def test_c05_gradient_fd():
    worst = 0.0
    h = 1e-4
    for seed in range(20):
        rng = np.random.default_rng(seed)
        hidden = tuple(int(v) for v in rng.integers(4, 65, size=int(rng.integers(1, 4))))
        net = random_relu_net(rng, 6, hidden=hidden, bias=bool(seed % 2))
        while True:
            x = rng.standard_normal(6)
            if min_preactivation(net, x) >= 1e-3:
                break
        fd = np.array([(forward(net, x + h * e)[0] - forward(net, x - h * e)[0]) / (2 * h) for e in np.eye(6)])
        worst = max(worst, rel_err(gradient(net, x), fd))
    report(5, "gradient vs central differences, 20 nets", worst < 1e-5, f"max rel err {worst:.1e}")


def test_c06_faithfulness():
    t0 = time.perf_counter()
    net = planted_cnn(0)
    imgs, _ = planted_samples(1, 50)
    policy = ImputationPolicy("neighbor", np.mean(imgs, axis=0))
    auc = {m: [] for m in ("occlusion", "smooth-ig", "lrp", "random")}
    for i, x in enumerate(imgs):
        for m in ("occlusion", "smooth-ig", "lrp"):
            e = explain(net, x, m, 0, seed=i, rules="composite", patch=4, stride=2)
            auc[m].append(pixel_flip(net, x, e, policy, 4, 0).auc)
        auc["random"].append(random_flip_baseline(net, x, i, policy, 4, 0).auc)
    mean = {m: float(np.mean(v)) for m, v in auc.items()}
    dt = time.perf_counter() - t0
    ok = all(mean[m] <= 0.8 * mean["random"] for m in ("occlusion", "smooth-ig", "lrp")) and dt < 300
    report(6, "pixel-flipping AUC vs random, 50 samples", ok,
           ", ".join(f"{m} {v:.3f}" for m, v in mean.items()) + f", {dt:.0f}s")


def test_c07_filesize():
    wins = []
    sizes = []
    for s in range(10):
        net = planted_cnn(s)
        imgs, _ = planted_samples(1000 + s, 5)
        sz = {m: float(np.mean([filesize_proxy(explain(net, x, m, 0, seed=i, rules="composite", patch=4, stride=2))
                                for i, x in enumerate(imgs)]))
              for m in ("occlusion", "lrp", "smooth-ig")}
        sizes.append(sz)
        wins.append(sz["occlusion"] < sz["lrp"] < sz["smooth-ig"])
    avg = {m: np.mean([s[m] for s in sizes]) for m in sizes[0]}
    report(7, "file size occlusion < LRP < smooth-IG", sum(wins) >= 9,
           f"{sum(wins)}/10 seeds; mean bytes " + ", ".join(f"{m} {v:.0f}" for m, v in avg.items()))


def test_c08_runtime():
    net = planted_cnn(0)
    imgs, _ = planted_samples(1, 10)
    methods = {
        "lrp": lambda x: explain(net, x, "lrp", 0, rules="composite"),
        "smooth-ig": lambda x: explain(net, x, "smooth-ig", 0, seed=0),
        "occlusion": lambda x: explain(net, x, "occlusion", 0, patch=4, stride=1),
    }
    t = runtime_bench(methods, imgs, repetitions=3)["methods"]
    r = {m: t[m]["explanations_per_second"] for m in methods}
    ok = r["lrp"] > r["smooth-ig"] > r["occlusion"]
    report(8, "throughput LRP > smooth-IG > occlusion", ok, ", ".join(f"{m} {v:.1f}/s" for m, v in r.items()))


def test_c09_neuralization():
    m = three_cluster_kkm(0)
    xs = np.random.default_rng(0).uniform(-3, 3, (100, 2))
    worst = 0.0
    for c in range(3):
        net = kkm_neuralize(m, c)
        for x in xs:
            d = kkm_logit_direct(m, x, c)
            worst = max(worst, abs(forward(net, x)[0] - d) / max(abs(d), 1e-300))
    clf = random_relu_net(np.random.default_rng(1), 5, hidden=(8,), bias=True, outputs=3)
    gap = 0.0
    for x in np.random.default_rng(2).standard_normal((20, 5)):
        s = predict(clf, x)
        hard = min(s[0] - s[1], s[0] - s[2])
        gap = max(gap, abs(forward(neuralize_logit(clf, 0, 1e3), x)[0] - hard))
    report(9, "k-means logit vs network, soft-min limit", worst < 1e-6 and gap < 1e-3,
           f"max rel err {worst:.1e}, |softmin - min| {gap:.1e} at beta 1e3")


def test_c10_bilrp():
    worst = 0.0
    for s in range(10):
        rng = np.random.default_rng(s)
        net = random_relu_net(rng, 6, hidden=(12, 12), outputs=5)
        x, xp = rng.standard_normal(6), rng.standard_normal(6)
        M = bilrp(net, x, xp)
        sim = similarity(net, x, xp)
        if sim != 0.0:
            worst = max(worst, abs(math.fsum(M.ravel()) - sim) / abs(sim))
    report(10, "BiLRP conservation, 10 embeddings", worst < 1e-6, f"max rel err {worst:.1e}")


def test_c11_spray_and_pooling():
    expl, labels = planted_strategies(0)
    ari = adjusted_rand_index(spray(expl, k=2, seed=0).labels, labels)
    rng = np.random.default_rng(0)
    R = rng.standard_normal((100, 8)) * 10.0 ** rng.integers(-6, 6, (100, 8))
    fg = [list(range(0, 8, 3)), list(range(1, 8, 3)), list(range(2, 8, 3))]
    perm = rng.permutation(100)
    dg = [list(np.flatnonzero(perm % 4 == k)) for k in range(4)]
    defect = pool(R, GroupSpec(fg, dg)).conservation_defect(R)
    report(11, "SpRAy ARI and pooling conservation", ari >= 0.95 and defect == 0.0,
           f"ARI {ari:.3f}, defect {defect}")
