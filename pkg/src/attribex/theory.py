"""Brute-force reference attributions and machine checks of the equivalences
between occlusion, Taylor, Shapley, Integrated Gradients and LRP."""
from dataclasses import dataclass, field
from fractions import Fraction
import math

import numpy as np

from . import kernels
from .attribution import (IGConfig, LRP0, LRPEps, LRPGamma, OcclusionConfig, RuleMap,
                          gradient_x_input, integrated_gradients, lrp, occlusion,
                          simple_taylor)
from .attribution.lrp import relprop
from .errors import ConfigError, SizeError
from .runtime import Dense, Network, ReLU, forward

MAX_PLAYERS = 20
MAX_INTERACTION_PLAYERS = 16


class CoalitionGame:
    """Cooperative game over ``d`` players given by ``value(mask) -> float``.

    The full table of ``2**d`` coalition values is evaluated once, on first
    use, with bit i of the table index marking player i as present.
    """

    def __init__(self, d, value):
        if d < 1:
            raise ConfigError("a game needs at least one player")
        if d > MAX_PLAYERS:
            raise SizeError(f"{d} players exceeds the exact-enumeration cap of {MAX_PLAYERS}")
        self.d = d
        self._value = value
        self._table = None

    @classmethod
    def from_model(cls, net, x, target=None):
        """``v(S) = f(x_S)``: features outside S are set to zero."""
        x = np.asarray(x, dtype=np.float64)
        flat = x.ravel()
        target_ = target

        def value(mask):
            return forward(net, np.where(mask, flat, 0.0).reshape(x.shape), target_)[0]

        return cls(flat.size, value)

    @classmethod
    def from_function(cls, d, f, x):
        x = np.asarray(x, dtype=np.float64)
        return cls(d, lambda mask: float(f(np.where(mask, x, 0.0))))

    def values(self):
        if self._table is None:
            n = 1 << self.d
            bits = 1 << np.arange(self.d)
            table = np.empty(n)
            for m in range(n):
                table[m] = self._value((m & bits) != 0)
            self._table = table
        return self._table

    def v(self, players):
        m = 0
        for p in players:
            m |= 1 << p
        return float(self.values()[m])


@dataclass
class ShapleyResult:
    phi: np.ndarray
    efficiency_defect: float


def shapley_exact(game):
    vals = game.values()
    phi = kernels.shapley_from_values(vals, game.d)
    defect = abs(math.fsum(phi) - (vals[-1] - vals[0]))
    return ShapleyResult(phi, defect)


def shapley_interaction(game, i, j):
    if game.d > MAX_INTERACTION_PLAYERS:
        raise SizeError(f"interaction index limited to {MAX_INTERACTION_PLAYERS} players")
    if i == j:
        raise ConfigError("interaction needs two distinct players; main effects come from interaction_matrix")
    if not (0 <= i < game.d and 0 <= j < game.d):
        raise ConfigError("player index out of range")
    i, j = min(i, j), max(i, j)
    return kernels.interaction_from_values(game.values(), game.d, i, j)


def _rational_table(game):
    return [Fraction(float(v)) for v in game.values()]


def shapley_rational(game):
    """Shapley values in exact rational arithmetic over the (float) value
    table. Slow; meant as an oracle for small games."""
    d = game.d
    vals = _rational_table(game)
    fact = [math.factorial(k) for k in range(d + 1)]
    phi = []
    for i in range(d):
        bit = 1 << i
        acc = Fraction(0)
        for m in range(1 << d):
            if not m & bit:
                s = bin(m).count("1")
                acc += Fraction(fact[s] * fact[d - 1 - s], fact[d]) * (vals[m | bit] - vals[m])
        phi.append(acc)
    return phi


def interaction_rational(game, i, j):
    if i == j:
        raise ConfigError("interaction needs two distinct players")
    d = game.d
    vals = _rational_table(game)
    bi, bj = 1 << i, 1 << j
    acc = Fraction(0)
    for m in range(1 << d):
        if not m & (bi | bj):
            s = bin(m).count("1")
            w = Fraction(math.factorial(s) * math.factorial(d - 2 - s), 2 * math.factorial(d - 1))
            acc += w * (vals[m | bi | bj] - vals[m | bi] - vals[m | bj] + vals[m])
    return acc


def interaction_matrix(game):
    """Pairwise interaction values off the diagonal; the diagonal holds main
    effects ``phi_i - sum_{j != i} phi_ij``."""
    d = game.d
    M = np.zeros((d, d))
    for i in range(d):
        for j in range(i + 1, d):
            M[i, j] = M[j, i] = shapley_interaction(game, i, j)
    phi = shapley_exact(game).phi
    for i in range(d):
        M[i, i] = phi[i] - (M[i].sum() - M[i, i])
    return M


# --- proposition checks -----------------------------------------------------

TOLERANCES = {"P1": 1e-8, "P2": 1e-6, "P3": 1e-8, "P4": 1e-10}
P2_ROOT_SCALE = 1e-9
COUNTEREXAMPLE_GAP = 1e-6


def random_relu_net(rng, d, hidden=(16, 16, 16), bias=False, outputs=1):
    layers = []
    n_in = d
    for h in hidden:
        W = rng.standard_normal((h, n_in)) / math.sqrt(n_in)
        b = 0.1 * rng.standard_normal(h) if bias else None
        layers += [Dense(W, b), ReLU()]
        n_in = h
    W = rng.standard_normal((outputs, n_in)) / math.sqrt(n_in)
    layers.append(Dense(W, 0.1 * rng.standard_normal(outputs) if bias else None))
    return Network(tuple(layers), (d,))


def random_additive_net(rng, d, width=4):
    """``f(x) = sum_i f_i(x_i)`` realized with a block-diagonal hidden layer."""
    W1 = np.zeros((d * width, d))
    for i in range(d):
        W1[i * width:(i + 1) * width, i] = rng.standard_normal(width)
    b1 = rng.standard_normal(d * width)
    W2 = rng.standard_normal((1, d * width))
    return Network((Dense(W1, b1), ReLU(), Dense(W2, np.array([0.3]))), (d,))


def dtd_messages(a, W, R, gamma):
    """Deep Taylor messages for one rectifier layer ``a_k = max(0, W[k] . a)``.

    For each neuron the root point is searched on the line
    ``a - t * a * (1 + gamma * [w_k >= 0])``; ``t`` solves conservation of the
    first-order expansion of ``R_k(a) = a_k(a) c_k``. Returns the summed
    messages per input neuron.
    """
    out = np.zeros(a.shape)
    z = W @ a
    for k in range(W.shape[0]):
        if z[k] <= 0 or R[k] == 0:
            continue
        c_k = R[k] / z[k]
        direction = a * (1.0 + gamma * (W[k] >= 0))
        grad = W[k] * c_k
        t = R[k] / np.dot(grad, direction)
        root = a - t * direction
        out += grad * (a - root)
    return out


def _rel_err(a, b):
    scale = max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def _check(report, key, err, tol, seed, note=""):
    entry = report.setdefault(key, {"status": "pass", "max_error": 0.0, "tolerance": tol, "seeds": []})
    entry["max_error"] = max(entry["max_error"], err)
    entry["seeds"].append(seed)
    if not err < tol:
        entry["status"] = "fail"
        entry.setdefault("failures", []).append({"seed": seed, "error": err, **({"note": note} if note else {})})


def _check_gap(report, key, gap, seed):
    """Non-equivalence check: the two methods must disagree by more than the gap."""
    entry = report.setdefault(key, {"status": "pass", "min_gap": math.inf, "required_gap": COUNTEREXAMPLE_GAP,
                                    "seeds": []})
    entry["min_gap"] = min(entry["min_gap"], gap)
    entry["seeds"].append(seed)
    if not gap > COUNTEREXAMPLE_GAP:
        entry["status"] = "fail"
        entry.setdefault("failures", []).append({"seed": seed, "gap": gap})


def _shapley_of(net, x):
    return shapley_exact(CoalitionGame.from_model(net, x, 0)).phi


def verify_seed(seed, report=None):
    report = {} if report is None else report
    rng = np.random.default_rng(seed)

    # P1: homogeneous linear model, d = 6
    d = 6
    w = rng.standard_normal(d)
    x = rng.standard_normal(d)
    lin = Network((Dense(w[None, :]),), (d,))
    methods = {
        "occlude-1": occlusion(lin, x, OcclusionConfig(1, 1, 0.0), 0).relevance,
        "taylor-0": simple_taylor(lin, x, np.zeros(d), 0).relevance,
        "shapley": _shapley_of(lin, x),
        "ig-0": integrated_gradients(lin, x, IGConfig(steps=8), 0).relevance,
        "lrp-0": lrp(lin, x, RuleMap(), 0).relevance,
    }
    names = list(methods)
    p1 = max(float(np.max(np.abs(methods[a] - methods[b])))
             for ia, a in enumerate(names) for b in names[ia + 1:])
    _check(report, "P1", p1, TOLERANCES["P1"], seed)
    for m in ("occlude-1", "ig-0", "lrp-0"):
        _check(report, f"cross/linear/{m}~shapley",
               float(np.max(np.abs(methods[m] - methods["shapley"]))), TOLERANCES["P1"], seed)
        _check(report, f"cross/linear/{m}~taylor",
               float(np.max(np.abs(methods[m] - methods["taylor-0"]))), TOLERANCES["P1"], seed)

    # nonlinear additive model
    add = random_additive_net(rng, d)
    xa = rng.standard_normal(d)
    occ = occlusion(add, xa, OcclusionConfig(1, 1, 0.0), 0).relevance
    sh = _shapley_of(add, xa)
    _check(report, "cross/additive/occlude-1~shapley", float(np.max(np.abs(occ - sh))), TOLERANCES["P1"], seed)
    _check_gap(report, "cross/additive/occlude-1!~taylor",
               float(np.max(np.abs(occ - simple_taylor(add, xa, np.zeros(d), 0).relevance))), seed)

    # P2 / P3 on a bias-free rectifier net, 3 hidden layers of 16
    d = 8
    net = random_relu_net(rng, d)
    x = rng.standard_normal(d)
    ig = integrated_gradients(net, x, IGConfig(steps=16), 0).relevance
    taylor = simple_taylor(net, x, P2_ROOT_SCALE * x, 0).relevance
    _check(report, "P2", _rel_err(ig, taylor), TOLERANCES["P2"], seed)
    lrp0 = lrp(net, x, RuleMap(), 0).relevance
    gxi = gradient_x_input(net, x, 0).relevance
    _check(report, "P3", float(np.max(np.abs(lrp0 - gxi))), TOLERANCES["P3"], seed)
    _check(report, "cross/deep/ig~taylor", _rel_err(ig, taylor), TOLERANCES["P2"], seed)
    _check(report, "cross/deep/lrp-0~taylor", float(np.max(np.abs(lrp0 - gxi))), TOLERANCES["P3"], seed)

    sh = _shapley_of(net, x)
    occ = occlusion(net, x, OcclusionConfig(1, 1, 0.0), 0).relevance
    lrpg = lrp(net, x, RuleMap(default=LRPGamma(0.25)), 0).relevance
    lrpe = lrp(net, x, RuleMap(default=LRPEps(0.1)), 0).relevance
    gap = lambda a, b: float(np.max(np.abs(a - b)))  # noqa: E731
    _check_gap(report, "cross/deep/occlude-1!~shapley", gap(occ, sh), seed)
    _check_gap(report, "cross/deep/occlude-1!~taylor", gap(occ, taylor), seed)
    _check_gap(report, "cross/deep/ig!~shapley", gap(ig, sh), seed)
    _check_gap(report, "cross/deep/lrp-0!~shapley", gap(lrp0, sh), seed)
    _check_gap(report, "cross/deep/lrp-gamma!~shapley", gap(lrpg, sh), seed)
    _check_gap(report, "cross/deep/lrp-gamma!~taylor", gap(lrpg, taylor), seed)
    _check_gap(report, "cross/deep/lrp-eps!~taylor", gap(lrpe, taylor), seed)

    # P4: one rectifier layer, LRP-gamma vs deep Taylor root-point messages
    p4 = 0.0
    for gamma in (0.0, 0.25, 1.0):
        n_in, n_out = 10, 6
        a = np.abs(rng.standard_normal(n_in))
        W = rng.standard_normal((n_out, n_in))
        ak = np.maximum(W @ a, 0.0)
        R = ak * rng.uniform(0.5, 2.0, n_out)
        layer = Dense(W)
        rule = LRP0() if gamma == 0 else LRPGamma(gamma)
        R_lrp, _ = relprop(layer, a, R, rule)
        p4 = max(p4, _rel_err(R_lrp, dtd_messages(a, W, R, gamma)))
    _check(report, "P4", p4, TOLERANCES["P4"], seed)
    _check(report, "cross/deep/lrp-0~dtd", p4, TOLERANCES["P4"], seed)
    _check(report, "cross/deep/lrp-gamma~dtd", p4, TOLERANCES["P4"], seed)
    return report


def verify_propositions(seeds=(0,)):
    """Run every check for each seed; returns ``{check -> {status, max_error, seeds, ...}}``."""
    if isinstance(seeds, int):
        seeds = (seeds,)
    report = {}
    for s in seeds:
        verify_seed(int(s), report)
    return report


def all_passed(report):
    return all(entry["status"] == "pass" for entry in report.values())
