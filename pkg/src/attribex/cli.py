"""Command-line entry point: ``attribex <subcommand> [flags]``.

Exit codes: 0 success, 1 validation / usage error, 2 numerics error.
"""
import argparse
from concurrent.futures import ThreadPoolExecutor
import csv
import io as _io
import logging
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .analysis import GroupSpec, adjusted_rand_index, pool, spray
from .attribution import Explanation, bilrp, load_explanation, parse_rules, save_explanation
from .attribution.bilrp import similarity
from .errors import AttribexError, ConfigError, NumericsError
from .evaluation import ImputationPolicy, pixel_flip, random_flip_baseline, runtime_bench
from .fixtures import gen_fixtures
from .io import dumps, load_data, load_model, read_json
from .methods import METHODS, STOCHASTIC, explain
from .render import write_ppm
from .runtime import predict
from .theory import all_passed, verify_propositions

log = logging.getLogger("attribex")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_seeds(text):
    """``3`` or ``0..9`` (inclusive) or ``1,4,7``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad seed spec {text!r}") from None
    if not seeds:
        raise ConfigError(f"empty seed range {text!r}")
    return seeds


def _require_seed(args, why):
    if args.seed is None:
        raise ConfigError(f"--seed is required {why}")
    return parse_seeds(args.seed)[0]


def _map(fn, items, threads):
    """Ordered parallel map; results never depend on the thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool_:
        return list(pool_.map(fn, items))


def _explain_one(args, net, x, index):
    seed = None
    if args.method in STOCHASTIC:
        seed = _require_seed(args, f"for method {args.method}") + index
    return explain(net, x, args.method, args.target, seed, rules=args.rules, steps=args.steps,
                   samples=args.samples, sigma=args.sigma, patch=args.patch, stride=args.stride)


def cmd_predict(args):
    net = load_model(args.model)
    rows = []
    for x, label in load_data(args.input):
        out = predict(net, x)
        rows.append({"output": out.tolist(), "prediction": int(np.argmax(out)), "label": label})
    _emit(args, rows)


def cmd_explain(args):
    net = load_model(args.model)
    data = load_data(args.input)
    if args.method == "bilrp":
        if args.input2:
            x2 = load_data(args.input2)[0][0]
        elif len(data) >= 2:
            x2 = data[1][0]
        else:
            raise ConfigError("bilrp needs a second input (--input2 or two samples)")
        x = data[0][0]
        rules = parse_rules(args.rules, net, x)
        M = bilrp(net, x, x2, rules)
        _emit(args, {"method": "bilrp", "target": -1, "seed": None, "shape": list(M.shape),
                     "relevance": M.ravel().tolist(), "sum": math.fsum(M.ravel()),
                     "similarity": similarity(net, x, x2)})
        return
    if args.method in STOCHASTIC:
        _require_seed(args, f"for method {args.method}")
    indices = range(len(data)) if args.batch else [args.index]
    if not args.batch and not 0 <= args.index < len(data):
        raise ConfigError(f"--index {args.index} out of range (0..{len(data) - 1})")
    expls = _map(lambda i: _explain_one(args, net, data[i][0], i), indices, args.threads)
    if args.batch:
        _emit(args, [e.to_dict() for e in expls])
    elif args.out:
        save_explanation(expls[0], args.out)
    else:
        _emit(args, expls[0].to_dict())


def _load_explanations(path):
    doc = read_json(path)
    docs = doc if isinstance(doc, list) else [doc]
    return [Explanation.from_dict(d) for d in docs]


def _policy(args, xs):
    mean = np.mean(xs, axis=0) if args.impute in ("mean", "neighbor") else None
    return ImputationPolicy(args.impute, mean)


def cmd_flip(args):
    net = load_model(args.model)
    data = load_data(args.input)
    xs = [x for x, _ in data]
    policy = _policy(args, xs)
    if args.explanations:
        expls = _load_explanations(args.explanations)
        if len(expls) != len(xs):
            raise ConfigError(f"{len(expls)} explanations for {len(xs)} samples")

        def one(i):
            return pixel_flip(net, xs[i], expls[i], policy, args.step_size, args.target)
    elif args.method == "random":
        seed = _require_seed(args, "for the random baseline")

        def one(i):
            return random_flip_baseline(net, xs[i], seed + i, policy, args.step_size, args.target)
    elif args.method:
        def one(i):
            e = _explain_one(args, net, xs[i], i)
            return pixel_flip(net, xs[i], e, policy, args.step_size, e.target)
    else:
        raise ConfigError("flip needs --explanations or --method")
    if args.method in STOCHASTIC:
        _require_seed(args, f"for method {args.method}")
    log.info("flipping %d samples on %d threads", len(xs), args.threads)
    curves = _map(one, range(len(xs)), args.threads)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample", "step", "score"])
    for i, c in enumerate(curves):
        for step, score in zip(c.steps, c.scores):
            w.writerow([i, int(step), repr(float(score))])
    w.writerow(["aggregate", "mean_auc", repr(float(np.mean([c.auc for c in curves])))])
    _write_text(args.out, buf.getvalue())


def cmd_spray(args):
    seed = _require_seed(args, "for spray (k-means initialization)")
    expls = _load_explanations(args.explanations)
    blur = "auto" if args.blur is None else (args.blur or None)
    R = np.stack([e.relevance for e in expls])
    res = spray(R, k=args.k, blur=blur, seed=seed, n_neighbors=args.neighbors)
    doc = res.to_dict()
    if args.render_dir:
        out = Path(args.render_dir)
        out.mkdir(parents=True, exist_ok=True)
        for c in range(args.k):
            members = R[res.labels == c]
            if len(members):
                write_ppm(out / f"cluster{c}.ppm", members.mean(axis=0), args.upscale)
    if args.truth:
        truth = read_json(args.truth)
        truth = truth["labels"] if isinstance(truth, dict) else truth
        doc["ari"] = adjusted_rand_index(truth, res.labels)
    _emit(args, doc)


def cmd_pool(args):
    expls = _load_explanations(args.explanations)
    R = np.stack([e.relevance.ravel() for e in expls])
    groups = read_json(args.groups)
    n, d = R.shape
    spec = GroupSpec(groups.get("feature_groups", [list(range(d))]),
                     groups.get("data_groups", [list(range(n))]))
    pooled = pool(R, spec)
    _emit(args, {"cells": pooled.cells.tolist(), "conservation_defect": pooled.conservation_defect(R),
                 "total": float(sum(c for row in pooled.exact for c in row))})


def cmd_verify(args):
    if args.seed is None:
        raise ConfigError("--seed is required for verify")
    seeds = parse_seeds(args.seed)
    log.info("verifying seeds %s", seeds)
    report = verify_propositions(seeds)
    ok = all_passed(report)
    _emit(args, {"passed": ok, "seeds": seeds, "checks": report})
    for key in ("P1", "P2", "P3", "P4"):
        entry = report[key]
        print(f"{key}: {entry['status']} (max error {entry['max_error']:.3g} < {entry['tolerance']:g})",
              file=sys.stderr)
    return 0 if ok else 1


def cmd_bench(args):
    seed = _require_seed(args, "for bench (smooth-IG roots)")
    net = load_model(args.model)
    xs = [x for x, _ in load_data(args.input)][:args.limit]
    names = [m.strip() for m in args.methods.split(",") if m.strip()]
    methods = {}
    for name in names:
        if name not in METHODS or name == "bilrp":
            raise ConfigError(f"cannot benchmark method {name!r}")
        methods[name] = (lambda m: lambda x: explain(net, x, m, args.target, seed, rules=args.rules,
                                                      steps=args.steps, samples=args.samples,
                                                      sigma=args.sigma, patch=args.patch,
                                                      stride=args.stride))(name)
    _emit(args, runtime_bench(methods, xs, args.repetitions))


def cmd_render(args):
    expl = load_explanation(args.input)
    write_ppm(args.out, expl.relevance, args.upscale)


def cmd_gen_fixtures(args):
    seed = _require_seed(args, "for gen-fixtures")
    paths = gen_fixtures(seed, args.out)
    for name in sorted(paths):
        print(f"{name}\t{paths[name]}")


def _write_text(path, text):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit(args, obj):
    _write_text(getattr(args, "out", None), dumps(obj))


def _common(p, *flags):
    if "model" in flags:
        p.add_argument("--model", required=True)
    if "input" in flags:
        p.add_argument("--input", required=True)
    if "seed" in flags:
        p.add_argument("--seed", default=None, help="integer, or a range like 0..9 for verify")
    if "out" in flags:
        p.add_argument("--out", default=None)
    if "threads" in flags:
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    if "target" in flags:
        p.add_argument("--target", type=int, default=None)
    if "method" in flags:
        p.add_argument("--rules", default="lrp0")
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--sigma", type=float, default=None)
        p.add_argument("--patch", type=int, default=1)
        p.add_argument("--stride", type=int, default=1)


def build_parser():
    parser = _Parser(prog="attribex", description="attribution engine for small networks")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("predict", help="run the model on every sample")
    _common(p, "model", "input", "out")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("explain", help="explain one sample (or all with --batch)")
    _common(p, "model", "input", "seed", "out", "threads", "target", "method")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--batch", action="store_true")
    p.add_argument("--input2", default=None, help="second input for bilrp")
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("flip", help="pixel-flipping curves as CSV")
    _common(p, "model", "input", "seed", "out", "threads", "target", "method")
    p.add_argument("--explanations", default=None)
    p.add_argument("--method", default=None, choices=[m for m in METHODS if m != "bilrp"] + ["random"])
    p.add_argument("--impute", default="zero", choices=("zero", "mean", "neighbor"))
    p.add_argument("--step-size", type=int, default=1)
    p.set_defaults(fn=cmd_flip)

    p = sub.add_parser("spray", help="cluster and embed a set of explanations")
    _common(p, "seed", "out")
    p.add_argument("--explanations", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--blur", type=float, default=None, help="sigma in pixels; 0 disables (default: 1 on grid data)")
    p.add_argument("--render-dir", default=None, help="write one mean heatmap per cluster")
    p.add_argument("--upscale", type=int, default=4)
    p.add_argument("--neighbors", type=int, default=10)
    p.add_argument("--truth", default=None, help="reference labels; adds the adjusted Rand index")
    p.set_defaults(fn=cmd_spray)

    p = sub.add_parser("pool", help="pool relevance over feature and sample groups")
    _common(p, "out")
    p.add_argument("--explanations", required=True)
    p.add_argument("--groups", required=True)
    p.set_defaults(fn=cmd_pool)

    p = sub.add_parser("verify", help="check the equivalence propositions")
    _common(p, "seed", "out")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="explanations per second for each method")
    _common(p, "model", "input", "seed", "out", "target", "method")
    p.add_argument("--methods", default="lrp,smooth-ig,occlusion")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--limit", type=int, default=10, help="number of samples used")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("render", help="explanation -> PPM heatmap")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--upscale", type=int, default=1)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("gen-fixtures", help="write the seeded fixture set")
    _common(p, "seed")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_fixtures)
    return parser


def main(argv=None):
    level = getattr(logging, os.environ.get("ATTRIBEX_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("attribex: error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        code = args.fn(args)
    except NumericsError as exc:
        print(f"attribex: numerics error: {exc}", file=sys.stderr)
        return 2
    except (AttribexError, OSError) as exc:
        print(f"attribex: error: {exc}", file=sys.stderr)
        return 1
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
