"""Compare the numba and pure-numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 7] [--json out.json]

Every kernel is run once per backend before timing so JIT compilation is not
counted. Outputs of the two backends are checked against each other too.
"""
import argparse
import json
import statistics
import time

import numpy as np

from attribex import kernels
from attribex.fixtures import planted_cnn, planted_samples
from attribex.methods import explain


def cases(rng):
    x = rng.standard_normal((8, 32, 32))
    w = rng.standard_normal((16, 8, 3, 3))
    b = rng.standard_normal(16)
    g = rng.standard_normal((16, 32, 32))
    m = rng.standard_normal((64, 32, 32))
    vals = rng.standard_normal(1 << 14)
    a = rng.standard_normal((60, 60))
    a = a + a.T
    net = planted_cnn(0)
    imgs, _ = planted_samples(1, 4)
    return {
        "conv2d_forward 8x32x32 -> 16": lambda: kernels.conv2d_forward(x, w, b, 1, 1),
        "conv2d_backward_input": lambda: kernels.conv2d_backward_input(g, w, x.shape, 1, 1),
        "maxpool_forward 64x32x32": lambda: kernels.maxpool_forward(m, 2, 2),
        "shapley d=14": lambda: kernels.shapley_from_values(vals, 14),
        "jacobi_eigh 60x60": lambda: kernels.jacobi_eigh(a),
        "lrp composite (planted CNN)": lambda: [explain(net, im, "lrp", 0, rules="composite") for im in imgs],
        "smooth-ig (planted CNN)": lambda: [explain(net, im, "smooth-ig", 0, seed=0) for im in imgs],
    }


def _flat(out):
    if isinstance(out, tuple):
        return np.concatenate([np.ravel(np.asarray(o, dtype=np.float64)) for o in out])
    if isinstance(out, list):
        return np.concatenate([np.ravel(e.relevance) for e in out])
    return np.ravel(out)


def timeit(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)

    available = [b for b in kernels.BACKENDS if b != "numba" or kernels.HAVE_NUMBA]
    before = kernels.get_backend()
    rows = []
    for name, fn in cases(np.random.default_rng(0)).items():
        row = {"kernel": name}
        outs = {}
        for backend in available:
            kernels.set_backend(backend)
            outs[backend] = _flat(fn())
            row[backend] = timeit(fn, args.repeat)
        if len(outs) == 2:
            # eigenvectors are sign-ambiguous; compare magnitudes
            row["max_abs_diff"] = float(np.max(np.abs(np.abs(outs["numba"]) - np.abs(outs["numpy"]))))
            row["speedup"] = row["numpy"] / row["numba"]
        rows.append(row)
    kernels.set_backend(before)

    print(f"{'kernel':34s}" + "".join(f"{b:>12s}" for b in available) + f"{'speedup':>10s}{'max|diff|':>12s}")
    for r in rows:
        line = f"{r['kernel']:34s}" + "".join(f"{r[b] * 1e3:10.3f}ms" for b in available)
        if "speedup" in r:
            line += f"{r['speedup']:9.2f}x{r['max_abs_diff']:12.2e}"
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"repeat": args.repeat, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
