"""Compiled vs numpy-fallback timings for the hot loops.

    python3 benchmarks/bench_kernels.py [--repeat N]

Also times one full training step under each backend.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from clusterrank.encoder import enumerate_spans
from clusterrank.numcore import kernels


def lstm_case(rng, tokens, hidden, sentences):
    xproj = rng.normal(size=(tokens, 4 * hidden))
    w_hh = rng.normal(scale=0.3, size=(hidden, 4 * hidden))
    cuts = np.sort(rng.choice(np.arange(1, tokens), size=sentences - 1, replace=False))
    lengths = np.diff(np.concatenate([[0], cuts, [tokens]]))
    return xproj, w_hh, lengths


def prune_case(rng, tokens, width):
    starts, ends = enumerate_spans(tokens, width)
    order = np.argsort(-rng.normal(size=len(starts)), kind="stable")
    return starts, ends, order, int(0.4 * tokens)


def bench(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def step_time(backend, repeat):
    code = (
        "import time,sys;sys.path.insert(0,'tests');"
        "from support import small_config;from clusterrank.synthetic import synthetic_corpus;"
        "from clusterrank.trainer import train;docs=synthetic_corpus(4,seed=0);"
        "cfg=small_config(seed=0);train(cfg,docs,steps=3);t=time.perf_counter();"
        f"train(cfg,docs,steps={repeat * 4});print((time.perf_counter()-t)/{repeat * 4})"
    )
    env = dict(os.environ, CLUSTERRANK_PURE_PYTHON="1" if backend == "python" else "0")
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    out = subprocess.run([sys.executable, "-c", code], env=env, cwd=root, capture_output=True, text=True,
                         check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the fallback is available")
    rng = np.random.default_rng(0)
    rows = []
    for tokens, hidden in ((100, 32), (400, 200)):
        xproj, w_hh, lengths = lstm_case(rng, tokens, hidden, max(2, tokens // 25))
        h, c, gates = kernels.lstm_forward(xproj, w_hh, lengths)
        dh = rng.normal(size=h.shape)
        for name, impl in backends.items():
            rows.append((f"lstm fwd T={tokens} H={hidden}", name,
                         bench(lambda: kernels.lstm_forward(xproj, w_hh, lengths, impl=impl), args.repeat)))
            rows.append((f"lstm bwd T={tokens} H={hidden}", name,
                         bench(lambda: kernels.lstm_backward(dh, w_hh, h, c, gates, lengths, impl=impl),
                               args.repeat)))
    for tokens in (100, 500):
        starts, ends, order, keep = prune_case(rng, tokens, 30)
        for name, impl in backends.items():
            rows.append((f"prune T={tokens} l=30", name,
                         bench(lambda: kernels.greedy_prune(starts, ends, order, keep, impl=impl), args.repeat)))
    for name in backends:
        rows.append(("train step (small config)", name, step_time(name, max(1, args.repeat // 4))))

    print(f"{'case':28s} {'backend':9s} {'ms':>10s} {'speedup':>8s}")
    base = {case: t for case, name, t in rows if name == "python"}
    for case, name, t in rows:
        print(f"{case:28s} {name:9s} {1000 * t:10.3f} {base[case] / t:8.1f}x")


if __name__ == "__main__":
    main()
