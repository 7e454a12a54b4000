#!/usr/bin/env python3
"""Compare the compiled and NumPy MCM kernels.

Times forward+backward on random trees of 13 to 400 labels, then one full
training epoch of the synthetic task under each backend.

    python benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from hmcm import kernels
from hmcm.data import gen_synthetic, split
from hmcm.gradcheck import random_tree
from hmcm.network import NetworkConfig, train


def bench_kernel(hier, rows, backend, repeat):
    rng = np.random.default_rng(0)
    h = rng.random((rows, hier.label_count))
    g = rng.standard_normal((rows, hier.label_count))

    def once():
        _, trace = kernels.mcm_forward(h, hier, backend=backend)
        kernels.mcm_backward(trace, g, backend=backend)

    once()
    return min(timeit.repeat(once, number=1, repeat=repeat))


def bench_epoch(backend, repeat):
    hier, ds = gen_synthetic(3, 3, 200, 16, 0.3, seed=0)
    tr, va, _ = split(ds, (0.7, 0.15, 0.15), 0)
    cfg = NetworkConfig(input_dim=16, label_count=hier.label_count, backbone_dims=(64, 64))
    saved = kernels.BACKEND
    kernels.BACKEND = backend
    try:
        return min(timeit.repeat(lambda: train(cfg, tr, va, hier, epochs=1), number=1, repeat=max(3, repeat // 5)))
    finally:
        kernels.BACKEND = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    backends = ["python"] + (["cython"] if kernels.compiled_available() else [])
    if len(backends) == 1:
        print("compiled kernels not built; timing the NumPy fallback only")

    rng = np.random.default_rng(1)
    print(f"{'labels':>6} {'rows':>6} " + " ".join(f"{b + ' ms':>11}" for b in backends) + "  speedup")
    for n in (13, 36, 110, 400):
        hier = random_tree(rng, n)
        for rows in (32, 1024):
            times = [bench_kernel(hier, rows, b, args.repeat) * 1e3 for b in backends]
            speed = f"{times[0] / times[1]:7.1f}x" if len(times) == 2 else ""
            print(f"{n:>6} {rows:>6} " + " ".join(f"{t:>11.3f}" for t in times) + "  " + speed)

    print("\none training epoch, synthetic task (13 labels, 1260 samples, batch 32):")
    for b in backends:
        print(f"  {b:>7}: {bench_epoch(b, args.repeat) * 1e3:8.1f} ms")


if __name__ == "__main__":
    main()
