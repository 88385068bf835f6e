"""Timing comparison of the compiled and pure-Python kernel backends.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeats 5] [--size 64]

Measures the three hot operations (3x3 convolution forward, its
backward pass, and the affinity matrix-vector product) on identical
inputs for every available backend and prints a small table with the
speedup relative to the pure-Python implementation.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sizeseg._kernels import available_backends, get_backend


def _edge_arrays(rng, h: int, w: int):
    idx = np.arange(h * w).reshape(h, w)
    p = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    q = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    weights = rng.random(p.size)
    return (np.ascontiguousarray(p, dtype=np.int32),
            np.ascontiguousarray(q, dtype=np.int32),
            np.ascontiguousarray(weights))


def time_call(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--channels", type=int, default=16)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    h = w = args.size
    c_in, c_out = args.channels, args.channels
    x = rng.normal(size=(h, w, c_in))
    kernel = rng.normal(size=(c_out, c_in, 3, 3))
    bias = rng.normal(size=c_out)
    gout = rng.normal(size=(h, w, c_out))
    p, q, weights = _edge_arrays(rng, h, w)
    values = rng.normal(size=(h * w, c_in))

    rows = []
    baseline: dict[str, float] = {}
    for name in available_backends():
        backend = get_backend(name)
        timings = {
            "conv3x3_forward": time_call(
                lambda: backend.conv3x3_forward(x, kernel, bias), args.repeats),
            "conv3x3_backward": time_call(
                lambda: backend.conv3x3_backward(x, kernel, gout), args.repeats),
            "edge_matvec": time_call(
                lambda: backend.edge_matvec(p, q, weights, values,
                                            np.zeros_like(values)),
                args.repeats),
        }
        if name == "python":
            baseline = timings
        rows.append((name, timings))

    print(f"image {h}x{w}, {c_in} channels, best of {args.repeats}")
    print(f"{'backend':<10} {'op':<18} {'seconds':>10} {'speedup':>9}")
    for name, timings in rows:
        for op, seconds in timings.items():
            rel = baseline[op] / seconds if baseline.get(op) else float("nan")
            print(f"{name:<10} {op:<18} {seconds:>10.5f} {rel:>8.1f}x")


if __name__ == "__main__":
    main()
