"""Compare the compiled and pure-Python kernel backends on k-means workloads.

    python3 benchmarks/bench_kernels.py [--n 5000] [--d 16] [--k 20] [--repeat 5]

Each backend runs the same kernels on the same inputs; outputs are checked for
bitwise equality before timings are reported.
"""
import argparse
import time

import numpy as np

from afsl.clustering import kmeans
from afsl.kernels import available_backends, get_backend


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--d", type=int, default=16)
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    points = rng.normal(size=(args.n, args.d))
    centers = points[rng.choice(args.n, args.k, replace=False)].copy()
    backends = available_backends()
    print(f"n={args.n} d={args.d} k={args.k} threads={args.threads} backends={backends}")

    results = {}
    for name in backends:
        be = get_backend(name)
        labels, mind = be.assign_labels(points, centers, args.threads)
        results[name] = (labels, mind, kmeans(points, args.k, 0, n_threads=args.threads, backend=name))
        rows = {
            "assign_labels": best_of(lambda: be.assign_labels(points, centers, args.threads), args.repeat),
            "centroid_sums": best_of(lambda: be.centroid_sums(points, labels, args.k), args.repeat),
            "kmeans": best_of(lambda: kmeans(points, args.k, 0, n_threads=args.threads, backend=name),
                              args.repeat),
        }
        for kernel, t in rows.items():
            print(f"{name:>9}  {kernel:<14} {t * 1e3:9.2f} ms")

    if len(results) > 1:
        (a, b) = results.values()
        same = (np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
                and np.array_equal(a[2].centroids, b[2].centroids)
                and a[2].inertia_history == b[2].inertia_history)
        print("bitwise identical across backends:", same)
    else:
        print("compiled backend not built; only the python fallback was timed")


if __name__ == "__main__":
    main()
