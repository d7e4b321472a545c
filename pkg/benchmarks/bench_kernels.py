"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N] [--epoch]

Prints the best-of-N time per call for each kernel and backend, and the
speedup. ``--epoch`` also times one CNN training epoch per backend.
"""

import argparse
import time

import numpy as np

from harvsense import kernels


def best_of(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def kernel_cases(rng):
    x_fres = rng.uniform(-20, 20, 100_000)
    trace = rng.standard_normal(12_000)
    act = rng.standard_normal((32, 16, 124))
    pooled_grad = rng.standard_normal((32, 16, 62))
    cols_grad = rng.standard_normal((32, 122, 48))
    cases = {
        "fresnel_cs (1e5 points)": lambda k: k.fresnel_cs(x_fres),
        "moving_variance (60 s, w=100)": lambda k: k.moving_variance(trace, 100),
        "im2col1d (32x16x124, k=3)": lambda k: k.im2col1d(act, 3),
        "col2im1d (32x122x48, k=3)": lambda k: k.col2im1d(cols_grad, 16, 3),
    }

    def pool_fwd(k):
        return k.maxpool1d_forward(act, 2)

    def pool_bwd(k, _idx={}):
        key = id(k)
        if key not in _idx:
            _idx[key] = k.maxpool1d_forward(act, 2)[1]
        return k.maxpool1d_backward(pooled_grad, _idx[key], 2, act.shape[2])

    cases["maxpool1d_forward (32x16x124)"] = pool_fwd
    cases["maxpool1d_backward (32x16x124)"] = pool_bwd
    return cases


def time_epoch(backend_name, rng):
    from harvsense import classifier

    impl = kernels.BACKENDS[backend_name]
    saved = {name: getattr(kernels, name) for name in ("im2col1d", "col2im1d", "maxpool1d_forward",
                                                        "maxpool1d_backward")}
    for name in saved:
        setattr(kernels, name, getattr(impl, name))
    try:
        x = rng.random((4000, 128))
        y = rng.integers(0, 10, 4000)
        spec = classifier.CnnSpec(epochs=1)
        t = time.perf_counter()
        classifier.train(spec, (x, y), (x[:400], y[:400]))
        return time.perf_counter() - t
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--epoch", action="store_true", help="also time one training epoch per backend")
    args = ap.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    if "cython" not in kernels.BACKENDS:
        print("compiled extension not built; timing the numpy backend only")
    rng = np.random.default_rng(0)
    cases = kernel_cases(rng)
    header = f"{'kernel':34s}" + "".join(f"{n:>12s}" for n in names) + ("    speedup" if len(names) > 1 else "")
    print(header)
    for label, fn in cases.items():
        times = {n: best_of(lambda: fn(kernels.BACKENDS[n]), args.repeat) for n in names}
        line = f"{label:34s}" + "".join(f"{times[n] * 1e3:10.3f}ms" for n in names)
        if len(names) > 1:
            line += f"{times['python'] / times['cython']:10.1f}x"
        print(line)
    if args.epoch:
        for n in names:
            print(f"training epoch, 4000 segments, {n:7s}: {time_epoch(n, rng):.2f} s")


if __name__ == "__main__":
    main()
