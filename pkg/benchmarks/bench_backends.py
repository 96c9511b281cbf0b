"""Time the compiled and pure-numpy recurrent kernels on the same inputs.

    python3 benchmarks/bench_backends.py [--dims 32,128,256] [--length 30] [--reps 20]
"""
import argparse
import time

import numpy as np
from threadpoolctl import threadpool_limits

from readagain import kernels


def _time(fn, reps):
    fn()
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench(d, n, reps, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, d))
    h0, C0 = np.zeros(d), np.zeros(d)
    Wg = [rng.uniform(-0.2, 0.2, (d, 2 * d)) for _ in range(3)]
    Wl = [rng.uniform(-0.2, 0.2, (d, 2 * d)) for _ in range(4)]
    A = rng.uniform(0, 1, (n, d))
    dH = rng.normal(size=(n, d))
    row = {}
    for name in kernels.available_backends():
        prev = kernels.use_backend(name)
        try:
            gf = kernels.gru_forward(X, h0, *Wg, A)
            lf = kernels.lstm_forward(X, h0, C0, *Wl)
            gg = [np.zeros_like(w) for w in Wg]
            lg = [np.zeros_like(w) for w in Wl]
            row[name] = {
                "gru fwd": _time(lambda: kernels.gru_forward(X, h0, *Wg, A), reps),
                "gru bwd": _time(lambda: kernels.gru_backward(X, h0, *Wg, A, *gf, dH, *gg), reps),
                "lstm fwd": _time(lambda: kernels.lstm_forward(X, h0, C0, *Wl), reps),
                "lstm bwd": _time(lambda: kernels.lstm_backward(X, h0, C0, *Wl, *lf, dH,
                                                                np.zeros(d), *lg), reps),
            }
        finally:
            kernels.use_backend(prev)
    return row


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", default="32,128,256")
    ap.add_argument("--length", type=int, default=30)
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()
    names = kernels.available_backends()
    print("d,kernel," + ",".join(f"{n}_ms" for n in names)
          + (",speedup" if "cython" in names else ""))
    with threadpool_limits(limits=1):
        for d in (int(v) for v in args.dims.split(",")):
            res = bench(d, args.length, args.reps)
            for k in res[names[0]]:
                cells = [f"{res[n][k] * 1e3:.3f}" for n in names]
                if "cython" in names:
                    cells.append(f"{res['python'][k] / res['cython'][k]:.2f}x")
                print(f"{d},{k}," + ",".join(cells))


if __name__ == "__main__":
    main()
