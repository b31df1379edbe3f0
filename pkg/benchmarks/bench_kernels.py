"""Time each kernel under the numpy and numba backends, plus a full detect.

    python3 benchmarks/bench_kernels.py [--n 1000000] [--repeat 5]

Kernels are checked for identical output before timing.  The numba numbers
exclude compilation (one warm-up call per kernel).  ``detect`` is timed in a
subprocess per backend because the backend is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from jumpscope import _kernels

DETECT_SNIPPET = """
import time, numpy as np
from jumpscope import detect, SmoothnessClass, add_noise, BACKEND
f = lambda x: np.sin(9 * np.asarray(x)) + np.where(np.asarray(x) >= 0.37, 0.5, 0.0) \\
    + 0.4 * np.abs(np.asarray(x) - 0.71)
src = add_noise(f, {delta}, "uniform", 1)
cls = SmoothnessClass.smooth(10.0, 82.0)
detect(src, cls)
t = time.perf_counter()
for _ in range({repeat}):
    r = detect(src, cls)
dt = (time.perf_counter() - t) / {repeat}
print(BACKEND, r.params["j_max"], len(r.events), dt)
"""


def inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    values = np.cumsum(rng.normal(size=n + 2)) * 1e-3
    f = rng.normal(size=n)
    usable = rng.random(n) > 0.01
    flags = rng.random(n) > 0.97
    x = rng.random(n)
    return {
        "central_diff": (values, 1e-3),
        "find_runs": (flags,),
        "classify_pairs": (f, usable, 2.5, 2.5, 0.5),
        "sign_segments": (f, usable, 0.5),
        "hash_uniform": (x, 12345),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(u, v) for u, v in zip(a, b))
    return np.array_equal(a, b)


def bench_kernels(n, repeat):
    rows = []
    for name, args in inputs(n).items():
        fn_np = getattr(_kernels.NUMPY, name)
        fn_nb = getattr(_kernels.NUMBA, name)
        assert same(fn_np(*args), fn_nb(*args)), f"{name}: backends disagree"
        t_np = min(timeit.repeat(lambda: fn_np(*args), number=1, repeat=repeat))
        t_nb = min(timeit.repeat(lambda: fn_nb(*args), number=1, repeat=repeat))
        rows.append((name, t_np, t_nb))
    return rows


def bench_detect(delta, repeat):
    out = []
    for flag in ("1", "0"):
        env = dict(os.environ, JUMPSCOPE_DISABLE_NUMBA=flag)
        res = subprocess.run(
            [sys.executable, "-c", DETECT_SNIPPET.format(delta=delta, repeat=repeat)],
            env=env, capture_output=True, text=True, check=True,
        )
        backend, nodes, events, dt = res.stdout.split()
        out.append((backend, int(nodes), int(events), float(dt)))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--delta", type=float, default=1e-9, help="noise level for the detect run")
    args = ap.parse_args(argv)
    if _kernels.NUMBA is None:
        sys.exit("numba is not installed; nothing to compare")

    print(f"kernels, n = {args.n:,}, best of {args.repeat}")
    print(f"{'kernel':<16}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, t_np, t_nb in bench_kernels(args.n, args.repeat):
        print(f"{name:<16}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>10.2f}")

    print(f"\ndetect, delta = {args.delta:g}")
    for backend, nodes, events, dt in bench_detect(args.delta, args.repeat):
        print(f"{backend:<8} {nodes:>9,} nodes  {events} events  {dt * 1e3:8.2f} ms")


if __name__ == "__main__":
    main()
