"""Compare the compiled conv/pool kernels against the numpy fallback.

Imports both implementations side by side (bypassing the import-time
backend switch), checks they agree numerically, then times forward and
backward passes at a few pair-map sizes typical for this model.

    python3 benchmarks/bench_kernels.py [--repeats N] [--sizes RxF,RxF,...]

The active default backend is whatever `linker.tensorcore.BACKEND` reports;
run with LINKER_PURE_PY=1 to confirm the fallback path wires up the same.
"""

import argparse
import time

import numpy as np

from linker.tensorcore import BACKEND
from linker.tensorcore.kernels import fallback

try:
    from linker.tensorcore.kernels import _convcore
except ImportError:
    _convcore = None


def _workload(rng, c_in, c_out, h, w, k=3):
    x = rng.normal(size=(c_in, h, w))
    wt = rng.normal(size=(c_out, c_in, k, k))
    gy = rng.normal(size=(c_out, h, w))
    return x, wt, gy


def _passes(impl, x, wt, gy):
    pad = wt.shape[2] // 2
    y = impl.conv2d_fwd(x, wt, 1, pad, pad)
    gw = impl.conv2d_bwd_weight(x, gy, 1, pad, pad, wt.shape[2], wt.shape[3])
    gx = impl.conv2d_bwd_input(gy, wt, 1, pad, pad, x.shape[1], x.shape[2])
    p, idx = impl.maxpool2d_fwd(x, 2, 2)
    gp = impl.maxpool2d_bwd(p, idx, x.shape[1], x.shape[2])
    return y, gw, gx, p, gp


def check_agreement(rng):
    x, wt, gy = _workload(rng, 5, 8, 17, 9)
    ours = _passes(_convcore, x, wt, gy)
    ref = _passes(fallback, x, wt, gy)
    for name, a, b in zip(("fwd", "bwd_w", "bwd_x", "pool", "pool_bwd"),
                          ours, ref):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12,
                                   err_msg=name)
    print("agreement: compiled and fallback kernels match to 1e-12")


def bench(impl, x, wt, gy, repeats):
    _passes(impl, x, wt, gy)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        _passes(impl, x, wt, gy)
        best = min(best, time.perf_counter() - t0)
    return best


def parse_sizes(text):
    out = []
    for part in text.split(","):
        r, f = part.lower().split("x")
        out.append((int(r), int(f)))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--sizes", type=parse_sizes, default="32x16,128x16,512x16",
                    help="comma-separated RxF pair-map sizes")
    args = ap.parse_args()
    sizes = args.sizes if isinstance(args.sizes, list) else parse_sizes(args.sizes)

    print(f"default backend: {BACKEND}")
    if _convcore is None:
        print("compiled extension not built; nothing to compare")
        return

    rng = np.random.default_rng(0)
    check_agreement(rng)

    print(f"{'size':>10} {'channels':>10} {'compiled':>12} {'fallback':>12} "
          f"{'speedup':>8}")
    for h, w in sizes:
        for c_in, c_out in ((16, 16), (16, 32)):
            x, wt, gy = _workload(rng, c_in, c_out, h, w)
            tc = bench(_convcore, x, wt, gy, args.repeats)
            tf = bench(fallback, x, wt, gy, args.repeats)
            print(f"{h:>6}x{w:<3} {c_in:>4}->{c_out:<4} {tc * 1e3:>10.3f}ms "
                  f"{tf * 1e3:>10.3f}ms {tf / tc:>7.2f}x")


if __name__ == "__main__":
    main()
