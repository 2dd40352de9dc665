"""Timing comparison between the numpy and compiled kernel backends.

Shapes mirror the four encoder blocks under the default configuration:
a batch of log-mel segments enters as (B, 1, 511, 128) and shrinks by the
per-block pooling factors. Each case first cross-checks that the two
backends agree, then reports the best-of-`repeats` wall time for each.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --batch 8 --repeats 5
"""

import argparse
import time

import numpy as np

from melmask.kernels import available_backends, get_backend


def block_cases(batch):
    """(name, x_shape, w_shape, pool) per encoder block, default config."""
    cases = []
    h, w = 511, 128
    channels = (64, 128, 128, 64)
    pools = ((2, 4), (2, 4), (2, 4), (2, 2))
    c_in = 1
    for i, (c_out, pool) in enumerate(zip(channels, pools)):
        cases.append((f"block{i}", (batch, c_in, h, w), (c_out, c_in, 3, 3), pool))
        h //= pool[0]
        w //= pool[1]
        c_in = c_out
    return cases


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def check_agreement(backends, x, w, pool):
    """Both backends must produce identical results before timing them."""
    ref = backends["numpy"]
    y_ref = ref.conv2d_forward(x, w, pad=(1, 1))
    gy = np.ones_like(y_ref)
    gx_ref, gw_ref = ref.conv2d_backward(x, w, gy, pad=(1, 1))
    p_ref, arg_ref = ref.maxpool2d_forward(y_ref, pool)
    for name, mod in backends.items():
        if mod is ref:
            continue
        y = mod.conv2d_forward(x, w, pad=(1, 1))
        gx, gw = mod.conv2d_backward(x, w, gy, pad=(1, 1))
        p, arg = mod.maxpool2d_forward(y, pool)
        for got, want in ((y, y_ref), (gx, gx_ref), (gw, gw_ref), (p, p_ref)):
            err = np.max(np.abs(got - want))
            if err > 1e-9:
                raise SystemExit(f"backend {name} disagrees with numpy: {err:.3e}")
        if not np.array_equal(arg, arg_ref):
            raise SystemExit(f"backend {name} picks different pooling argmaxes")
    return y_ref, gy, arg_ref


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=4, help="batch size (default 4)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats, best is reported (default 3)")
    args = parser.parse_args()

    names = available_backends()
    backends = {n: get_backend(n) for n in names}
    print(f"backends: {', '.join(names)}")
    if len(names) == 1:
        print("compiled extension not built; timing the numpy backend only")

    rng = np.random.default_rng(0)
    header = f"{'case':<28}" + "".join(f"{n:>12}" for n in names)
    print(header)
    for block, x_shape, w_shape, pool in block_cases(args.batch):
        x = rng.standard_normal(x_shape)
        w = rng.standard_normal(w_shape) * 0.1
        y, gy, argmax = check_agreement(backends, x, w, pool)
        gp = np.ones(argmax.shape)
        ops = {
            "conv2d_forward": lambda m: m.conv2d_forward(x, w, pad=(1, 1)),
            "conv2d_backward": lambda m: m.conv2d_backward(x, w, gy, pad=(1, 1)),
            "maxpool2d_forward": lambda m: m.maxpool2d_forward(y, pool),
            "maxpool2d_backward": lambda m: m.maxpool2d_backward(
                gp, argmax, y.shape, pool),
        }
        print(f"-- {block}: x{tuple(x_shape)} w{tuple(w_shape)} pool{pool}")
        for op_name, call in ops.items():
            cells = []
            for n in names:
                t = best_time(lambda m=backends[n]: call(m), args.repeats)
                cells.append(f"{t * 1e3:9.1f}ms")
            print(f"  {op_name:<26}" + "".join(f"{c:>12}" for c in cells))
    if "compiled" in names and "numpy" in names:
        print("\nlower is better; identical outputs were verified before timing")


if __name__ == "__main__":
    main()
