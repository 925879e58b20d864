"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from rngworkbench import _backend


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(rng):
    blocks = rng.integers(0, 2, (200, 500), dtype=np.uint8)
    xs = rng.integers(0, 2, (64, 10007), dtype=np.uint8)
    y = rng.integers(0, 2, 10007, dtype=np.uint8)
    return {
        "lfsr 10^7 bits": lambda k: k.lfsr_bits(0, 32, 0x80200003, 10_000_000),
        "berlekamp-massey 200 x 500": lambda k: k.linear_complexities(blocks),
        "circulant 64 rows, p=10007": lambda k: k.cyclic_convolve_gf2(xs, y),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = {name: _backend.load(name) for name in _backend.available()}
    rng = np.random.default_rng(0)
    print(f"{'kernel':<30}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for label, run in cases(rng).items():
        secs = {name: best_of(lambda: run(mod), args.repeat) for name, mod in backends.items()}
        speedup = secs["python"] / secs["compiled"] if len(secs) == 2 else float("nan")
        print(f"{label:<30}" + "".join(f"{t:>11.3f}s" for t in secs.values()) + f"{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
