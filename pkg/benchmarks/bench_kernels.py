"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, size, backend) with the best time per call
and the speed-up of the compiled backend, after checking that both
backends agree on the inputs being timed.
"""
import argparse
import timeit

import numpy as np

from stochhom.kernels import available_backends


def tridiag_case(n, rng):
    h = 1.0 / (n + 1)
    dt = 1.0 / 640.0
    a = 1.0 / (2.0 + np.sin(2 * np.pi * np.arange(n + 1) * h / 0.05))
    diag = 1.0 + dt * (a[:-1] + a[1:]) / h**2
    off = -dt * a[1:-1] / h**2
    return (off, diag, off.copy(), rng.standard_normal(n))


def ou_case(samples, n, modes, rng):
    x = np.arange(1, n + 1) / (n + 1)
    k = np.arange(1, modes + 1)
    basis = np.sqrt(2.0) * np.sin(np.pi * np.outer(k, x))
    amp = np.sqrt(0.25 * k**-2.0)
    v = rng.standard_normal((samples, n))
    xi = np.ascontiguousarray(np.broadcast_to(np.sin(np.pi * x), v.shape))
    z = rng.standard_normal((samples, modes))
    return (v, xi, 0.9, amp, z, basis)


def bench(name, args, backends, repeat):
    results = {}
    for label, mod in backends.items():
        fn = getattr(mod, name)
        results[label] = fn(*args)
        number = max(1, int(0.2 / max(1e-7, timeit.timeit(lambda: fn(*args), number=1))))
        best = min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number
        results[label + "_time"] = best
    ref = results["python"]
    for label in backends:
        if not np.allclose(results[label], ref, rtol=1e-10, atol=1e-12):
            raise AssertionError(f"{name}: backend {label} disagrees with the fallback")
    return {label: results[label + "_time"] for label in backends}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; timing the fallback only")
    cases = [
        ("tridiag_solve", f"n={n}", tridiag_case(n, rng)) for n in (159, 1279, 16383)
    ] + [
        ("ou_update", f"S={s} N={n} K={k}", ou_case(s, n, k, rng)) for s, n, k in ((1, 159, 16), (10000, 63, 16))
    ]
    for kernel, size, case in cases:
        times = bench(kernel, case, backends, args.repeat)
        line = f"{kernel:14s} {size:22s}" + "".join(f" {b}={t * 1e6:10.1f}us" for b, t in times.items())
        if "compiled" in times:
            line += f"  speed-up x{times['python'] / times['compiled']:.2f}"
        print(line)


if __name__ == "__main__":
    main()
