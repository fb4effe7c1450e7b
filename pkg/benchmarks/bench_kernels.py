"""Time the compiled kernels against the NumPy fallbacks.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. Each row
reports the best wall time of both backends and their ratio.
"""

import argparse
import timeit

import numpy as np

from hartree_mwo import _pykernels

try:
    from hartree_mwo import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases():
    rng = np.random.default_rng(0)
    n = 96
    u0 = rng.normal(size=n**3) + 1j * rng.normal(size=n**3)
    pot = rng.normal(size=n**3)
    r = np.linspace(0.0, 40.0, 200_000)
    rr = np.linspace(0.0, 12.0, 3000)
    state0 = np.stack([rr, rr / 64, rr**2 / 128, np.ones_like(rr), np.full_like(rr, 1 / 64)])

    def kick(mod):
        u = u0.copy()
        return lambda: mod.phase_kick(u, pot, 0.1)

    def vt1(mod):
        return lambda: mod.potential_vt1(r, 2.0, 0.06, 8533.0, 1)

    def chars(mod):
        def run():
            s = np.ascontiguousarray(state0.copy())
            mod.integrate_characteristics(s, 64.0, 2.0, 400, 0.06, 8533.0, 1)
        return run

    return [("phase_kick 96^3", kick), ("potential_vt1 2e5 radii", vt1),
            ("characteristics 3000 x 400 RK4", chars)]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    print(f"{'kernel':34s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, make in cases():
        tp = min(timeit.repeat(make(_pykernels), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:34s} {tp:11.4f} {'n/a':>11s} {'n/a':>8s}")
            continue
        tc = min(timeit.repeat(make(_ckernels), number=1, repeat=args.repeat))
        print(f"{name:34s} {tp:11.4f} {tc:11.4f} {tp / tc:8.1f}")


if __name__ == "__main__":
    main()
