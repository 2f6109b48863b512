"""Time the numba kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each kernel is run once untimed (numba compilation, caches), then timed
as the best of ``--repeat`` runs. Results are checked for equality so a
speedup is never reported for a kernel that computes something else.
"""
import argparse
import time

import numpy as np

from kvh_lab._backend import get_kernels
from kvh_lab.hamiltonians import HamiltonianModel
from kvh_lab.phase_space import PhaseGrid, partial_derivative
from kvh_lab.propagation import _rk4_fields
from kvh_lab.wavefunction import InitialStateSpec, make_initial


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def _cases():
    grid = PhaseGrid(2, -6.0, 6.0, 40)
    chi = make_initial(InitialStateSpec((0.5, -0.3, 0.2, 0.4), 0.6, (0.3, -0.2, 0.5, 0.1)), grid)
    model = HamiltonianModel.anharmonic(2, a=1.0, b=0.05)
    x, a, inv_h = _rk4_fields(model, grid, "kvh")
    values = np.asarray(chi.values)

    def rk4(k):
        return lambda: k.rk4_step(values, 1e-3, x, a, inv_h, 1.0)

    def fd(k):
        backend = "numba" if k.__name__.endswith("numba") else "numpy"
        return lambda: partial_derivative(values, grid, 1, backend=backend)

    kep = HamiltonianModel.kepler(3, mu=1.0, lam=1.0)
    z = np.random.default_rng(0).normal(size=(4096, 6)) * 0.05 + [1.0, 0, 0, 0, 1.0, 0]

    def flow(k):
        return lambda: k.integrate_flow(kep.code, kep.params, 3, z, 4.5e-3, 200, 0)[0]

    return [("rk4_step 40^4 kvh", rk4), ("partial_derivative 40^4", fd),
            ("kepler flow 4096 x 200 steps", flow)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    nb, npk = get_kernels("numba"), get_kernels("numpy")
    print(f"{'kernel':32s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}  equal")
    for name, make in _cases():
        t_np, a = _best(make(npk), args.repeat)
        t_nb, b = _best(make(nb), args.repeat)
        eq = bool(np.array_equal(a, b))
        print(f"{name:32s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.2f}  {eq}")


if __name__ == "__main__":
    main()
