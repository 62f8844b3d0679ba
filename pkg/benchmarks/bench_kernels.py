"""Compare the compiled and pure-numpy simulation kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Times one 24 ns pulse propagator on the measured device and a 40-cycle
population sweep, checks that both paths agree, and prints a table.
"""

import argparse
import time

import numpy as np

from adiabatic_cz import _kernels
from adiabatic_cz.device import ANGULAR_PER_MHZ, load_device
from adiabatic_cz.dynamics import _gauss_frequencies
from adiabatic_cz.pulses import cosine_pulse


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    device = load_device("measured_device")
    idle = device.operating_point()
    pulse = cosine_pulse(24.0, idle, 3500.0, 0.01)
    f_gauss, h = _gauss_frequencies(pulse, 1200)
    parts = [np.ascontiguousarray(p, dtype=np.complex128) for p in device.hamiltonian_parts()]
    prop = (*parts, f_gauss, h, ANGULAR_PER_MHZ)

    U = _kernels.magnus4_propagate_numpy(*prop)
    psi0 = np.zeros(device.dimension, complex)
    psi0[0] = 1.0
    cyc = (U, psi0, 40)

    _kernels.magnus4_propagate_numba(*prop)  # compile
    _kernels.cycle_populations_numba(*cyc)

    rows = []
    for name, numba_fn, numpy_fn, a in (
        ("magnus4_propagate (1200 steps)", _kernels.magnus4_propagate_numba, _kernels.magnus4_propagate_numpy, prop),
        ("cycle_populations (40 cycles)", _kernels.cycle_populations_numba, _kernels.cycle_populations_numpy, cyc),
    ):
        t_jit, r_jit = best_of(lambda: numba_fn(*a), args.repeat)
        t_np, r_np = best_of(lambda: numpy_fn(*a), args.repeat)
        rows.append((name, t_jit, t_np, float(np.max(np.abs(r_jit - r_np)))))

    print(f"dimension {device.dimension}, best of {args.repeat}")
    print(f"{'kernel':34s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s} {'max diff':>10s}")
    for name, a, b, diff in rows:
        print(f"{name:34s} {1e3 * a:11.2f} {1e3 * b:11.2f} {b / a:8.2f} {diff:10.1e}")


if __name__ == "__main__":
    main()
