"""Compare the compiled and numpy kernel backends.

Times the stencil and constitutive kernels on their own and a full Strang
step of the medium-2d problem, once per backend.

    python3 benchmarks/bench_kernels.py --n 320 --repeat 5
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

_FULL_STEP = """
import timeit, numpy as np
from westervelt import BACKEND
from westervelt.scenarios import build_problem, default_config
from westervelt.derham import build_complex
from westervelt.integrator import SplitStepper
prob = build_problem(default_config("medium-2d", resolutions=({n},), dt_policy="auto"), {n})
stepper = SplitStepper(build_complex(prob.grid), prob.params, prob.forcing, prob.weights)
state = prob.state
t = min(timeit.repeat(lambda: stepper.step_strang(state, prob.dt), number={number}, repeat={repeat})) / {number}
print(BACKEND, t)
"""


def bench_kernels(n, repeat, number):
    from westervelt import kernels

    rng = np.random.default_rng(0)
    shape3 = (n, n, 1)
    u = rng.standard_normal(n * n)
    p = rng.uniform(-1, 1, n * n)
    rho = kernels.density_from_pressure(p, 0.2, 1.0 / n ** 2)
    cases = {
        "diff_forward x": lambda impl: kernels.diff_forward(u, shape3, 0, impl),
        "diff_forward y": lambda impl: kernels.diff_forward(u, shape3, 1, impl),
        "diff_backward x": lambda impl: kernels.diff_backward(u, shape3, 0, impl),
        "density_from_pressure": lambda impl: kernels.density_from_pressure(p, 0.2, 1.0 / n ** 2, impl),
        "pressure_from_density": lambda impl: kernels.pressure_from_density(rho, 0.2, 1.0 / n ** 2, impl),
    }
    rows = []
    for name, fn in cases.items():
        times = {}
        for backend, impl in kernels.BACKENDS.items():
            times[backend] = min(timeit.repeat(lambda: fn(impl), number=number, repeat=repeat)) / number
        rows.append((name, times))
    return rows


def bench_step(n, repeat, number, backend):
    env = dict(os.environ, WESTERVELT_KERNELS=backend)
    code = _FULL_STEP.format(n=n, repeat=repeat, number=number)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, t = out.stdout.split()
    return name, float(t)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=320, help="grid size per axis (2D)")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=20)
    args = parser.parse_args(argv)

    from westervelt.kernels import BACKENDS

    backends = list(BACKENDS)
    print(f"grid {args.n}x{args.n}, best of {args.repeat} x {args.number}")
    print(f"{'kernel':24s}" + "".join(f"{b:>14s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, times in bench_kernels(args.n, args.repeat, args.number):
        line = f"{name:24s}" + "".join(f"{times[b] * 1e6:12.1f}us" for b in backends)
        if len(backends) > 1:
            line += f"{times['python'] / times['compiled']:11.2f}x"
        print(line)
    step = {}
    for b in backends:
        got, t = bench_step(args.n, args.repeat, max(1, args.number // 4), b)
        step[got] = t
    line = f"{'strang step (medium-2d)':24s}" + "".join(f"{step[b] * 1e3:12.2f}ms" for b in backends)
    if len(backends) > 1:
        line += f"{step['python'] / step['compiled']:11.2f}x"
    print(line)


if __name__ == "__main__":
    main()
