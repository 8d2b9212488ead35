#!/usr/bin/env python3
"""Time the numba kernels against their numpy fallbacks and check they agree.

    python benchmarks/bench_kernels.py [--repeat 3] [--paths 20000]

Both implementations are importable side by side; the CARBONSTACK_BACKEND
environment variable only decides which one the package dispatches to.
"""

import argparse
import time

import numpy as np

from carbonstack import kernels
from carbonstack.dynamics import JacobiParams
from carbonstack.montecarlo import mc_levels
from carbonstack.pde import PdeOperator, grid_for_caps, solve_single_period
from carbonstack.scheme import SchemeParams
from carbonstack.stack import StackParams, max_emissions_rate, rate_table


def best_of(fn, repeat):
    fn()  # warm-up (JIT compile or cache load)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_active_set(stack, repeat):
    a = np.repeat(np.linspace(0, 200, 129), 1001)
    d = np.tile(np.linspace(0, stack.xi_max, 1001), 129)
    tn, ln = best_of(lambda: kernels.active_left_end_numba(a, d, stack.coeffs), repeat)
    tp, lp = best_of(lambda: kernels.active_left_end_numpy(a, d, stack.coeffs), repeat)
    return "active set (129x1001)", tn, tp, float(np.max(np.abs(ln - lp)))


def bench_pde(stack, dyn, level, repeat, n_steps=50):
    nd, ne, nt = level
    g = grid_for_caps(nd, ne, nt, 1.17e8, max_emissions_rate(stack), stack.xi_max, 1.0)
    op = PdeOperator(g, dyn, stack, 0.05, 100.0)
    j = g.node_index(1.17e8)
    u0 = np.zeros((1,) + g.shape)
    u0[0, :, j:] = 100.0
    top = np.full((1, g.n_d + 1), 100.0)

    def run(step):
        u = u0.copy()
        out = np.empty_like(u)
        for _ in range(n_steps):
            step(u, u, out, op.diff, op.drift, op.rates, op.a_step, g.delta_t, op.inv_de, op.rate, top)
            u, out = out, u
        return u

    tn, un = best_of(lambda: run(kernels.pde_step_numba), repeat)
    tp, up = best_of(lambda: run(kernels.pde_step_numpy), repeat)
    return f"pde {n_steps} steps on {nd}x{ne}", tn, tp, float(np.max(np.abs(un - up)))


def bench_paths(stack, dyn, n_paths, repeat):
    g = grid_for_caps(12, 200, 440, 1.17e8, max_emissions_rate(stack), stack.xi_max, 1.0)
    s = SchemeParams(e_max=g.e_max)
    n_steps = 365
    lv = mc_levels(g, n_steps)
    used = np.unique(lv)
    alpha = solve_single_period(s, dyn, stack, g, levels=set(used.tolist()))
    stacked = np.ascontiguousarray(np.stack([alpha.level(k) for k in used]))
    los = np.searchsorted(used, lv).astype(np.int64)
    tab = np.ascontiguousarray(rate_table(stack, np.linspace(0, 100, 129), np.linspace(0, stack.xi_max, 1501)))
    z = np.random.default_rng(1).standard_normal((n_paths, n_steps))
    args = (dyn.d0, stacked, los, z, tab, 100.0, dyn.d_bar, dyn.eta, 2 * dyn.eta * dyn.sigma_bar,
            dyn.xi_max, g.e_max, 1.0 / n_steps, g.delta_e)
    tn, en = best_of(lambda: kernels.simulate_paths_numba(*args), repeat)
    tp, ep = best_of(lambda: kernels.simulate_paths_numpy(*args), repeat)
    return f"paths {n_paths}x{n_steps}", tn, tp, float(np.max(np.abs(en - ep)) / g.e_max)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--paths", type=int, default=20000)
    args = ap.parse_args(argv)
    stack, dyn = StackParams(), JacobiParams()
    rows = [
        bench_active_set(stack, args.repeat),
        bench_pde(stack, dyn, (12, 200, 440), args.repeat),
        bench_pde(stack, dyn, (48, 800, 7040), args.repeat),
        bench_paths(stack, dyn, args.paths, args.repeat),
    ]
    print(f"{'kernel':<28}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}{'max diff':>12}")
    for name, tn, tp, diff in rows:
        print(f"{name:<28}{tn:>12.4f}{tp:>12.4f}{tp / tn:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()

