"""End-to-end acceptance criteria on the bundled reference configuration.

Every criterion appends one PASS/FAIL line (printed in the pytest summary)
before asserting, so a red criterion still reports what it measured.
"""

import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

from carbonstack import analysis, config, montecarlo as mc, option, pde
from carbonstack.dynamics import JacobiParams
from carbonstack.montecarlo import PathConfig
from carbonstack.scheme import Mechanism, phi1
from carbonstack.stack import bau_emissions_rate, emissions_rate, max_emissions_rate

import oracles
from conftest import ACCEPTANCE_LINES

CFG = config.default()
ST, DY, SCHEME = CFG.stack, CFG.demand, CFG.scheme
PI = SCHEME.penalty
TABLE4 = {0.0: 1.32e8, 25.0: 1.23e8, 50.0: 1.20e8, 75.0: 1.18e8, 100.0: 1.17e8, 150.0: 1.16e8, 200.0: 1.15e8}
MEASURED = {}


def report(n, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def reference():
    grid, scheme = CFG.build_grid()
    return grid, scheme


@pytest.fixture(scope="module")
def study():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", pde.CflWarning)
        return analysis.refinement_study(analysis.table5_levels([1, 2, 3, 4]), SCHEME, DY, ST,
                                         alignment="stretch", cfl="warn")


def test_criterion_1_calibration_constants():
    e_all = max_emissions_rate(ST) * 1.0
    e_bau = bau_emissions_rate(ST, DY.d_bar) * 1.0
    r1, r2 = abs(e_all / 1.6519e8 - 1), abs(e_bau / 1.2961e8 - 1)
    report(1, r1 <= 5e-4 and r2 <= 5e-4,
           f"emissions bound {e_all:.6e} (rel {r1:.1e}), BAU at D_bar {e_bau:.6e} (rel {r2:.1e}); tol 5e-4")


def test_criterion_2_lemma1_properties():
    rng = np.random.default_rng(2024)
    n, xm = 10_000, ST.xi_max
    a1, a2 = rng.uniform(0, 300, n), rng.uniform(0, 300, n)
    d1, d2 = rng.uniform(0, xm, n), rng.uniform(0, xm, n)
    m11, m12, m21 = emissions_rate(ST, a1, d1), emissions_rate(ST, a1, d2), emissions_rate(ST, a2, d1)
    # endpoint resolution of the active set, turned into an emissions rate
    tol = 4e-10 * xm * ST.kappa * ST.e_max
    up = np.where(d2 > d1, m12 - m11, m11 - m12)
    dd = np.abs(d2 - d1)
    strict_d = int(np.sum(~(up >= ST.kappa * ST.e_min * dd - tol)) + np.sum(~(up[dd > 1.0] > 0)))
    weak_a = int(np.sum(~(np.where(a2 > a1, m21 - m11, m11 - m21) <= tol)))
    lip = int(np.sum(~(np.abs(m12 - m11) <= ST.kappa * ST.e_max * dd + tol)))
    top = max_emissions_rate(ST)
    glob = int(sum(np.sum(~((m >= 0) & (m <= top * (1 + 1e-12)))) for m in (m11, m12, m21)))
    total = strict_d + weak_a + lip + glob
    report(2, total == 0, f"10^4 pairs: violations strict-D {strict_d}, weak-A {weak_a}, "
                          f"Lipschitz {lip}, global bound {glob}")


def test_criterion_3_merit_order_oracle():
    a_vals = np.linspace(0.0, 200.0, 20)
    d_vals = np.linspace(ST.xi_max / 20, ST.xi_max, 20)
    worst = 0.0
    for a in a_vals:
        for d, m in zip(d_vals, emissions_rate(ST, a, d_vals)):
            ref = oracles.rearranged_rate(ST, a, d)
            worst = max(worst, abs(m - ref) / ref)
    report(3, worst < 1e-4, f"20x20 grid against a 10^5-segment rearranged stack: worst rel err {worst:.2e} (< 1e-4)")


def test_criterion_4_convergence(study):
    ei, e1 = study.err_inf, study.err_one
    MEASURED["err_one"] = e1
    dec = all(b < a for a, b in zip(ei, ei[1:])) and all(b < a for a, b in zip(e1, e1[1:]))
    in_inf = 0.05 <= ei[0] <= 0.11
    in_one = 0.004 <= e1[0] <= 0.010
    in_rate = 0.7 <= study.rate_inf <= 1.1
    faster = study.rate_one > study.rate_inf
    detail = (f"Err_inf {[round(x, 4) for x in ei]}, Err_1 {[round(x, 5) for x in e1]}, "
              f"rate_inf {study.rate_inf:.3f}, rate_1 {study.rate_one:.3f}; "
              f"decreasing {dec}, Err_inf_1 in [0.05,0.11] {in_inf}, Err_1_1 in [0.004,0.010] {in_one}, "
              f"rate in [0.7,1.1] {in_rate}; Err_1 decays faster {faster}")
    report(4, dec and in_inf and in_one and in_rate, detail)


def test_criterion_5_shape(reference):
    grid, scheme = reference
    n = grid.n_t
    sol = pde.solve_single_period(scheme, DY, ST, grid, levels=[0, n // 2, n], cfl="raise")
    j_cap = grid.node_index(scheme.e_cap)
    problems = []
    for k in (0, n // 2):
        u = sol.level(k)
        t = k * grid.delta_t
        if u.min() < -1e-8 or u.max() > PI + 1e-8:
            problems.append(f"t={t:g} bounds [{u.min():.2e}, {u.max():.6g}]")
        de, dd = np.diff(u, axis=1).min(), np.diff(u, axis=0).min()
        if de < -1e-8 * PI or dd < -1e-8 * PI:
            problems.append(f"t={t:g} monotone dE {de:.1e} dD {dd:.1e}")
        if not np.allclose(u[:, -1], math.exp(-scheme.rate * (1.0 - t)) * PI, rtol=1e-12, atol=0):
            problems.append(f"t={t:g} top row")
    digital = np.zeros(grid.shape)
    digital[:, j_cap:] = PI
    if not np.array_equal(sol.level(n), digital):
        problems.append("terminal not digital")
    report(5, not problems, f"level 3 (24x400x1760) at t=0, T/2, T: " + ("; ".join(problems) or
                                                                         "bounds, monotone (1e-8 pi), top row, digital"))


def test_criterion_6_monte_carlo(reference):
    grid, scheme = reference
    m = CFG.mc
    pc = PathConfig(n_paths=m.n_paths, n_steps=m.n_steps, seed=m.seed, d0=DY.d0, batch_size=m.batch_size)
    kw = dict(n_a=m.price_levels, n_demand_cells=m.demand_cells)
    res = mc.penalty_sweep(list(TABLE4), pc, DY, ST, scheme, grid, **kw)
    rel = {r.penalty: r.mean_emissions / TABLE4[r.penalty] - 1 for r in res}
    means = [r.mean_emissions for r in res]
    within = all(abs(v) <= 0.01 for v in rel.values())
    non_inc = all(b <= a for a, b in zip(means, means[1:]))
    alpha = mc.solve_for_simulation(scheme, DY, ST, grid, m.n_steps)
    small = mc.simulate(PathConfig(n_paths=m.n_paths // 16, n_steps=m.n_steps, seed=m.seed + 1, d0=DY.d0),
                        DY, ST, scheme, alpha, **kw)
    big = next(r for r in res if r.penalty == PI)
    ratio = small.std_error / big.std_error
    scaling = abs(ratio / 4 - 1) <= 0.2
    detail = ("; ".join(f"pi={p:g}: {r.mean_emissions:.5e} ({rel[p]:+.2%})" for p, r in zip(TABLE4, res))
              + f"; within 1% {within}; non-increasing {non_inc}; std err ratio n/16n {ratio:.2f} (4 +- 20%)")
    report(6, within and non_inc and scaling, detail)


def test_criterion_7_degenerate_noise(reference):
    grid, scheme = reference
    dyn = JacobiParams(eta=DY.eta, d_bar=DY.d_bar, sigma_bar=0.0, xi_max=DY.xi_max, d0=DY.d_bar)
    s0 = scheme.with_penalty(0.0)
    zero = pde.solve_single_period(s0, DY, ST, grid, levels="all")
    r = mc.simulate(PathConfig(n_paths=CFG.mc.n_paths, n_steps=CFG.mc.n_steps, seed=CFG.mc.seed, d0=DY.d_bar),
                    dyn, ST, s0, zero)
    rel = abs(r.mean_emissions / (bau_emissions_rate(ST, DY.d_bar) * 1.0) - 1)
    rel_paper = abs(r.mean_emissions / 1.2961e8 - 1)
    report(7, rel < 1e-6 and rel_paper <= 5e-4 and r.std_error == 0.0,
           f"E_T {r.mean_emissions:.6e}: rel to mu_bau(D_bar) T {rel:.1e} (< 1e-6), "
           f"to 1.2961e8 {rel_paper:.1e}; std err {r.std_error!r}")


def test_criterion_8_two_period():
    grid, tp = CFG.build_two_period_grid()
    n = grid.n_t
    keep = list(range(0, n + 1, n // 22)) + [n]
    sols = {}
    for mech in ("bw", "bbw"):
        t = replace(tp, mechanism=Mechanism(mech))
        sols[mech] = (t, pde.solve_two_period(t, DY, ST, grid, levels=sorted(set(keep)), cfl="raise"))
    worst = max(float(np.max(sols["bbw"][1].alpha1.level(k) - sols["bw"][1].alpha1.level(k))) for k in set(keep))
    order = worst <= pde.BOUND_SLACK
    half = sols["bw"][1].alpha1.level(n // 2)
    p1 = tp.period1.penalty
    j1 = grid.node_index(tp.period1.e_cap)
    exceeds = bool(np.all(half[:, j1:] > p1))
    e = grid.e_nodes.copy()
    for c in (tp.period1.e_cap, tp.combined_cap):
        if c <= grid.e_max:
            e[grid.node_index(c)] = c
    exact = all(np.array_equal(s.alpha1.level(n), phi1(t, np.broadcast_to(e, grid.shape), s.coupling))
                for t, s in sols.values())
    report(8, order and exceeds and exact,
           f"level 3: max(bbw - bw) over {len(set(keep))} time levels {worst:.1e} (<= {pde.BOUND_SLACK:g}); "
           f"bw alpha1(T1/2) > pi1 for all E >= E1_cap {exceeds} (min {half[:, j1:].min():.2f}, "
           f"max {half.max():.2f}); terminal slices equal phi1 {exact}")


def test_criterion_9_option(reference, study):
    grid, scheme = reference
    spec = option.OptionSpec(maturity=CFG.option_maturity(), strike=0.0)
    k_tau = grid.time_index(spec.maturity)
    alpha = pde.solve_single_period(scheme, DY, ST, grid, levels=range(k_tau + 1))
    keep = [0, k_tau // 2, k_tau]
    err1 = MEASURED.get("err_one", study.err_one)[2]
    norm = max(float(np.abs(alpha.level(k)).max()) for k in keep)
    v0 = option.solve_call(spec, alpha, scheme, DY, ST, levels=keep)
    dev = max(float(np.abs(v0.level(k) - alpha.level(k)).max()) for k in keep) / norm
    k_zero = dev <= 10 * err1
    strikes = [25.0, CFG.option.strike, 75.0, PI, 1.5 * PI]
    vals = [v0] + [option.solve_call(option.OptionSpec(spec.maturity, K), alpha, scheme, DY, ST, levels=keep)
                   for K in strikes]
    zero_above = all(np.all(v.level(k) == 0.0) for v, K in zip(vals[1:], strikes) if K >= PI for k in keep)
    worst_inc = max(float(np.max(b.level(k) - a.level(k))) for a, b in zip(vals, vals[1:]) for k in keep)
    non_inc = worst_inc <= 0.0
    report(9, k_zero and zero_above and non_inc,
           f"level 3, tau={spec.maturity:g}: |v(K=0) - alpha| / |alpha| {dev:.1e} (<= 10 Err_1_3 = {10 * err1:.1e}); "
           f"v = 0 for K >= pi {zero_above}; max increase in K {worst_inc:.1e}")
