import math

import numpy as np
import pytest

from carbonstack import kernels, montecarlo as mc, pde
from carbonstack.dynamics import JacobiParams
from carbonstack.errors import MissingAllowanceError, ParameterError
from carbonstack.montecarlo import PathConfig
from carbonstack.scheme import SchemeParams
from carbonstack.stack import bau_emissions_rate

DY = JacobiParams()


def zero_allowance(grid):
    return pde.SurfaceSeries(grid, np.arange(grid.n_t + 1), np.zeros((grid.n_t + 1,) + grid.shape))


@pytest.fixture(scope="module")
def alpha_for_mc(scheme2, stack, grid2):
    return mc.solve_for_simulation(scheme2, DY, stack, grid2, 365)


def test_mean_and_stderr():
    m, s = mc.mean_and_stderr([1.0, 2.0, 3.0])
    assert m == 2.0 and s == pytest.approx(math.sqrt(1 / 3))
    m, s = mc.mean_and_stderr([5.0])
    assert m == 5.0 and math.isnan(s)
    m, s = mc.mean_and_stderr(np.full(1000, 1.2961e8))
    assert m == 1.2961e8 and s == 0.0


def test_path_config_validation():
    with pytest.raises(ParameterError):
        PathConfig(n_paths=0)
    with pytest.raises(ParameterError):
        PathConfig(n_steps=0)
    with pytest.raises(ParameterError):
        PathConfig(seed=-1)


def test_degenerate_noise_is_exact(stack, grid2):
    dyn = JacobiParams(sigma_bar=0.0)
    s = SchemeParams(penalty=0.0, e_max=grid2.e_max)
    r = mc.simulate(PathConfig(n_paths=1000, d0=dyn.d_bar), dyn, stack, s, zero_allowance(grid2))
    bau = bau_emissions_rate(stack, dyn.d_bar)
    assert r.mean_emissions == pytest.approx(bau, rel=1e-12)
    assert r.mean_emissions == pytest.approx(1.2961e8, rel=5e-4)
    assert r.std_error == 0.0


def test_reproducible(alpha_for_mc, scheme2, stack):
    cfg = PathConfig(n_paths=3000, seed=5, batch_size=1024)
    a = mc.simulate(cfg, DY, stack, scheme2, alpha_for_mc, keep_paths=True)
    b = mc.simulate(cfg, DY, stack, scheme2, alpha_for_mc, keep_paths=True)
    assert a.mean_emissions == b.mean_emissions and a.std_error == b.std_error
    np.testing.assert_array_equal(a.terminal, b.terminal)
    c = mc.simulate(PathConfig(n_paths=3000, seed=6, batch_size=1024), DY, stack, scheme2, alpha_for_mc)
    assert c.mean_emissions != a.mean_emissions
    assert 0 <= a.mean_emissions <= scheme2.e_max and a.std_error > 0


def test_std_error_scaling(alpha_for_mc, scheme2, stack):
    small = mc.simulate(PathConfig(n_paths=2000, seed=1), DY, stack, scheme2, alpha_for_mc)
    large = mc.simulate(PathConfig(n_paths=32000, seed=2), DY, stack, scheme2, alpha_for_mc)
    assert small.std_error / large.std_error == pytest.approx(4.0, rel=0.2)


def test_emissions_non_decreasing_along_paths(alpha_for_mc, scheme2, stack, grid2):
    # the first k steps of a path only read the first k normals
    n_steps = 60
    lv = mc.mc_levels(grid2, n_steps)
    used = np.unique(lv)
    levels = np.ascontiguousarray(np.stack([pde.solve_single_period(
        scheme2, DY, stack, grid2, levels=set(used.tolist())).level(k) for k in used]))
    los = np.searchsorted(used, lv).astype(np.int64)
    tab = mc._demand_table(stack, 100.0, 65, 600)
    z = np.random.default_rng(0).standard_normal((500, n_steps))
    prev = np.zeros(500)
    for k in range(1, n_steps + 1):
        e = kernels.simulate_paths(21000.0, levels, los[:k], np.ascontiguousarray(z[:, :k]), tab, 100.0,
                                   DY.d_bar, DY.eta, 2 * DY.eta * DY.sigma_bar, DY.xi_max,
                                   grid2.e_max, 1.0 / n_steps, grid2.delta_e)
        assert np.all(e >= prev)
        prev = e


def test_demand_mean_reverts_to_d_bar():
    # with an emissions rate equal to D, E_T / T is the time-averaged demand of the path
    n_paths, n_steps = 20000, 365
    z = np.random.default_rng(9).standard_normal((n_paths, n_steps))
    tab = np.tile(np.linspace(0.0, DY.xi_max, 301), (2, 1))
    e = kernels.simulate_paths(DY.d_bar, np.zeros((1, 3, 3)), np.zeros(n_steps, dtype=np.int64), z, tab,
                               1.0, DY.d_bar, DY.eta, 2 * DY.eta * DY.sigma_bar, DY.xi_max, 1e30,
                               1.0 / n_steps, 1e29)
    m, se = mc.mean_and_stderr(e)
    assert abs(m - DY.d_bar) <= 3 * se


def test_missing_levels(scheme2, stack, grid2):
    partial = pde.solve_single_period(scheme2, DY, stack, grid2, levels=[0])
    with pytest.raises(MissingAllowanceError):
        mc.simulate(PathConfig(n_paths=10), DY, stack, scheme2, partial)


def test_penalty_sweep(scheme2, stack, grid2):
    cfg = PathConfig(n_paths=4000, seed=3)
    res = mc.penalty_sweep([0.0, 50.0, 100.0, 200.0], cfg, DY, stack, scheme2, grid2)
    means = [r.mean_emissions for r in res]
    assert [r.penalty for r in res] == [0.0, 50.0, 100.0, 200.0]
    assert all(b <= a for a, b in zip(means, means[1:]))
    (bau,) = mc.penalty_sweep([0.0], cfg, DY, stack, scheme2, grid2)
    assert bau.mean_emissions == res[0].mean_emissions
