import math

import numpy as np
import pytest

from carbonstack import option, pde
from carbonstack.dynamics import JacobiParams
from carbonstack.errors import MissingAllowanceError, ParameterError
from carbonstack.option import OptionSpec

DY = JacobiParams()
# The central D stencil is not monotone on this coarse mesh (cell Peclet number
# above one near the degenerate faces). Excursions are held to the solver's
# own instability tolerance.
TOL = pde.BOUND_SLACK + pde.INSTABILITY_RTOL * 100


@pytest.fixture(scope="module")
def calls(alpha2, scheme2, stack):
    out = {}
    for K in (0.0, 25.0, 50.0, 75.0, 100.0, 150.0):
        out[K] = option.solve_call(OptionSpec(0.5, K), alpha2, scheme2, DY, stack)
    return out


def test_zero_strike_is_the_allowance(calls, alpha2):
    v = calls[0.0]
    assert list(v.levels) == list(range(221))
    for k in v.levels:
        # the payoff clips the allowance's tiny negative undershoots at maturity
        np.testing.assert_allclose(v.level(k), alpha2.level(k), rtol=0, atol=TOL)


@pytest.mark.parametrize("K", [100.0, 150.0])
def test_strike_above_penalty_is_worthless(calls, K):
    assert np.all(calls[K].values == 0.0)


def test_non_increasing_in_strike(calls):
    ks = sorted(calls)
    for lo, hi in zip(ks, ks[1:]):
        assert np.all(calls[hi].values <= calls[lo].values + TOL)


def test_payoff_bounds(calls, scheme2, grid2):
    for K, v in calls.items():
        spec = OptionSpec(0.5, K)
        for k in v.levels:
            bound = option.call_upper_bound(spec, scheme2, k * grid2.delta_t)
            vals = v.level(k)
            assert vals.min() >= -TOL
            assert vals.max() <= bound + TOL


def test_top_face(calls, scheme2, grid2):
    v = calls[50.0]
    for k in (0, 100, 219):
        t = k * grid2.delta_t
        expected = math.exp(-0.05 * (1 - t)) * max(100 - math.exp(0.05 * 0.5) * 50, 0)
        np.testing.assert_allclose(v.level(k)[:, -1], expected, rtol=1e-14)


def test_terminal_is_payoff(calls, alpha2):
    np.testing.assert_array_equal(calls[50.0].level(220), np.maximum(alpha2.level(220) - 50, 0))


def test_shape_at_half_maturity(calls):
    v = calls[50.0].level(110)
    assert v[6, -2] > v[6, 0]
    j = v.shape[1] // 2
    assert v[-1, j] > v[0, j]


def test_price_call(alpha2, scheme2, stack, calls):
    p = option.price_call(OptionSpec(0.5, 50.0), alpha2, scheme2, DY, stack, 21000.0)
    assert p == pytest.approx(pde.evaluate(calls[50.0], 0.0, 21000.0, 0.0))
    assert 0 < p < 50


def test_missing_levels(alpha2, scheme2, stack):
    partial = pde.SurfaceSeries(alpha2.grid, [0, 220], np.stack([alpha2.level(0), alpha2.level(220)]))
    with pytest.raises(MissingAllowanceError):
        option.solve_call(OptionSpec(0.5, 50.0), partial, scheme2, DY, stack)
    only_start = pde.SurfaceSeries(alpha2.grid, [0], alpha2.level(0)[None])
    with pytest.raises(MissingAllowanceError):
        option.solve_call(OptionSpec(0.5, 50.0), only_start, scheme2, DY, stack)


def test_spec_validation(alpha2, scheme2, stack):
    with pytest.raises(ParameterError):
        option.solve_call(OptionSpec(1.5, 50.0), alpha2, scheme2, DY, stack)
    with pytest.raises(ParameterError):
        option.solve_call(OptionSpec(0.5, -1.0), alpha2, scheme2, DY, stack)
