import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carbonstack import scheme as sc
from carbonstack.errors import DomainError, MechanismError, ParameterError
from carbonstack.scheme import Mechanism, SchemeParams, TwoPeriodScheme

E_MAX = 8760.0 * (1.2 * 30000.0 - 0.8 * 30000.0 / 1.4)


def two_period(cap1=1e8, cap2=1e8, p1=100.0, p2=100.0, extra=None, mech="bw"):
    return TwoPeriodScheme(SchemeParams(e_cap=cap1, penalty=p1, e_max=3e8),
                           SchemeParams(e_cap=cap2, penalty=p2, e_max=3e8), extra, mech)


def test_single_period_terminal_examples():
    s = SchemeParams()
    assert s.e_max == pytest.approx(1.6519e8, rel=5e-4)
    assert sc.single_period_terminal(s, 0.0) == 0.0
    assert sc.single_period_terminal(s, 1.17e8) == 100.0
    assert sc.single_period_terminal(s, s.e_max) == 100.0
    assert sc.single_period_terminal(s, np.nextafter(1.17e8, 0)) == 0.0


def test_single_period_single_jump():
    s = SchemeParams()
    e = np.linspace(0, s.e_max, 10001)
    v = sc.single_period_terminal(s, e)
    jumps = np.flatnonzero(np.diff(v))
    assert len(jumps) == 1
    assert v[jumps[0] + 1] - v[jumps[0]] == pytest.approx(s.penalty)
    assert e[jumps[0] + 1] >= s.e_cap > e[jumps[0]]


def test_scheme_validation():
    with pytest.raises(ParameterError):
        SchemeParams(e_cap=-1.0)
    with pytest.raises(ParameterError):
        SchemeParams(penalty=-1.0)
    with pytest.raises(ParameterError):
        SchemeParams(horizon=0.0)
    with pytest.raises(ParameterError):
        SchemeParams(e_cap=2e8)
    with pytest.raises(DomainError):
        sc.single_period_terminal(SchemeParams(), -1e6)


def test_discount():
    s = SchemeParams()
    assert s.discount(1.0) == 1.0
    assert s.discount(0.5) == pytest.approx(math.exp(-0.025))


def test_aggregate_supply_examples():
    s = two_period()
    assert sc.aggregate_supply_period2(s, 0.8e8) == pytest.approx(1.2e8)
    assert sc.aggregate_supply_period2(s, 1e8) == pytest.approx(1e8)
    assert sc.aggregate_supply_period2(s, 2e8) == 0.0
    assert sc.aggregate_supply_period2(s, 2.5e8) == 0.0


def test_aggregate_supply_monotone_lipschitz():
    s = two_period()
    e = np.linspace(0, 3e8, 3001)
    v = sc.aggregate_supply_period2(s, e)
    assert np.all(np.diff(v) <= 0)
    assert np.all(np.abs(np.diff(v)) <= np.diff(e) * (1 + 1e-12))


def test_phi2_examples():
    s = two_period()
    assert sc.phi2(s, 0.0, 0.0) == 0.0
    assert sc.phi2(s, 2e8, 0.0) == 100.0
    assert sc.phi2(s, 1.5e8, 0.5e8) == 100.0
    assert sc.phi2(s, 1e-3, 2e8) == 100.0


def test_phi1_bw_examples():
    s = two_period()
    assert sc.phi1_banking_withdrawal(s, 0.0, 30.0) == 30.0
    assert sc.phi1_banking_withdrawal(s, 1e8, 30.0) == 130.0
    assert sc.phi1_banking_withdrawal(s, 3e8, 30.0) == 200.0
    with pytest.raises(MechanismError):
        sc.phi1_borrowing(s, 0.0, 30.0)


def test_phi1_bbw_examples():
    s = two_period(mech="bbw")
    assert sc.phi1_borrowing(s, 1e8, 30.0) == 30.0
    assert sc.phi1_borrowing(s, 3e8, 30.0) == 200.0
    assert sc.phi1_borrowing(s, 0.0, 0.0) == 0.0
    with pytest.raises(MechanismError):
        sc.phi1_banking_withdrawal(s, 0.0, 30.0)


def test_extra_penalty_default_and_floor():
    s = two_period(p2=80.0)
    assert s.extra_penalty == 80.0
    with pytest.raises(ParameterError):
        two_period(extra=10.0)
    with pytest.raises(ParameterError):
        TwoPeriodScheme(SchemeParams(rate=0.05), SchemeParams(rate=0.04))
    assert Mechanism("bbw") is Mechanism.BANKING_BORROWING_WITHDRAWAL


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 3e8), st.floats(0, 200))
def test_borrowing_below_banking(e, a2):
    bw, bbw = two_period(), two_period(mech="bbw")
    assert sc.phi1(bbw, e, a2) <= sc.phi1(bw, e, a2)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 100), st.sampled_from(["bw", "bbw"]))
def test_phi1_non_decreasing(a2, mech):
    # a2 never exceeds the extra penalty (100 here): A2 <= exp(-r T2) pi2 <= extra
    s = two_period(mech=mech)
    e = np.linspace(0, 3e8, 601)
    v = sc.phi1(s, e, np.full_like(e, a2))
    assert np.all(np.diff(v) >= 0)


def test_phi1_bw_drops_when_a2_exceeds_extra_penalty():
    # outside the admissible range the middle branch p1 + a2 tops p1 + extra
    s = two_period()
    assert sc.phi1(s, 1.5e8, 150.0) == 250.0
    assert sc.phi1(s, 2.5e8, 150.0) == 200.0
