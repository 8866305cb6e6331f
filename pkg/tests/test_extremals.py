import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weighted_hardy.extremals import (
    analytic_ratio,
    analytic_terms,
    convexity_gap,
    extremal_profile,
    sharpness_sweep,
    vanishing_family,
)
from weighted_hardy.inequality import PreconditionError

from conftest import make_tset


def test_t2_extremal_closed_form():
    # w = t^2, p = 2, eta = mu = 1: f = 1/t, u = t^-(1/2 - eps),
    # energy (1/2 - eps)^2 / (2 eps), Hardy integral 1 / (2 eps), boundary 1/2
    ts = make_tset("t2", 2.0)
    eps = 0.1
    lhs, rhs = analytic_terms(ts, eps)
    assert lhs == pytest.approx(0.8, rel=1e-14)
    assert rhs == pytest.approx(0.25 * 5.0 - 0.5, rel=1e-14)
    row = sharpness_sweep(ts, [eps])[0]
    assert row.lhs == pytest.approx(0.8, rel=1e-6)
    assert row.ratio == pytest.approx(0.9375, rel=1e-6)
    assert analytic_ratio(2.0, -1, eps) == pytest.approx(0.9375, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(p=st.floats(1.1, 6.0), eps=st.floats(1e-6, 0.3), s=st.sampled_from([-1, 1]))
def test_convexity_gap_nonnegative(p, eps, s):
    pc = p / (p - 1.0)
    if s < 0 and eps >= 1.0 / pc:
        return
    assert convexity_gap(p, s, eps) >= -1e-15


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_ratio_tends_to_one(p):
    vals = [analytic_ratio(p, s, e) for s in (-1, 1) for e in (1e-4, 1e-6)]
    assert all(abs(v - 1.0) < 1e-3 for v in vals)


@pytest.mark.parametrize("name", ["constant", "exp_neg_inv", "exp_pos_inv_sqrt"])
def test_numeric_and_analytic_paths_agree(name):
    ts = make_tset(name, 2.0)
    rows = sharpness_sweep(ts, [0.05, 0.01, 0.002], numeric_min_eps=1e-3)
    for r in rows:
        assert r.discrepancy <= 1e-4
        assert not r.analytic_only


def test_analytic_only_below_threshold():
    rows = sharpness_sweep(make_tset("t2", 3.0), [0.01, 1e-4], numeric_min_eps=1e-3)
    assert not rows[0].analytic_only and rows[1].analytic_only


def test_sweep_needs_decreasing_eps():
    with pytest.raises(PreconditionError):
        sharpness_sweep(make_tset("t2", 2.0), [0.01, 0.1])


def test_profile_values_match_power_of_f():
    ts = make_tset("exp_neg_inv_sqrt", 3.0)
    u = extremal_profile(ts, 0.05)
    log_f = ts.evaluate_at_log(np.log(u.grid)).log_f
    a = 1.0 / 1.5 - 0.05
    assert np.allclose(np.log(u.values), a * log_f, rtol=1e-12, atol=1e-12)


def test_vanishing_family_energy():
    ts = make_tset("t2", 2.0)
    fam = vanishing_family(ts, 1e-3)
    # f = 1/t: Delta = 1/eps_bar - 2 and the energy is 1/Delta
    assert fam.energy_closed_form == pytest.approx(1.0 / 998.0, rel=1e-12)
    assert fam.energy == pytest.approx(fam.energy_closed_form, rel=1e-9)
    # the exact ramp minimises the energy for its end values
    assert fam.energy_closed_form <= fam.energy_piecewise_linear <= 1.001 * fam.energy_closed_form


def test_vanishing_family_needs_p_class():
    with pytest.raises(PreconditionError):
        vanishing_family(make_tset("constant", 2.0), 1e-3)
