import numpy as np
import pytest

from weighted_hardy.identities import (
    IDENTITIES,
    assembled_check,
    boundary_integral_check,
    elementary_lower_bound,
    ground_state_check,
    identity_sides,
    pointwise_derivative_bound,
    substitution_frame,
    verify_pointwise_identity,
    weighted_t_bound_check,
)
from weighted_hardy.inequality import PreconditionError, random_test_function

from conftest import make_tset

# best constants from an mpmath grid search refined by golden section
ELEMENTARY_ORACLE = [
    ({"p": 2.0, "q": 2.0}, 1.0),
    ({"p": 3.0, "q": 2.0}, 1.5),
    ({"p": 3.0, "q": 3.0}, 0.585786437626905),
    ({"p": 4.0, "q": 2.5}, 1.37472350698641),
    ({"p": 1.5, "M": 2.0}, 0.422903744714289),
    ({"p": 1.5, "M": 1.0}, 0.32842712474619),
    ({"p": 1.2, "M": 3.0}, 0.181428060032729),
]


@pytest.mark.parametrize("kw,expected", ELEMENTARY_ORACLE)
def test_elementary_constant(kw, expected):
    assert elementary_lower_bound(**kw).c_estimate == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("kw", [{"p": 1.0}, {"p": 3.0, "q": 4.0}, {"p": 1.5}, {"p": 1.5, "M": 0.5},
                                {"p": 3.0, "M": 2.0}])
def test_elementary_constant_preconditions(kw):
    with pytest.raises(PreconditionError):
        elementary_lower_bound(**kw)


@pytest.mark.parametrize("name", ["constant", "t2", "exp_neg_inv", "exp_pos_inv", "exp_pos_inv_sqrt"])
@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_pointwise_identities_and_boundary(name, p, rng):
    ts = make_tset(name, p)
    for _ in range(3):
        u = random_test_function(rng, 1.0)
        fr = substitution_frame(u, ts, M=2.0)
        for ident in IDENTITIES:
            assert verify_pointwise_identity(fr, ident).worst <= 1e-8, ident
        assert boundary_integral_check(fr).residual <= 1e-6


def test_identity_sides_shape(rng):
    ts = make_tset("t2", 2.0)
    fr = substitution_frame(random_test_function(rng, 1.0), ts)
    lhs, rhs, defined = identity_sides(fr, "profile_flux")
    assert lhs.shape == rhs.shape == defined.shape
    assert np.allclose(lhs[defined], rhs[defined], rtol=1e-8)


def test_unknown_identity_rejected(rng):
    fr = substitution_frame(random_test_function(rng, 1.0), make_tset("t2", 2.0))
    with pytest.raises((KeyError, ValueError)):
        verify_pointwise_identity(fr, "no_such_identity")


def test_frame_needs_m_above_one(rng):
    with pytest.raises(PreconditionError):
        substitution_frame(random_test_function(rng, 1.0), make_tset("t2", 2.0), M=1.0)


@pytest.mark.parametrize("name", ["constant", "exp_neg_inv_sqrt", "exp_pos_inv_sqrt"])
def test_integrated_bounds(name, rng):
    ts = make_tset(name, 2.0, admissibility=True)
    for _ in range(3):
        u = random_test_function(rng, 1.0)
        fr = substitution_frame(u, ts)
        assert ground_state_check(fr).passed
        assert assembled_check(fr).passed
        assert pointwise_derivative_bound(fr).passed
        if ts.weight_class.admissible:
            rep = weighted_t_bound_check(u, ts)
            assert rep.inequality_id == "t_weighted_bound"
            assert rep.passed


def test_t_bound_refuses_non_admissible_weight(rng):
    ts = make_tset("exp_neg_inv", 2.0, admissibility=True)
    with pytest.raises(PreconditionError):
        weighted_t_bound_check(random_test_function(rng, 1.0), ts)
