import math

import numpy as np
import pytest

from weighted_hardy.inequality import TestFunction
from weighted_hardy.transforms import TransformParams
from weighted_hardy.variational import (
    Boundary,
    Mesh,
    PreconditionError,
    gradient_check,
    infimum_zero_demo,
    infimum_zero_table,
    log_pinned_minimum,
    minimize_quotient,
    rayleigh_quotient,
    representable_floor,
)
from weighted_hardy.weights import DomainError, builtin_weight

from conftest import make_tset

# exact piecewise-linear pinned minima for w = t^2, p = 2 on 2^10 log nodes (mpmath)
PINNED_T2 = {1e-2: 0.010101078332426281, 1e-3: 0.0010010162147948316, 1e-4: 0.00010001270324809417}
# log of the same quantity for w = exp(-1/t), p = 3, 200 log nodes on [0.02, 1]
PINNED_EXP_P3 = -84.209784202400016


def test_mesh_constructors():
    m = Mesh.log(1e-3, 1.0, 31)
    assert m.n == 31 and m.t_floor == 1e-3 and m.eta == 1.0
    assert m.max_node_ratio == pytest.approx(10 ** 0.1)
    g = Mesh.geometric(1e-3, 1.0, 40, ratio=1.05)
    assert np.all(np.diff(np.diff(g.nodes)) > 0)
    with pytest.raises(DomainError):
        Mesh.log(1.0, 1.0, 10)
    with pytest.raises(DomainError):
        Mesh(np.array([0.1, 0.2]))


@pytest.mark.parametrize("tf", sorted(PINNED_T2))
def test_pinned_minimum_oracle(tf):
    val = math.exp(log_pinned_minimum(builtin_weight("t2", 2.0), Mesh.log(tf, 1.0, 2 ** 10)))
    assert val == pytest.approx(PINNED_T2[tf], rel=1e-10)


def test_pinned_minimum_exponential_weight():
    nodes = np.geomspace(0.02, 1.0, 200)
    nodes[0], nodes[-1] = 0.02, 1.0
    lm = log_pinned_minimum(builtin_weight("exp_neg_inv", 3.0), Mesh(nodes))
    assert lm == pytest.approx(PINNED_EXP_P3, abs=1e-9)


def test_infimum_zero_table_decreases():
    spec = builtin_weight("t2", 2.0)
    prm = TransformParams(2.0, 1.0, 1.0)
    rows = infimum_zero_table(spec, prm, [Mesh.log(tf, 1.0, 256) for tf in (1e-2, 1e-3, 1e-4)])
    mins = [r.minimum for r in rows]
    assert mins[0] > mins[1] > mins[2]
    for r in rows:
        # the ramp family is one feasible discrete competitor only in the limit
        assert r.feasible_energy == pytest.approx(1.0 / (1.0 / r.t_floor - 2.0), rel=1e-12)
    assert infimum_zero_demo(spec, prm, [Mesh.log(1e-2, 1.0, 64)])[0] > 0


def test_infimum_zero_needs_p_class():
    with pytest.raises(PreconditionError):
        infimum_zero_table(builtin_weight("constant", 2.0), TransformParams(2.0, 1.0, 1.0),
                           [Mesh.log(1e-2, 1.0, 16)])


def test_constant_weight_minimum():
    ts = make_tset("constant", 2.0)
    r = minimize_quotient(ts, Mesh.log(1e-6, 1.0, 2 ** 12))
    assert r.converged
    assert 0.25 <= r.value <= 0.30
    assert np.all(np.diff(r.history) <= 1e-12 * np.abs(r.history[1:]))
    assert r.reevaluated == pytest.approx(r.value, rel=1e-8)


def test_minimum_decreases_with_floor():
    ts = make_tset("constant", 2.0)
    vals = [minimize_quotient(ts, Mesh.log(tf, 1.0, 1024)).value for tf in (1e-2, 1e-4, 1e-6)]
    assert vals[0] > vals[1] > vals[2] > 0.25


def test_dirichlet_minimum_is_larger():
    ts = make_tset("constant", 2.0)
    mesh = Mesh.log(1e-4, 1.0, 1024)
    free = minimize_quotient(ts, mesh).value
    pinned = minimize_quotient(ts, mesh, Boundary.pinned(0.0))
    assert pinned.value > free
    assert pinned.minimizer.values[-1] == 0.0


def test_nonzero_pin_only_rescales():
    ts = make_tset("t2", 3.0)
    mesh = Mesh.log(1e-3, 1.0, 256)
    r = minimize_quotient(ts, mesh, Boundary.pinned(2.0))
    assert r.minimizer.values[-1] == pytest.approx(2.0)


@pytest.mark.parametrize("name", ["t2", "exp_neg_inv", "exp_pos_inv_sqrt"])
@pytest.mark.parametrize("p", [1.5, 3.0])
def test_minimum_stays_above_hardy_constant(name, p):
    ts = make_tset(name, p)
    mesh = Mesh.log(max(1e-6, representable_floor(ts)), 1.0, 512)
    r = minimize_quotient(ts, mesh)
    assert r.value >= ts.params.hardy_constant - 1e-9


@pytest.mark.parametrize("name", ["constant", "exp_pos_inv", "exp_neg_inv_sqrt"])
def test_gradient_matches_differences(name, rng):
    ts = make_tset(name, 1.5)
    mesh = Mesh.log(max(1e-6, representable_floor(ts)), 1.0, 300)
    assert gradient_check(ts, mesh, rng, points=10) <= 1e-6
    assert gradient_check(ts, mesh, rng, points=5, boundary=Boundary.pinned(0.0)) <= 1e-6


def test_out_of_range_mesh_rejected():
    ts = make_tset("exp_neg_inv", 2.0)
    with pytest.raises(PreconditionError):
        minimize_quotient(ts, Mesh.log(1e-5, 1.0, 64))


def test_rayleigh_quotient_of_zero_function():
    with pytest.raises(DomainError):
        rayleigh_quotient(TestFunction([0.1, 0.5, 1.0], [0.0, 0.0, 0.0], support_floor=0.1),
                          make_tset("constant", 2.0))
