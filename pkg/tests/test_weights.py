import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weighted_hardy.weights import (
    BUILTIN_NAMES,
    DomainError,
    Kind,
    WeightSpec,
    builtin_weight,
    builtin_weights,
    classify,
    conjugate,
    eval_log_weight,
    eval_log_weight_power,
    validate_exponent,
)


def test_conjugate_exponent():
    assert conjugate(2.0) == 2.0
    assert conjugate(3.0) == pytest.approx(1.5)
    assert conjugate(1.5) == pytest.approx(3.0)


@pytest.mark.parametrize("p", [1.0, 0.5, float("inf"), float("nan")])
def test_bad_exponent_rejected(p):
    with pytest.raises(DomainError):
        validate_exponent(p)


def test_t2_preset_is_t_squared_for_every_p():
    t = np.array([0.1, 0.5, 2.0])
    for p in (1.5, 2.0, 3.0):
        spec = builtin_weight("t2", p)
        assert np.allclose(eval_log_weight(spec, t), 2.0 * np.log(t))
        assert builtin_weights(p).keys() == set(BUILTIN_NAMES)


def test_log_weight_rejects_nonpositive_points():
    with pytest.raises(DomainError):
        eval_log_weight(WeightSpec.constant(2.0), np.array([0.0, 1.0]))


def test_exponential_log_weight_values():
    spec = builtin_weight("exp_neg_inv", 3.0)
    t = np.array([0.01, 0.5])
    assert np.allclose(eval_log_weight(spec, t), -1.0 / t)
    assert np.allclose(eval_log_weight_power(spec, t), -2.0 / t)
    # far below the float range of exp(-1/t) the log stays finite
    assert eval_log_weight(spec, 1e-6) == pytest.approx(-1e6)


@pytest.mark.parametrize(
    "name,kind,adm",
    [
        ("constant", "Q", None),
        ("t2", "P", None),
        ("exp_neg_inv", "P", False),
        ("exp_pos_inv", "Q", False),
        ("exp_neg_inv_sqrt", "P", True),
        ("exp_pos_inv_sqrt", "Q", True),
    ],
)
def test_builtin_classification(name, kind, adm):
    wc = classify(builtin_weight(name, 2.0), 1.0)
    assert wc.kind.value == kind
    assert wc.switching_sign == (-1 if kind == "P" else 1)
    if adm is not None:
        assert wc.admissible is adm
        if adm:
            assert wc.admissibility_constant_K is not None and wc.admissibility_constant_K > 0


def test_summary_wording():
    wc = classify(builtin_weight("exp_neg_inv", 2.0), 1.0)
    assert wc.summary() == "P, non-admissible, s = -1"


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.05, 2.5), p=st.floats(1.2, 4.0))
def test_power_class_follows_integrability_of_reciprocal(alpha, p):
    # w = t^(alpha p'); 1/w is integrable at 0 iff alpha p' < 1
    k = alpha * p / (p - 1.0)
    if abs(k - 1.0) < 1e-3:
        return
    wc = classify(WeightSpec.power(alpha, p), 1.0, admissibility=False)
    assert wc.kind is (Kind.Q if k < 1.0 else Kind.P)
    if wc.kind is Kind.P:
        assert wc.limit_at_zero.kind == "zero"
