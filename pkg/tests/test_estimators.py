import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from weighted_hardy.estimators import HardyTransformer, QuotientMinimizer


def test_transformer_columns():
    ht = HardyTransformer(family="power", p=2.0, alpha=1.0, mu=1.0).fit()
    t = np.array([[0.1], [0.5], [1.0]])
    out = ht.transform(t)
    assert out.shape == (3, 4)
    # w = t^2, mu = 1: f = 1/t, F = t, G = 1 + log(1/t), g = (2/t)^(1/2)
    tt = t[:, 0]
    assert np.allclose(out, np.column_stack([1 / tt, tt, 1 + np.log(1 / tt), np.sqrt(2 / tt)]))
    assert list(ht.get_feature_names_out()) == ["f", "F", "G", "g"]


def test_transformer_requires_fit():
    with pytest.raises(NotFittedError):
        HardyTransformer().transform(np.ones((2, 1)))


def test_transformer_params_round_trip():
    ht = HardyTransformer(family="exp_inv_pow", sign=-1, beta=0.5, p=3.0)
    c = clone(ht)
    assert c.get_params() == ht.get_params()
    c.set_params(p=1.5)
    assert c.p == 1.5 and ht.p == 3.0


def test_transformer_in_pipeline():
    pipe = make_pipeline(FunctionTransformer(lambda x: np.exp(x)), HardyTransformer(family="constant"))
    out = pipe.fit_transform(np.log(np.array([[0.2], [0.4]])))
    assert np.allclose(out[:, 0], [0.2, 0.4])


def test_transformer_rejects_multiple_columns():
    ht = HardyTransformer().fit()
    with pytest.raises(ValueError):
        ht.transform(np.ones((3, 2)))


def test_quotient_minimizer():
    qm = QuotientMinimizer(family="constant", n_nodes=512, t_floor=1e-4).fit()
    assert qm.converged_
    assert 0.25 < qm.value_ < 0.3
    assert qm.history_[-1] == pytest.approx(qm.value_)
    assert qm.minimizer_.grid[0] == pytest.approx(1e-4)


def test_quotient_minimizer_auto_floor():
    qm = QuotientMinimizer(family="exp_inv_pow", sign=1, beta=1.0, n_nodes=256).fit()
    assert qm.t_floor_ > 1e-6
    assert qm.value_ >= qm.transforms_.params.hardy_constant - 1e-9
