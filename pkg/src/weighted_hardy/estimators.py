"""scikit-learn style wrappers around classification, transforms and minimisation."""
from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .transforms import TransformParams, build_transforms
from .variational import Boundary, Mesh, minimize_quotient, representable_floor
from .weights import Family, WeightSpec, classify


def _spec(family: str, p: float, alpha: float, sign: int, beta: float) -> WeightSpec:
    fam = Family(family)
    if fam is Family.USER_TABLE:
        raise ValueError("tabulated weights are not supported by the estimator wrappers")
    return WeightSpec(fam, float(p), alpha=float(alpha), sign=int(sign), beta=float(beta))


class HardyTransformer(TransformerMixin, BaseEstimator):
    """Map points ``t`` to the columns ``[f, F, G, g]``.

    ``fit`` classifies the weight and builds the transform set; the input to
    ``fit`` is ignored.  ``transform`` expects an array of shape ``(n, 1)``
    (or ``(n,)``) of points in ``(0, inf)``.

    Attributes
    ----------
    weight_class_ : WeightClass
    transforms_ : TransformSet
    """

    def __init__(self, family: str = "constant", p: float = 2.0, alpha: float = 0.0, sign: int = 1,
                 beta: float = 1.0, eta: float = 1.0, mu: float = 1.0, mode: str = "auto",
                 admissibility: bool = False):
        self.family = family
        self.p = p
        self.alpha = alpha
        self.sign = sign
        self.beta = beta
        self.eta = eta
        self.mu = mu
        self.mode = mode
        self.admissibility = admissibility

    def fit(self, X=None, y=None):
        spec = _spec(self.family, self.p, self.alpha, self.sign, self.beta)
        self.weight_class_ = classify(spec, self.eta, mu=self.mu, admissibility=self.admissibility)
        self.transforms_ = build_transforms(spec, TransformParams(self.p, self.eta, self.mu),
                                            self.weight_class_, mode=self.mode)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "transforms_")
        t = np.asarray(X, dtype=float)
        if t.ndim == 2:
            if t.shape[1] != 1:
                raise ValueError("expected a single column of points t")
            t = t[:, 0]
        return self.transforms_.table(t)

    def get_feature_names_out(self, input_features=None):
        return np.array(["f", "F", "G", "g"], dtype=object)


class QuotientMinimizer(BaseEstimator):
    """Discrete minimiser of the Hardy quotient for one weight.

    After ``fit``: ``value_``, ``history_``, ``converged_`` and
    ``minimizer_`` (a test function).  ``t_floor=None`` picks the smallest
    floor at which the weight stays in double range (at least ``1e-6``).
    """

    def __init__(self, family: str = "constant", p: float = 2.0, alpha: float = 0.0, sign: int = 1,
                 beta: float = 1.0, eta: float = 1.0, mu: float = 1.0, n_nodes: int = 1024,
                 t_floor: Optional[float] = None, boundary: str = "free_at_eta", max_iter: int = 2000):
        self.family = family
        self.p = p
        self.alpha = alpha
        self.sign = sign
        self.beta = beta
        self.eta = eta
        self.mu = mu
        self.n_nodes = n_nodes
        self.t_floor = t_floor
        self.boundary = boundary
        self.max_iter = max_iter

    def fit(self, X=None, y=None):
        spec = _spec(self.family, self.p, self.alpha, self.sign, self.beta)
        tset = build_transforms(spec, TransformParams(self.p, self.eta, self.mu))
        floor = self.t_floor
        if floor is None:
            floor = max(1e-6 * self.eta, representable_floor(tset))
        bnd = Boundary.pinned(0.0) if self.boundary == "pinned" else Boundary(self.boundary)
        res = minimize_quotient(tset, Mesh.log(floor, self.eta, self.n_nodes), bnd, max_iter=self.max_iter)
        self.transforms_ = tset
        self.t_floor_ = floor
        self.value_ = res.value
        self.history_ = np.asarray(res.history)
        self.converged_ = res.converged
        self.minimizer_ = res.minimizer
        self.n_iter_ = res.iterations
        return self
