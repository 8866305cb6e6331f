"""The transform quadruple ``f, F, G, g`` attached to a classified weight.

Every quantity is evaluated in log-space as a function of ``x = log t`` so
that points far below the float range of ``t`` remain usable (the improper
tails of extremal profiles need this).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .quadrature import DEFAULT_RTOL, adaptive_log_integrals, log_integral_below
from .weights import (
    DomainError,
    Family,
    Kind,
    WeightClass,
    WeightSpec,
    classify,
    conjugate,
    validate_exponent,
)

CLOSED_FORM = "closed_form"
QUADRATURE = "quadrature"
FUNCTIONS = ("f", "F", "G", "g")
_CRITICAL_TOL = 1e-12
_MEMO_LIMIT = 2_000_000


class ConstructionError(ValueError):
    """Raised when a weight and a class verdict are inconsistent."""


@dataclass(frozen=True)
class TransformParams:
    p: float
    eta: float
    mu: float = 1.0

    def __post_init__(self):
        validate_exponent(self.p)
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise DomainError("eta must satisfy eta>0")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise DomainError("mu must satisfy mu>0")

    @property
    def p_conj(self) -> float:
        return conjugate(self.p)

    @property
    def hardy_constant(self) -> float:
        """``(1 - 1/p)**p``."""
        return (1.0 / self.p_conj) ** self.p

    @property
    def boundary_coefficient(self) -> float:
        """``hardy_constant**(1/p')``, which equals ``p'**(1-p)``."""
        return self.p_conj ** (1.0 - self.p)

    def lambda_alpha(self, alpha: float) -> float:
        return abs(1.0 / self.p_conj - alpha) ** self.p


def hardy_constant(p: float) -> float:
    return (1.0 - 1.0 / p) ** p


def power_coupled_mu(alpha: float, p: float, eta: float) -> float:
    """``mu`` that makes ``F(t) = t / (alpha p' - 1)`` exactly (alpha > 1/p')."""
    k = alpha * conjugate(p)
    if not k > 1.0:
        raise DomainError("the coupled mu needs alpha>1/p'")
    return eta ** (1.0 - k) / (k - 1.0)


@dataclass(frozen=True)
class TransformBundle:
    """Log-space values of the quadruple at a batch of points."""

    x: np.ndarray
    log_w: np.ndarray
    log_f: np.ndarray
    log_F: np.ndarray
    G: np.ndarray
    log_g: np.ndarray


@dataclass(frozen=True)
class TransformSet:
    spec: WeightSpec
    weight_class: WeightClass
    params: TransformParams
    mode: Dict[str, str]
    rtol: float = DEFAULT_RTOL
    _memo: Dict[float, float] = field(default_factory=dict, repr=False, compare=False)

    # basic properties -------------------------------------------------
    @property
    def sign(self) -> int:
        return self.weight_class.switching_sign

    @property
    def is_p_class(self) -> bool:
        return self.weight_class.kind is Kind.P

    @property
    def log_eta(self) -> float:
        return math.log(self.params.eta)

    @property
    def f_eta(self) -> float:
        return math.exp(self.log_f_eta)

    @property
    def log_f_eta(self) -> float:
        return float(self.log_f_at_log(np.array([self.log_eta]))[0])

    @property
    def F_eta(self) -> float:
        return math.exp(self.log_f_eta + float(self.spec.log_weight_at_log(self.log_eta)))

    @property
    def G_eta(self) -> float:
        return self.params.mu

    # evaluation in log coordinates -----------------------------------
    def log_weight_at_log(self, x) -> np.ndarray:
        return self.spec.log_weight_at_log(np.minimum(np.asarray(x, dtype=float), self.log_eta))

    def log_f_at_log(self, x) -> np.ndarray:
        x = np.minimum(np.asarray(x, dtype=float), self.log_eta)
        if self.mode["f"] == CLOSED_FORM:
            return self._closed_log_f(x)
        flat = x.ravel()
        out = np.empty(flat.size)
        memo = self._memo
        missing = []
        for i, xv in enumerate(flat.tolist()):
            hit = memo.get(xv)
            if hit is None:
                missing.append(i)
            else:
                out[i] = hit
        if missing:
            idx = np.asarray(missing)
            vals = self._chain_log_f(flat[idx])
            out[idx] = vals
            if len(memo) < _MEMO_LIMIT:
                memo.update(zip(flat[idx].tolist(), vals.tolist()))
        return out.reshape(x.shape)

    def _closed_log_f(self, x: np.ndarray) -> np.ndarray:
        fam = self.spec.family
        mu, eta = self.params.mu, self.params.eta
        k = self.spec.power_exponent if fam is Family.POWER else 0.0
        if fam is Family.CONSTANT or k < 1.0 - _CRITICAL_TOL:
            return (1.0 - k) * x - math.log(1.0 - k)
        if abs(k - 1.0) <= _CRITICAL_TOL:
            return np.log(mu + math.log(eta) - x)
        # f = mu - eta^(1-k)/(k-1) + exp((1-k)x)/(k-1)
        c = mu - eta ** (1.0 - k) / (k - 1.0)
        log_term = (1.0 - k) * x - math.log(k - 1.0)
        if c >= 0:
            return np.logaddexp(math.log(c) if c > 0 else -np.inf, log_term)
        return log_term + np.log1p(-(-c) * np.exp(-log_term))

    def _log_reciprocal_density(self, y: np.ndarray) -> np.ndarray:
        # integrand of f in log coordinates: 1/w(e^y) * e^y
        return -self.spec.log_weight_at_log(y) + y

    def _coordinate(self):
        """Integration coordinate for the reciprocal weight.

        Exponential families are integrated in ``r = t**-beta``: the factor
        ``exp(+-r)`` is then evaluated at exact float arguments instead of
        through the ill-conditioned map ``x -> exp(-beta x)``.
        """
        spec = self.spec
        if spec.family not in (Family.EXP_INV_POW, Family.POWER_TIMES_EXP):
            return (lambda x: x), self._log_reciprocal_density, None
        beta, sign, k = spec.beta, spec.sign, spec.power_exponent
        log_beta = math.log(beta)

        def to_r(x):
            with np.errstate(over="ignore"):
                return np.exp(-beta * np.asarray(x, dtype=float))

        def log_density(r):
            log_r = np.log(r)
            x = -log_r / beta
            return -(k * x + sign * r) - log_beta - (1.0 / beta + 1.0) * log_r

        def log_density_shifted(r0, d):
            # density at r0 + d divided by exp(-sign r0); the constant is
            # factored out so the quadrature sees O(1) log-values
            log_r = math.log(r0) + np.log1p(d / r0)
            x = -log_r / beta
            return -(k * x) - sign * d - log_beta - (1.0 / beta + 1.0) * log_r

        return to_r, log_density, log_density_shifted

    def _chain_log_f(self, xq: np.ndarray) -> np.ndarray:
        uniq, inv = np.unique(xq, return_inverse=True)
        top = self.log_eta
        to_z, log_density, shifted = self._coordinate()
        h = lambda z, _own: log_density(z)
        if self.is_p_class:
            pts = np.append(uniq, top) if uniq[-1] < top else uniq.copy()
            z = to_z(pts)
            lo, hi = np.minimum(z[:-1], z[1:]), np.maximum(z[:-1], z[1:])
            res = adaptive_log_integrals(h, lo, hi, rtol=self.rtol)
            tail_sums = np.logaddexp.accumulate(res.log_values[::-1])[::-1]
            log_int = np.append(tail_sums, -np.inf)[: uniq.size]
            vals = np.logaddexp(math.log(self.params.mu), log_int)
        else:
            z = to_z(uniq)
            if self._decreasing_coordinate():
                z0 = float(z[0])
                base, _, _ = log_integral_below(lambda y: shifted(z0, -y), 0.0, rtol=self.rtol)
                base -= self.spec.sign * z0
            else:
                base, _, _ = log_integral_below(log_density, float(z[0]), rtol=self.rtol)
            if uniq.size > 1:
                lo, hi = np.minimum(z[:-1], z[1:]), np.maximum(z[:-1], z[1:])
                res = adaptive_log_integrals(h, lo, hi, rtol=self.rtol)
                pieces = np.concatenate([[base], res.log_values])
            else:
                pieces = np.array([base])
            vals = np.logaddexp.accumulate(pieces)
        return vals[inv]

    def _decreasing_coordinate(self) -> bool:
        return self.spec.family in (Family.EXP_INV_POW, Family.POWER_TIMES_EXP)

    def G_from_log_f(self, x: np.ndarray, log_f: np.ndarray) -> np.ndarray:
        mu = self.params.mu
        if self.is_p_class:
            G = log_f - math.log(mu) + mu
        else:
            G = self.log_f_eta - log_f + mu
        return np.where(np.asarray(x) >= self.log_eta, mu, G)

    def G_at_log(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.G_from_log_f(x, self.log_f_at_log(x))

    def evaluate_at_log(self, x) -> TransformBundle:
        x = np.asarray(x, dtype=float)
        log_w = self.log_weight_at_log(x)
        log_f = self.log_f_at_log(x)
        G = self.G_from_log_f(x, log_f)
        log_F = log_w + log_f
        log_g = (math.log(self.params.p_conj) + log_f) / self.params.p_conj
        return TransformBundle(x, log_w, log_f, log_F, G, log_g)

    # evaluation in t --------------------------------------------------
    def __call__(self, which: str, t) -> np.ndarray:
        return eval_transform(self, which, t)

    def table(self, t: Sequence[float]) -> np.ndarray:
        """Columns ``[f, F, G, g]`` at the points ``t``."""
        t = np.asarray(t, dtype=float)
        if np.any(~(t > 0)):
            raise DomainError("transforms are defined for t > 0 only")
        b = self.evaluate_at_log(np.log(t))
        with np.errstate(over="ignore"):
            return np.column_stack([np.exp(b.log_f), np.exp(b.log_F), b.G, np.exp(b.log_g)])


def _expected_kind(spec: WeightSpec) -> Optional[Kind]:
    if spec.family is Family.USER_TABLE:
        return None
    return classify(spec, 1.0, admissibility=False).kind


def build_transforms(
    spec: WeightSpec,
    params: TransformParams,
    weight_class: Optional[WeightClass] = None,
    mode: str = "auto",
    rtol: float = DEFAULT_RTOL,
) -> TransformSet:
    """Build the quadruple for ``spec``.

    Parameters
    ----------
    spec : WeightSpec
    params : TransformParams
        ``params.p`` must match ``spec.p``.
    weight_class : WeightClass, optional
        Result of :func:`classify`; computed (without admissibility) if absent.
    mode : {"auto", "closed_form", "quadrature"}
        ``auto`` uses closed forms for power and constant weights.
    """
    if abs(params.p - spec.p) > 1e-12:
        raise ConstructionError("transform exponent differs from the weight's exponent")
    if weight_class is None:
        weight_class = classify(spec, params.eta, mu=params.mu, admissibility=False)
    else:
        expected = _expected_kind(spec)
        if expected is not None and expected is not weight_class.kind:
            raise ConstructionError(
                f"class {weight_class.kind.value} is inconsistent with weight {spec.label}"
            )
    has_closed = spec.family in (Family.POWER, Family.CONSTANT)
    if mode == "auto":
        chosen = CLOSED_FORM if has_closed else QUADRATURE
    elif mode == CLOSED_FORM:
        if not has_closed:
            raise ConstructionError(f"no closed form is available for {spec.label}")
        chosen = CLOSED_FORM
    elif mode == QUADRATURE:
        chosen = QUADRATURE
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return TransformSet(spec, weight_class, params, {k: chosen for k in FUNCTIONS}, rtol)


def eval_transform(tset: TransformSet, which: str, t):
    """Value of ``which`` in ``{"f", "F", "G", "g"}`` at ``t > 0``."""
    if which not in FUNCTIONS:
        raise ValueError(f"unknown transform {which!r}")
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("transforms are defined for t > 0 only")
    b = tset.evaluate_at_log(np.log(np.atleast_1d(arr)))
    with np.errstate(over="ignore"):
        col = {
            "f": lambda: np.exp(b.log_f),
            "F": lambda: np.exp(b.log_F),
            "G": lambda: b.G,
            "g": lambda: np.exp(b.log_g),
        }[which]()
    return float(col[0]) if arr.ndim == 0 else col.reshape(arr.shape)


@dataclass(frozen=True)
class DerivativeRow:
    t: float
    identity: str
    finite_difference: float
    exact: float
    residual: float
    passed: bool


@dataclass(frozen=True)
class DerivativeReport:
    rows: List[DerivativeRow]
    skipped: bool = False
    notice: str = ""

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def worst(self) -> float:
        return max((r.residual for r in self.rows), default=0.0)


def check_derivative_identities(
    tset: TransformSet, grid: Sequence[float], tol: float = 1e-6, step: float = 1e-5
) -> DerivativeReport:
    """Compare centred differences with the closed derivative identities.

    The step at ``t`` is ``step * min(t, F(t))``; residuals are relative.
    """
    if tset.spec.family is Family.USER_TABLE:
        return DerivativeReport([], True, "derivative identities skipped: tabulated weights are not certified C1")
    t = np.asarray(grid, dtype=float)
    if np.any(t <= 0) or np.any(t >= tset.params.eta):
        raise DomainError("derivative checks need grid points inside (0, eta)")
    F = eval_transform(tset, "F", t)
    h = step * np.minimum(t, F)
    pts = np.concatenate([t - h, t + h, t])
    b = tset.evaluate_at_log(np.log(pts))
    n = t.size
    lf_m, lf_p = b.log_f[:n], b.log_f[n: 2 * n]
    G_m, G_p, G_0 = b.G[:n], b.G[n: 2 * n], b.G[2 * n:]
    F0 = np.exp(b.log_F[2 * n:])
    s = tset.sign
    checks = {
        "dlogf": ((lf_p - lf_m) / (2 * h), s / F0),
        "dlogG": ((np.log(G_p) - np.log(G_m)) / (2 * h), -1.0 / (F0 * G_0)),
        "dinvG": ((1.0 / G_p - 1.0 / G_m) / (2 * h), 1.0 / (F0 * G_0 ** 2)),
    }
    rows = []
    for name, (fd, exact) in checks.items():
        res = np.abs(fd - exact) / np.abs(exact)
        for i in range(n):
            rows.append(DerivativeRow(float(t[i]), name, float(fd[i]), float(exact[i]), float(res[i]),
                                      bool(res[i] <= tol)))
    return DerivativeReport(rows)
