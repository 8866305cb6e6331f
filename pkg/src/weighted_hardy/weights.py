"""Weight families, log-space evaluation and P/Q classification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .quadrature import probe_divergence

ADMISSIBILITY_LEVELS = 40
ADMISSIBILITY_FACTOR = 10.0
PROBE_LEVELS = 12


class DomainError(ValueError):
    """Argument outside the domain of a weight or transform."""


class ExtrapolationError(DomainError):
    """Tabulated weight queried outside its grid."""


class InconclusiveError(RuntimeError):
    """Numerical classification could not reach a verdict."""


class Family(str, Enum):
    POWER = "power"
    EXP_INV_POW = "exp_inv_pow"
    POWER_TIMES_EXP = "power_times_exp"
    CONSTANT = "constant"
    USER_TABLE = "user_table"


class Kind(str, Enum):
    P = "P"
    Q = "Q"


def conjugate(p: float) -> float:
    return p / (p - 1.0)


def validate_exponent(p: float) -> None:
    if not (isinstance(p, (int, float)) and math.isfinite(p) and p > 1.0):
        raise DomainError(f"exponent p={p!r} violates the hypothesis 1<p<\\infty")


@dataclass(frozen=True)
class WeightSpec:
    """Symbolic weight ``w(t) > 0`` on ``(0, inf)``.

    ``power`` means ``w = t**(alpha * p')``, ``exp_inv_pow`` means
    ``w = exp(sign * t**-beta)`` and ``power_times_exp`` is their product.
    """

    family: Family
    p: float
    alpha: float = 0.0
    sign: int = 1
    beta: float = 1.0
    table_t: Tuple[float, ...] = field(default=(), repr=False)
    table_log_w: Tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        validate_exponent(self.p)
        if self.family in (Family.EXP_INV_POW, Family.POWER_TIMES_EXP):
            if self.sign not in (-1, 1):
                raise DomainError("sign must be +1 or -1")
            if not self.beta > 0:
                raise DomainError("beta must be positive")
        if self.family is Family.USER_TABLE:
            t = np.asarray(self.table_t, dtype=float)
            lw = np.asarray(self.table_log_w, dtype=float)
            if t.size < 4 or t.size != lw.size:
                raise DomainError("a weight table needs at least 4 (t, log w) pairs")
            if np.any(t <= 0) or np.any(np.diff(t) <= 0):
                raise DomainError("table grid must be positive and strictly increasing")
            if not np.all(np.isfinite(lw)):
                raise DomainError("table log-weights must be finite")

    # constructors -----------------------------------------------------
    @classmethod
    def power(cls, alpha: float, p: float) -> "WeightSpec":
        return cls(Family.POWER, float(p), alpha=float(alpha))

    @classmethod
    def exp_inv_pow(cls, sign: int, beta: float, p: float) -> "WeightSpec":
        return cls(Family.EXP_INV_POW, float(p), sign=int(sign), beta=float(beta))

    @classmethod
    def power_times_exp(cls, alpha: float, sign: int, beta: float, p: float) -> "WeightSpec":
        return cls(Family.POWER_TIMES_EXP, float(p), alpha=float(alpha), sign=int(sign), beta=float(beta))

    @classmethod
    def constant(cls, p: float) -> "WeightSpec":
        return cls(Family.CONSTANT, float(p))

    @classmethod
    def user_table(cls, t: Sequence[float], log_w: Sequence[float], p: float) -> "WeightSpec":
        return cls(
            Family.USER_TABLE,
            float(p),
            table_t=tuple(float(v) for v in t),
            table_log_w=tuple(float(v) for v in log_w),
        )

    # derived ----------------------------------------------------------
    @property
    def p_conj(self) -> float:
        return conjugate(self.p)

    @property
    def power_exponent(self) -> float:
        """Exponent of the algebraic factor, ``alpha * p'``."""
        if self.family in (Family.POWER, Family.POWER_TIMES_EXP):
            return self.alpha * self.p_conj
        return 0.0

    @property
    def label(self) -> str:
        k = self.power_exponent
        pw = "" if k == 0 else f"t^{k:g}"
        if self.family is Family.CONSTANT:
            return "1"
        if self.family is Family.POWER:
            return pw or "1"
        if self.family is Family.USER_TABLE:
            return "table"
        ex = f"exp({'+' if self.sign > 0 else '-'}t^-{self.beta:g})"
        return f"{pw}*{ex}" if pw else ex

    def with_p(self, p: float) -> "WeightSpec":
        return WeightSpec(self.family, float(p), self.alpha, self.sign, self.beta, self.table_t, self.table_log_w)

    @cached_property
    def _table(self):
        from scipy.interpolate import PchipInterpolator

        lt = np.log(np.asarray(self.table_t))
        return PchipInterpolator(lt, np.asarray(self.table_log_w), extrapolate=False)

    def log_weight_at_log(self, x) -> np.ndarray:
        """``log w(e**x)``, vectorised; ``x`` may lie far below float range of t."""
        x = np.asarray(x, dtype=float)
        fam = self.family
        if fam is Family.CONSTANT:
            return np.zeros_like(x)
        if fam is Family.POWER:
            return self.power_exponent * x
        if fam is Family.USER_TABLE:
            lt0, lt1 = math.log(self.table_t[0]), math.log(self.table_t[-1])
            tol = 1e-12 * max(1.0, abs(lt0), abs(lt1))
            if np.any(x < lt0 - tol) or np.any(x > lt1 + tol):
                raise ExtrapolationError("weight table queried outside its grid")
            return np.asarray(self._table(np.clip(x, lt0, lt1)), dtype=float)
        with np.errstate(over="ignore"):
            expo = self.sign * np.exp(-self.beta * x)
        if fam is Family.EXP_INV_POW:
            return expo
        return self.power_exponent * x + expo


def eval_log_weight(spec: WeightSpec, t):
    """``log w(t)`` for ``t > 0``; scalar in, scalar out."""
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("weights are defined for t > 0 only")
    out = spec.log_weight_at_log(np.log(arr))
    return float(out) if np.ndim(t) == 0 else out


def eval_log_weight_power(spec: WeightSpec, t):
    """``log W_p(t) = (p - 1) log w(t)``."""
    return (spec.p - 1.0) * eval_log_weight(spec, t)


def doubling_ratio(spec: WeightSpec, t) -> np.ndarray:
    """Sampled ``w(2t) / w(t)``; constant for doubling power weights."""
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore"):
        return np.exp(eval_log_weight(spec, 2 * t) - eval_log_weight(spec, t))


@dataclass(frozen=True)
class LimitAtZero:
    kind: str  # "zero" | "finite" | "infinite"
    value: Optional[float] = None

    def __str__(self) -> str:
        return f"finite({self.value:g})" if self.kind == "finite" else self.kind


@dataclass(frozen=True)
class WeightClass:
    kind: Kind
    admissible: Optional[bool]
    admissibility_constant_K: Optional[float]
    switching_sign: int
    limit_at_zero: LimitAtZero

    def __post_init__(self):
        if (self.kind is Kind.P) != (self.switching_sign == -1):
            raise ValueError("switching sign must be -1 exactly for the P class")
        if self.kind is Kind.P and self.limit_at_zero.kind != "zero":
            raise ValueError("P-class weights vanish at the origin")

    def summary(self) -> str:
        adm = {True: "admissible", False: "non-admissible", None: "admissibility unknown"}[self.admissible]
        sgn = "-1" if self.switching_sign < 0 else "+1"
        return f"{self.kind.value}, {adm}, s = {sgn}"


def _analytic_kind(spec: WeightSpec) -> Kind:
    fam = spec.family
    if fam is Family.CONSTANT:
        return Kind.Q
    if fam is Family.POWER:
        return Kind.P if spec.power_exponent >= 1.0 else Kind.Q
    if fam in (Family.EXP_INV_POW, Family.POWER_TIMES_EXP):
        return Kind.P if spec.sign < 0 else Kind.Q
    raise AssertionError(fam)


def _limit(spec: WeightSpec, kind: Kind) -> LimitAtZero:
    if kind is Kind.P:
        return LimitAtZero("zero")
    fam = spec.family
    if fam is Family.CONSTANT:
        return LimitAtZero("finite", 1.0)
    if fam is Family.POWER:
        k = spec.power_exponent
        if k == 0:
            return LimitAtZero("finite", 1.0)
        return LimitAtZero("zero" if k > 0 else "infinite")
    if fam in (Family.EXP_INV_POW, Family.POWER_TIMES_EXP):
        return LimitAtZero("infinite")
    # tabulated: judge from the smallest tabulated value
    lw = spec.table_log_w[0]
    if lw < -30:
        return LimitAtZero("zero")
    if lw > 30:
        return LimitAtZero("infinite")
    return LimitAtZero("finite", math.exp(lw))


def reciprocal_verdict(spec: WeightSpec, eta: float, levels: int = PROBE_LEVELS):
    """Numerical divergence verdict for ``int_0^eta 1/w``."""
    return probe_divergence(lambda t: -eval_log_weight(spec, t), eta, levels=levels)


def classify(spec: WeightSpec, eta: float, mu: float = 1.0, admissibility: bool = True) -> WeightClass:
    """Classify ``spec`` into P or Q and, optionally, test admissibility."""
    if not eta > 0:
        raise DomainError("eta must be positive (hypothesis eta>0)")
    if spec.family is Family.USER_TABLE:
        verdict = reciprocal_verdict(spec, eta)
        if verdict.verdict == "inconclusive":
            raise InconclusiveError(
                "reciprocal-weight integrability is inconclusive at the configured probe depth"
            )
        kind = Kind.P if verdict.is_divergent else Kind.Q
    else:
        kind = _analytic_kind(spec)
    provisional = WeightClass(kind, None, None, -1 if kind is Kind.P else 1, _limit(spec, kind))
    if not admissibility:
        return provisional
    ok, K = check_admissible(spec, eta, mu=mu, weight_class=provisional)
    return WeightClass(kind, ok, K if ok else None, provisional.switching_sign, provisional.limit_at_zero)


def admissibility_probe(spec: WeightSpec, eta: float, mu: float = 1.0, weight_class=None,
                        levels: int = ADMISSIBILITY_LEVELS):
    """Return probe points ``t_j = eta 2**-j`` and ``sqrt(t_j) G(t_j)``."""
    from .transforms import TransformParams, build_transforms

    if weight_class is None:
        weight_class = classify(spec, eta, mu=mu, admissibility=False)
    tset = build_transforms(spec, TransformParams(spec.p, eta, mu), weight_class=weight_class)
    j = np.arange(1, levels + 1)
    x = math.log(eta) - j * math.log(2.0)
    if spec.family is Family.USER_TABLE:
        x = x[x >= math.log(spec.table_t[0])]
    G = tset.G_at_log(x)
    return np.exp(x), np.exp(0.5 * x) * G


def check_admissible(spec: WeightSpec, eta: float, mu: float = 1.0, weight_class=None,
                     levels: int = ADMISSIBILITY_LEVELS,
                     factor: float = ADMISSIBILITY_FACTOR) -> Tuple[bool, Optional[float]]:
    """Bounded ``sqrt(t) G(t)`` on the dyadic probe grid.

    Returns ``(True, K)`` or ``(False, t_bad)`` with the first probe exceeding
    ``factor`` times the value at ``eta``.  Since ``G`` decreases, between
    consecutive probes ``sqrt(t) G(t) <= sqrt(2)`` times the probe value, so
    ``K`` is ``sqrt(2)`` times the largest probed value.
    """
    from .transforms import TransformParams, build_transforms

    if weight_class is None:
        weight_class = classify(spec, eta, mu=mu, admissibility=False)
    tset = build_transforms(spec, TransformParams(spec.p, eta, mu), weight_class=weight_class)
    x_all = math.log(eta) - np.arange(0, levels + 1) * math.log(2.0)
    if spec.family is Family.USER_TABLE:
        x_all = x_all[x_all >= math.log(spec.table_t[0])]
    ref = None
    peak = 0.0
    # probe in blocks so that clear violations stop early
    for start in range(0, x_all.size, 8):
        x = x_all[start: start + 8]
        vals = np.exp(0.5 * x) * tset.G_at_log(x)
        if ref is None:
            ref = vals[0]
        bad = np.nonzero(~(vals <= factor * ref))[0]
        if bad.size:
            return False, float(math.exp(x[bad[0]]))
        peak = max(peak, float(np.max(vals)))
    return True, math.sqrt(2.0) * peak


BUILTIN_NAMES = ("constant", "t2", "exp_neg_inv", "exp_pos_inv", "exp_neg_inv_sqrt", "exp_pos_inv_sqrt")


def builtin_weight(name: str, p: float) -> WeightSpec:
    """Named preset; ``t2`` is ``w = t**2`` whatever ``p`` is."""
    if name == "constant":
        return WeightSpec.constant(p)
    if name == "t2":
        return WeightSpec.power(2.0 / conjugate(p), p)
    table = {
        "exp_neg_inv": (-1, 1.0),
        "exp_pos_inv": (1, 1.0),
        "exp_neg_inv_sqrt": (-1, 0.5),
        "exp_pos_inv_sqrt": (1, 0.5),
    }
    if name not in table:
        raise DomainError(f"unknown preset {name!r}; expected one of {', '.join(BUILTIN_NAMES)}")
    sign, beta = table[name]
    return WeightSpec.exp_inv_pow(sign, beta, p)


def builtin_weights(p: float) -> Dict[str, WeightSpec]:
    return {name: builtin_weight(name, p) for name in BUILTIN_NAMES}
