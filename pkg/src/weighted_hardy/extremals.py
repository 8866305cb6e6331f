"""Extremal and vanishing families of test functions."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .inequality import (
    DivergenceError,
    PowerOfFTail,
    PreconditionError,
    TestFunction,
    energy,
    report_sharp,
)
from .quadrature import QuadratureError, integrate
from .transforms import TransformSet
from .weights import Kind

POINTS_PER_DECADE = 64
GRID_FLOOR = 1e-6
LOG_VALUE_LIMIT = 600.0
AGREEMENT = 1e-4


class ProfileWarning(UserWarning):
    pass


def profile_exponent(tset: TransformSet, eps: float) -> float:
    return 1.0 / tset.params.p_conj + tset.sign * eps


def _grid_floor(tset: TransformSet, exponent: float, floor: float) -> float:
    """Lowest grid point keeping ``log u`` comfortably inside double range."""
    x_eta = tset.log_eta
    x = np.linspace(math.log(floor), x_eta, 400)
    log_u = exponent * tset.log_f_at_log(x)
    ok = np.abs(log_u) <= LOG_VALUE_LIMIT
    if ok.all():
        return floor
    bad = np.nonzero(~ok)[0]
    return float(math.exp(x[min(bad[-1] + 1, x.size - 1)]))


def extremal_profile(tset: TransformSet, eps: float, points_per_decade: int = POINTS_PER_DECADE,
                     floor: float = GRID_FLOOR, exact: bool = True) -> TestFunction:
    """``f**(1/p' + s eps)`` sampled on a log-graded grid.

    The analytic profile is attached as the tail, so integrals cover the
    whole of ``(0, eta]``.  With ``exact=True`` the profile is also used on
    the grid range; otherwise the grid range is piecewise linear.
    """
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    a = profile_exponent(tset, eps)
    label = f"extremal eps={eps:g}"
    if tset.is_p_class and eps >= 1.0 / tset.params.p_conj:
        warnings.warn("eps >= 1/p' for a P-class weight: profile exponent is not positive", ProfileWarning)
        label += " [eps>=1/p']"
    eta = tset.params.eta
    t_min = min(_grid_floor(tset, a, floor * eta), eta * 0.5)
    decades = math.log10(eta / t_min)
    n = max(int(math.ceil(decades * points_per_decade)) + 1, 2)
    grid = np.geomspace(t_min, eta, n)
    grid[-1] = eta
    values = np.exp(a * tset.log_f_at_log(np.log(grid)))
    return TestFunction(grid, values, support_floor=0.0, tail=PowerOfFTail(a), label=label, exact=exact)


def analytic_terms(tset: TransformSet, eps: float) -> Tuple[float, float]:
    """Closed-form energy and Hardy right-hand side for the extremal profile."""
    p = tset.params.p
    s = tset.sign
    a = profile_exponent(tset, eps)
    lam = tset.params.hardy_constant
    scale = math.exp(s * eps * p * tset.log_f_eta)
    lhs = abs(a) ** p * scale / (eps * p)
    rhs = (lam / (eps * p) + s * tset.params.boundary_coefficient) * scale
    return lhs, rhs


def analytic_ratio(p: float, s: int, eps: float) -> float:
    pc = p / (p - 1.0)
    lam = (1.0 / pc) ** p
    return (lam + s * lam ** (1.0 / pc) * p * eps) / (1.0 / pc + s * eps) ** p


def convexity_gap(p: float, s: int, eps: float) -> float:
    pc = p / (p - 1.0)
    lam = (1.0 / pc) ** p
    return (1.0 / pc + s * eps) ** p - lam - s * lam ** (1.0 / pc) * p * eps


@dataclass(frozen=True)
class SharpnessRow:
    eps: float
    lhs: float
    rhs: float
    ratio: float
    analytic_lhs: float
    analytic_rhs: float
    analytic_ratio: float
    convexity_gap: float
    discrepancy: float  # relative numeric-vs-analytic, nan when analytic-only
    flags: Tuple[str, ...] = ()

    @property
    def analytic_only(self) -> bool:
        return "analytic-only" in self.flags


def _numeric(tset: TransformSet, eps: float, ppd: int):
    u = extremal_profile(tset, eps, points_per_decade=ppd)
    rep = report_sharp(u, tset)
    return rep.lhs, rep.rhs


def sharpness_row(tset: TransformSet, eps: float, numeric: bool = True,
                  points_per_decade: int = POINTS_PER_DECADE) -> SharpnessRow:
    """Numeric and closed-form evaluation of the extremal ratio at one ``eps``."""
    p, s = tset.params.p, tset.sign
    al, ar = analytic_terms(tset, eps)
    aratio = analytic_ratio(p, s, eps)
    gap = convexity_gap(p, s, eps)
    analytic_only = SharpnessRow(eps, al, ar, ar / al, al, ar, aratio, gap, float("nan"), ("analytic-only",))
    if not numeric:
        return analytic_only
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ProfileWarning)
            lhs, rhs = _numeric(tset, eps, points_per_decade)
    except (DivergenceError, QuadratureError, OverflowError, FloatingPointError):
        return analytic_only
    disc = max(abs(lhs - al) / abs(al), abs(rhs - ar) / abs(ar), abs(rhs / lhs - aratio) / aratio)
    flags = ("numeric-analytic-mismatch",) if disc > AGREEMENT else ()
    return SharpnessRow(eps, lhs, rhs, rhs / lhs, al, ar, aratio, gap, disc, flags)


def sharpness_sweep(tset: TransformSet, eps_list: Sequence[float], numeric_min_eps: float = 0.0,
                    points_per_decade: int = POINTS_PER_DECADE) -> List[SharpnessRow]:
    """Rows for each ``eps``; numeric evaluation only for ``eps >= numeric_min_eps``."""
    eps_arr = np.asarray(list(eps_list), dtype=float)
    if eps_arr.size == 0 or np.any(eps_arr <= 0):
        raise PreconditionError("eps values must be positive")
    if np.any(np.diff(eps_arr) >= 0):
        raise PreconditionError("eps values must be strictly decreasing")
    return [sharpness_row(tset, float(e), numeric=e >= numeric_min_eps, points_per_decade=points_per_decade)
            for e in eps_arr]


# ----------------------------------------------------------- vanishing
@dataclass(frozen=True)
class VanishingFamily:
    profile: TestFunction
    energy: float
    energy_closed_form: float
    energy_piecewise_linear: float
    hardy_lower_bound: float
    log_energy_closed_form: float = float("nan")


def vanishing_family(tset: TransformSet, eps_bar: float, points_per_decade: int = POINTS_PER_DECADE) -> VanishingFamily:
    """Ramp from 0 at ``eps_bar`` to 1 at ``eta/2`` that is affine in ``f``.

    ``energy`` integrates the exact ramp derivative ``1/(w Delta)`` by
    quadrature of ``1/w``; the closed form uses the transform values.
    """
    if tset.weight_class.kind is not Kind.P:
        raise PreconditionError("the vanishing family exists only for P-class weights (w in P(R_+))")
    eta = tset.params.eta
    if not 0.0 < eps_bar < eta / 2:
        raise PreconditionError("eps_bar must lie in (0, eta/2)")
    p = tset.params.p
    lf = tset.log_f_at_log(np.log([eps_bar, eta / 2]))
    f_mid = math.exp(lf[1])
    # Delta = f(eps_bar) - f(eta/2) computed without cancellation
    log_delta = lf[0] + math.log(-math.expm1(lf[1] - lf[0]))
    closed = math.exp((1.0 - p) * log_delta)
    spec = tset.spec
    q = integrate(lambda t: -spec.log_weight_at_log(np.log(t)), eps_bar, eta / 2, tol=1e-12)
    energy_num = math.exp(q.log_value - p * log_delta)

    n = max(int(math.ceil(math.log10(eta / 2 / eps_bar) * points_per_decade)) + 1, 2)
    ramp_t = np.geomspace(eps_bar, eta / 2, n)
    lf_r = tset.log_f_at_log(np.log(ramp_t))
    ramp = -np.expm1(lf_r - lf[0]) * math.exp(lf[0] - log_delta)
    ramp[0], ramp[-1] = 0.0, 1.0
    grid = np.concatenate([ramp_t, [eta]])
    vals = np.concatenate([ramp, [1.0]])
    prof = TestFunction(grid, vals, support_floor=float(eps_bar), label=f"vanishing eps_bar={eps_bar:g}")
    e_pl = energy(prof, tset)
    hb = (math.exp((1.0 - p) * tset.log_f_eta) - f_mid ** (1.0 - p)) / (p - 1.0)
    return VanishingFamily(prof, energy_num, closed, e_pl, hb, (1.0 - p) * log_delta)
