"""Piecewise-linear test functions and the one-dimensional Hardy functionals.

Every integral is split at the nodes of the test function, so ``|u'|`` is
exact on each segment and only the weight needs quadrature.  Integrands are
assembled in log-space in the coordinate ``x = log t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .quadrature import DEFAULT_RTOL, adaptive_log_integrals, log_integral_below
from .transforms import TransformBundle, TransformParams, TransformSet, hardy_constant, power_coupled_mu
from .weights import DomainError, Kind, conjugate, validate_exponent

DEFAULT_TOL_FACTOR = 1e-6


class PreconditionError(ValueError):
    """An operation's hypothesis is violated by its arguments."""


class DivergenceError(ArithmeticError):
    """An integral that must be finite diverged."""


# ---------------------------------------------------------------- tails
@dataclass(frozen=True)
class LinearTail:
    """``u(t) = slope * t`` on ``(0, t0]``; continues the grid to the origin."""

    slope: float

    def log_abs_u(self, x, tset=None):
        with np.errstate(divide="ignore"):
            return math.log(abs(self.slope)) + x if self.slope else np.full_like(x, -np.inf)

    def log_abs_du(self, x, tset=None):
        return np.full_like(x, math.log(abs(self.slope)) if self.slope else -np.inf)

    def sign_du(self, x, tset=None):
        return np.full_like(x, np.sign(self.slope))


@dataclass(frozen=True)
class PowerOfFTail:
    """``u(t) = scale * f(t)**exponent`` below the grid; ``f`` from ``tset``."""

    exponent: float
    scale: float = 1.0

    def log_abs_u(self, x, tset):
        return math.log(self.scale) + self.exponent * tset.log_f_at_log(x)

    def log_abs_du(self, x, tset):
        b = tset.evaluate_at_log(x)
        # f' = s / w, so u' = scale * exponent * f**(exponent-1) * s / w
        return math.log(self.scale * abs(self.exponent)) + (self.exponent - 1.0) * b.log_f - b.log_w

    def sign_du(self, x, tset):
        return np.full_like(x, np.sign(self.exponent) * tset.sign)


# ------------------------------------------------------- test functions
@dataclass(frozen=True)
class TestFunction:
    """Piecewise-linear function on ``(0, eta]``.

    ``support_floor > 0`` means ``u`` vanishes on ``(0, support_floor]``; the
    grid then starts there with value 0.  With ``support_floor == 0`` the
    function continues below the first node through ``tail`` (a linear ramp
    to the origin by default) and integrals over that piece are flagged as
    improper tails.  ``exact=True`` declares that ``tail`` describes ``u`` on
    the whole of ``(0, eta]``; integrals then use it throughout and the grid
    is only a sampling.
    """

    __test__ = False

    grid: np.ndarray
    values: np.ndarray
    support_floor: float = 0.0
    tail: Optional[object] = None
    label: str = ""
    exact: bool = False
    _cache: Dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if g.ndim != 1 or g.size < 2 or g.size != v.size:
            raise DomainError("a test function needs matching grid and values with at least 2 nodes")
        if np.any(g <= 0) or np.any(np.diff(g) <= 0):
            raise DomainError("grid must be positive and strictly increasing")
        if not np.all(np.isfinite(v)):
            raise DomainError("test-function values must be finite")
        if self.support_floor > 0:
            if abs(g[0] - self.support_floor) > 1e-14 * g[0] or v[0] != 0.0:
                raise DomainError("grid must start at the support floor with value 0")
            if self.tail is not None:
                raise DomainError("a tail is meaningless below a support floor")
        elif self.tail is None:
            if self.exact:
                raise DomainError("an exact test function needs an analytic profile")
            object.__setattr__(self, "tail", LinearTail(v[0] / g[0]))

    @property
    def eta(self) -> float:
        return float(self.grid[-1])

    @property
    def boundary_value(self) -> float:
        return float(self.values[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.grid)

    @property
    def has_tail(self) -> bool:
        return self.support_floor == 0.0 and self.tail is not None and not (
            isinstance(self.tail, LinearTail) and self.tail.slope == 0.0
        )

    def __call__(self, t) -> np.ndarray:
        return np.interp(t, self.grid, self.values, left=0.0)

    def scaled(self, c: float) -> "TestFunction":
        tail = self.tail
        if isinstance(tail, LinearTail):
            tail = LinearTail(tail.slope * c)
        elif isinstance(tail, PowerOfFTail):
            if c <= 0:
                raise DomainError("profile tails scale by positive factors only")
            tail = PowerOfFTail(tail.exponent, tail.scale * c)
        return TestFunction(self.grid, self.values * c, self.support_floor,
                            None if self.support_floor > 0 else tail, self.label, exact=self.exact)

    def truncated(self, floor: float) -> "TestFunction":
        """Same function with support raised to ``floor`` (ramp on the first segment)."""
        if floor <= self.grid[0] and self.support_floor > 0:
            return self
        keep = self.grid > floor
        g = np.concatenate([[floor], self.grid[keep]])
        v = np.concatenate([[0.0], self.values[keep]])
        return TestFunction(g, v, support_floor=floor, label=self.label)


def random_test_function(rng: np.random.Generator, eta: float, n_nodes: Optional[int] = None,
                         floor_decades: Tuple[float, float] = (0.5, 2.0),
                         signed_probability: float = 0.25) -> TestFunction:
    """Seeded piecewise-linear function vanishing near the origin."""
    n = int(rng.integers(8, 65)) if n_nodes is None else int(n_nodes)
    floor = eta * 10.0 ** -rng.uniform(*floor_decades)
    inner = np.sort(np.exp(rng.uniform(math.log(floor), math.log(eta), n - 2)))
    grid = np.concatenate([[floor], inner, [eta]])
    grid = np.unique(grid)
    values = rng.uniform(0.0, 1.0, grid.size)
    if rng.uniform() < signed_probability:
        values = values * rng.choice([-1.0, 1.0], grid.size)
    values[0] = 0.0
    return TestFunction(grid, values, support_floor=float(grid[0]), label="random")


# ------------------------------------------------------------ integrals
@dataclass
class _Ctx:
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray
    du: np.ndarray  # signed derivative
    log_abs_u: np.ndarray
    log_abs_du: np.ndarray
    b: TransformBundle
    p: float


Kernel = Callable[[_Ctx], np.ndarray]


def _pieces(u: TestFunction) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Split segments at sign changes; return (x_lo, x_hi, owner, zero_side).

    ``zero_side`` is -1 when ``u`` vanishes at the left end of a piece, +1 at
    the right end and 0 otherwise.  Pieces with zeros at both ends are halved.
    """
    g, v = u.grid, u.values
    xg = np.log(g)
    lo, hi, own, side = [], [], [], []
    for i in range(g.size - 1):
        a, b, va, vb = xg[i], xg[i + 1], v[i], v[i + 1]
        cuts = [a]
        if np.sign(va) * np.sign(vb) < 0:
            tc = g[i] + va * (g[i + 1] - g[i]) / (va - vb)
            cuts.append(math.log(tc))
        cuts.append(b)
        for j in range(len(cuts) - 1):
            xa, xb = cuts[j], cuts[j + 1]
            last = j == len(cuts) - 2
            za = j == 1 or (j == 0 and va == 0.0)
            zb = (not last) or vb == 0.0
            if za and zb:
                xm = 0.5 * (xa + xb)
                lo += [xa, xm]; hi += [xm, xb]; own += [i, i]; side += [-1, 1]
            else:
                lo.append(xa); hi.append(xb); own.append(i)
                side.append(-1 if za else (1 if zb else 0))
    return np.array(lo), np.array(hi), np.array(own, dtype=int), np.array(side, dtype=int)


def _pl_segments(u: TestFunction, tset: TransformSet, kernel: Kernel, rtol: float) -> np.ndarray:
    """Per-segment log-integrals for the piecewise-linear part.

    Pieces adjacent to a zero of ``u`` are mapped through ``t = a + (b - a)
    s**m`` (mirrored for a right-end zero), which absorbs the
    ``|u|**(p-2)`` endpoint singularity of gradient-type integrands; those
    pieces are parametrised in ``t`` so that ``u`` there is exact.
    """
    grid, vals = u.grid, u.values
    slopes = u.slopes
    xg = np.log(grid)
    p = tset.params.p
    # integer m keeps the Jacobian polynomial for kernels free of |u|
    m = float(max(1, math.ceil(2.0 / (p - 1.0) - 1e-12)))
    plo, phi_, pown, pside = _pieces(u)
    width = phi_ - plo
    tlo, thi = np.exp(plo), np.exp(phi_)
    tlo = np.where(pside == -1, np.where(plo == xg[pown], grid[pown], tlo), tlo)
    thi = np.where(pside == 1, np.where(phi_ == xg[pown + 1], grid[pown + 1], thi), thi)
    twidth = thi - tlo

    def log_h(sig, k):
        seg = pown[k]
        sd = pside[k]
        left = sd == -1
        right = sd == 1
        plain = sd == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            head = sig ** m
            rest = (1.0 - sig) ** m
            dphi = np.where(left, m * sig ** (m - 1.0), np.where(right, m * (1.0 - sig) ** (m - 1.0), 1.0))
            t_map = np.where(left, tlo[k] + twidth[k] * head, thi[k] - twidth[k] * rest)
            x = np.where(plain, plo[k] + width[k] * sig, np.log(t_map))
            t = np.exp(x)
            uu = np.where(left, slopes[seg] * twidth[k] * head, 0.0)
            uu = np.where(right, -slopes[seg] * twidth[k] * rest, uu)
            uu = np.where(plain, vals[seg] + slopes[seg] * grid[seg] * np.expm1(x - xg[seg]), uu)
            log_jac = np.where(plain, np.log(width[k]), np.log(twidth[k] * dphi) - x)
        du = slopes[seg]
        with np.errstate(divide="ignore"):
            ctx = _Ctx(x, t, uu, du, np.log(np.abs(uu)), np.log(np.abs(du)), tset.evaluate_at_log(x), p)
            out = kernel(ctx) + x + log_jac
        return np.where(dphi == 0.0, -np.inf, out)

    res = adaptive_log_integrals(log_h, np.zeros(plo.size), np.ones(plo.size), rtol=rtol)
    if not np.all(res.converged):
        raise DivergenceError("segment quadrature did not converge")
    seg_vals = np.full(grid.size - 1, -np.inf)
    np.logaddexp.at(seg_vals, pown, res.log_values)
    return seg_vals


def _tail_integrand(u: TestFunction, tset: TransformSet, kernel: Kernel):
    """Log-integrand in ``x`` built from the analytic profile ``u.tail``."""
    tail = u.tail
    p = tset.params.p

    def log_h(x):
        x = np.asarray(x, dtype=float)
        la = np.asarray(tail.log_abs_u(x, tset), dtype=float)
        ld = np.asarray(tail.log_abs_du(x, tset), dtype=float)
        sd = np.asarray(tail.sign_du(x, tset), dtype=float)
        with np.errstate(over="ignore"):
            ctx = _Ctx(x, np.exp(x), np.exp(la), sd * np.exp(ld), la, ld, tset.evaluate_at_log(x), p)
        return kernel(ctx) + x

    return log_h


def _segment_log_integrals(u: TestFunction, tset: TransformSet, kernel: Kernel,
                           rtol: float = DEFAULT_RTOL) -> Tuple[np.ndarray, float, bool]:
    """Per-segment log-integrals of ``kernel`` plus the improper-tail piece."""
    if u.eta > tset.params.eta * (1 + 1e-12):
        raise DomainError("test function extends beyond eta")
    xg = np.log(u.grid)
    if u.exact:
        log_prof = _tail_integrand(u, tset, kernel)
        res = adaptive_log_integrals(lambda x, _own: log_prof(x), xg[:-1], xg[1:], rtol=rtol)
        if not np.all(res.converged):
            raise DivergenceError("segment quadrature did not converge")
        seg_vals = res.log_values
    else:
        seg_vals = _pl_segments(u, tset, kernel, rtol)

    tail_val = -np.inf
    if u.has_tail:
        tail_val, _, ok = log_integral_below(_tail_integrand(u, tset, kernel), float(xg[0]), rtol=rtol)
        if not ok or (tail_val > 0 and not math.isfinite(tail_val)):
            raise DivergenceError("improper tail integral did not converge")
    return seg_vals, tail_val, True


def _total(u: TestFunction, tset: TransformSet, name: str, kernel: Kernel) -> float:
    key = (id(tset), name)
    hit = u._cache.get(key)
    if hit is not None:
        return hit
    seg, tail, _ = _segment_log_integrals(u, tset, kernel)
    log_total = float(np.logaddexp(np.logaddexp.reduce(seg) if seg.size else -np.inf, tail))
    if log_total > 709.0:
        raise DivergenceError(f"integral '{name}' overflows (log value {log_total:.1f})")
    value = math.exp(log_total)
    u._cache[key] = value
    return value


def _k_energy(ctx: _Ctx) -> np.ndarray:
    return ctx.p * ctx.log_abs_du + (ctx.p - 1.0) * ctx.b.log_w


def _k_hardy(ctx: _Ctx) -> np.ndarray:
    # |u|^p W_p / F^p = |u|^p / (w f^p)
    return ctx.p * ctx.log_abs_u - ctx.b.log_w - ctx.p * ctx.b.log_f


def _k_remainder(ctx: _Ctx) -> np.ndarray:
    return _k_hardy(ctx) - 2.0 * np.log(ctx.b.G)


def _with_t(k: Kernel) -> Kernel:
    return lambda ctx: k(ctx) + ctx.x


def energy(u: TestFunction, tset: TransformSet) -> float:
    """``int |u'|^p W_p`` over the support of ``u``."""
    return _total(u, tset, "energy", _k_energy)


def hardy_integral(u: TestFunction, tset: TransformSet) -> float:
    """``int |u|^p W_p / F^p``."""
    return _total(u, tset, "hardy", _k_hardy)


def remainder_integral(u: TestFunction, tset: TransformSet) -> float:
    """``int |u|^p W_p / (F^p G^2)``."""
    return _total(u, tset, "remainder", _k_remainder)


def boundary_term(u: TestFunction, tset: TransformSet) -> float:
    """``Lambda_p**(1/p') |u(eta)|^p / f(eta)**(p-1)`` (unsigned)."""
    p = tset.params.p
    if u.boundary_value == 0.0:
        return 0.0
    log_b = (math.log(tset.params.boundary_coefficient) + p * math.log(abs(u.boundary_value))
             - (p - 1.0) * tset.log_f_eta)
    return math.exp(log_b)


# ------------------------------------------------------------- reports
@dataclass(frozen=True)
class InequalityReport:
    inequality_id: str
    lhs_terms: Dict[str, float]
    rhs_terms: Dict[str, float]
    slack: float
    tolerance_used: float
    passed: bool
    flags: Tuple[str, ...] = ()
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def lhs(self) -> float:
        return float(sum(self.lhs_terms.values()))

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_terms.values()))


def make_report(inequality_id: str, lhs_terms: Dict[str, float], rhs_terms: Dict[str, float],
                tol_factor: float = DEFAULT_TOL_FACTOR, flags: Sequence[str] = (),
                extras: Optional[Dict[str, float]] = None) -> InequalityReport:
    lhs = float(sum(lhs_terms.values()))
    rhs = float(sum(rhs_terms.values()))
    slack = lhs - rhs
    tol = tol_factor * max(abs(lhs), abs(rhs), 1.0)
    return InequalityReport(inequality_id, dict(lhs_terms), dict(rhs_terms), slack, tol,
                            bool(slack >= -tol), tuple(flags), dict(extras or {}))


def _flags(u: TestFunction) -> Tuple[str, ...]:
    return ("improper-tail",) if u.has_tail else ()


def report_sharp(u: TestFunction, tset: TransformSet, tol_factor: float = DEFAULT_TOL_FACTOR) -> InequalityReport:
    """Sharp Hardy inequality with the switching boundary term."""
    lam = tset.params.hardy_constant
    return make_report(
        "sharp_hardy",
        {"energy": energy(u, tset)},
        {"hardy": lam * hardy_integral(u, tset), "boundary": tset.sign * boundary_term(u, tset)},
        tol_factor, _flags(u),
    )


def minimal_m(p: float, mu: float) -> float:
    """Threshold with ``1 - 2/(mu (p-1) M) > 0`` exactly at ``M`` above it."""
    return 2.0 / (mu * (p - 1.0))


def remainder_constants(tset: TransformSet, M: Optional[float] = None,
                        c_estimate: Optional[float] = None) -> Dict[str, float]:
    """``C``, ``L`` and ``d(p)`` of the remainder inequality."""
    from .identities import elementary_lower_bound

    p, mu = tset.params.p, tset.params.mu
    pc = tset.params.p_conj
    lam_b = tset.params.boundary_coefficient
    if p >= 2.0:
        c = elementary_lower_bound(p, q=2.0).c_estimate if c_estimate is None else c_estimate
        m_factor = 1.0
        M_used = float("nan") if M is None else float(M)
    else:
        if M is None:
            M = max(2.0, 2.0 * minimal_m(p, mu))
        if M < 1.0 or not (1.0 - 2.0 / (mu * (p - 1.0) * M) > 0):
            raise PreconditionError(
                f"M={M} too small: 1<p<2 requires M>=1 and 1-2/(mu(p-1)M)>0, i.e. M>{minimal_m(p, mu):.6g}"
            )
        c = elementary_lower_bound(p, M=M).c_estimate if c_estimate is None else c_estimate
        m_factor = M ** (p - 2.0)
        M_used = float(M)
    d = c * 4.0 * pc / p ** 2
    C = d * m_factor * lam_b / 4.0
    factor = 1.0 - tset.sign * d * m_factor / (2.0 * mu)
    L = lam_b * math.exp((1.0 - p) * tset.log_f_eta) * factor
    return {"c": c, "d": d, "C": C, "L": L, "M": M_used, "L_factor": factor}


def report_remainder(u: TestFunction, tset: TransformSet, M: Optional[float] = None,
                c_estimate: Optional[float] = None,
                tol_factor: float = DEFAULT_TOL_FACTOR) -> InequalityReport:
    """Hardy inequality with the logarithmic remainder term."""
    k = remainder_constants(tset, M, c_estimate)
    lam = tset.params.hardy_constant
    bv = abs(u.boundary_value) ** tset.params.p
    flags = _flags(u)
    if k["L_factor"] <= 0:
        # the derivation assumes a positive boundary coefficient
        flags += ("boundary-coefficient-nonpositive",)
    return make_report(
        "hardy_remainder",
        {"energy": energy(u, tset)},
        {
            "hardy": lam * hardy_integral(u, tset),
            "remainder": k["C"] * remainder_integral(u, tset),
            "boundary": tset.sign * k["L"] * bv,
        },
        tol_factor, flags, extras=k,
    )


def report_t_weighted(u: TestFunction, tset: TransformSet, C0: float, C1: float, L: float,
              tol_factor: float = DEFAULT_TOL_FACTOR) -> InequalityReport:
    """Two-sided remainder form with ``t``-weighted terms (admissible weights)."""
    adm = tset.weight_class.admissible
    if adm is None:
        from .weights import check_admissible

        adm, _ = check_admissible(tset.spec, tset.params.eta, tset.params.mu, tset.weight_class)
    if not adm:
        raise PreconditionError("the t-weighted remainder form requires an admissible weight (w in W_A)")
    lam = tset.params.hardy_constant
    E = energy(u, tset)
    H = hardy_integral(u, tset)
    R = remainder_integral(u, tset)
    Et = _total(u, tset, "energy_t", _with_t(_k_energy))
    Ht = _total(u, tset, "hardy_t", _with_t(_k_hardy))
    Rt = _total(u, tset, "remainder_t", _with_t(_k_remainder))
    bv = abs(u.boundary_value) ** tset.params.p
    return make_report(
        "t_weighted_remainder",
        {"energy": E, "hardy": -lam * H, "remainder": -C0 * R},
        {
            "energy_t": C1 * Et,
            "potential_t": C1 * (lam * Ht + C0 * Rt),
            "boundary": tset.sign * L * bv,
        },
        tol_factor, _flags(u),
    )


# ------------------------------------------------------ monotone profile
def monotone_comparison(u: TestFunction, tset: TransformSet, profile: Callable[[np.ndarray], np.ndarray],
                        tol_factor: float = DEFAULT_TOL_FACTOR) -> InequalityReport:
    """Compare the Hardy deficit with its copy weighted by a monotone profile."""
    if tset.weight_class.kind is not Kind.Q:
        raise PreconditionError("the monotone comparison needs a Q-class weight (w in Q(R_+))")
    probe = np.unique(np.concatenate([u.grid, np.geomspace(u.grid[0], tset.params.eta, 257)]))
    prof = np.asarray(profile(probe), dtype=float)
    if np.any(np.diff(prof) < -1e-14) or prof[-1] > 1.0 + 1e-14 or np.any(prof < 0):
        raise PreconditionError("profile must be non-decreasing, non-negative and at most 1 at eta")

    def with_profile(k: Kernel) -> Kernel:
        def inner(ctx: _Ctx):
            with np.errstate(divide="ignore"):
                return k(ctx) + np.log(np.asarray(profile(ctx.t), dtype=float))
        return inner

    lam = tset.params.hardy_constant
    E = energy(u, tset)
    H = hardy_integral(u, tset)
    key = id(profile)
    Ef = _total(u, tset, f"energy_profile_{key}", with_profile(_k_energy))
    Hf = _total(u, tset, f"hardy_profile_{key}", with_profile(_k_hardy))
    return make_report(
        "monotone_comparison",
        {"energy": E, "hardy": -lam * H},
        {"energy_profile": Ef, "hardy_profile": -lam * Hf},
        tol_factor, _flags(u),
    )


# --------------------------------------------------------- special cases
SPECIAL_CASES = ("exp_decay", "exp_growth", "power_above", "power_critical", "power_below")


@dataclass(frozen=True)
class SpecialCaseParams:
    """Parameters of the explicit-weight special cases.

    Cases: ``exp_decay`` (``w = e^{-1/t}``, offset ``mu``), ``exp_growth``
    (``w = e^{1/t}``), and the powers ``W_p = t**(alpha p)`` with
    ``alpha > 1/p'`` (``power_above``), ``alpha < 1/p'`` (``power_below``) or
    ``alpha = 1/p'`` (``power_critical``, logarithm base ``R > e``).
    """

    p: float
    eta: float = 1.0
    alpha: float = 0.0
    mu: float = 1.0
    R: float = math.e ** 2


_SERIES_SWITCH = 40.0


def _scaled_ei_excess(x: np.ndarray) -> np.ndarray:
    """``exp(-x) Ei(x) - 1/x`` for ``x > 0``."""
    from scipy.special import expi

    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= _SERIES_SWITCH
    xs = x[small]
    out[small] = np.exp(-xs) * expi(xs) - 1.0 / xs
    xl = x[~small]
    # asymptotic series sum_{k>=1} k!/x^(k+1), truncated before terms grow
    term = 1.0 / xl
    acc = np.zeros_like(xl)
    for k in range(1, 40):
        term = term * k / xl
        acc += term
    out[~small] = acc
    return out


def _scaled_e1_deficit(x: np.ndarray) -> np.ndarray:
    """``1/x - exp(x) E1(x)`` for ``x > 0``."""
    from scipy.special import exp1

    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= _SERIES_SWITCH
    xs = x[small]
    out[small] = 1.0 / xs - np.exp(xs) * exp1(xs)
    xl = x[~small]
    term = 1.0 / xl
    acc = np.zeros_like(xl)
    for k in range(1, 40):
        term = -term * k / xl
        acc -= term
    out[~small] = acc
    return out


@dataclass(frozen=True)
class _Potential:
    """Closed-form ``w`` and ``f`` standing in for a transform set."""

    params: TransformParams
    log_w: Callable[[np.ndarray], np.ndarray]
    log_f: Callable[[np.ndarray], np.ndarray]
    sign: int

    def evaluate_at_log(self, x) -> TransformBundle:
        x = np.asarray(x, dtype=float)
        lw, lf = self.log_w(x), self.log_f(x)
        nan = np.full_like(x, np.nan)
        return TransformBundle(x, lw, lf, lw + lf, nan, nan)


def _potential(case: str, prm: SpecialCaseParams) -> Tuple[_Potential, float]:
    """Closed-form potential and the coupled ``mu`` of the general inequality."""
    p, eta = prm.p, prm.eta
    tp = TransformParams(p, eta, 1.0)
    pc = tp.p_conj
    if case == "exp_decay":
        y = 1.0 / eta
        # f(t) = int_t^eta e^{1/s} ds + mu = e^x S(x) - e^y S(y) + mu with S the Ei excess
        offset = prm.mu - math.exp(y) * float(_scaled_ei_excess(np.array([y]))[0])

        def log_f(x):
            xi = np.exp(-x)
            return xi + np.log(_scaled_ei_excess(xi) + offset * np.exp(-xi))

        return _Potential(tp, lambda x: -np.exp(-x), log_f, -1), prm.mu
    if case == "exp_growth":
        def log_f(x):
            xi = np.exp(-x)
            return -xi + np.log(_scaled_e1_deficit(xi))

        return _Potential(tp, lambda x: np.exp(-x), log_f, 1), 1.0
    k = prm.alpha * pc
    if case == "power_critical":
        log_r = math.log(prm.R)
        return _Potential(tp, lambda x: np.asarray(x, dtype=float).copy(),
                          lambda x: np.log(log_r + math.log(eta) - x), -1), log_r
    if case == "power_above":
        return _Potential(tp, lambda x: k * x, lambda x: (1.0 - k) * x - math.log(k - 1.0), -1), \
            power_coupled_mu(prm.alpha, p, eta)
    return _Potential(tp, lambda x: k * x, lambda x: (1.0 - k) * x - math.log(1.0 - k), 1), 1.0


def _check_special_case(case: str, prm: SpecialCaseParams) -> None:
    if case not in SPECIAL_CASES:
        raise PreconditionError(f"unknown case {case!r}; expected one of {', '.join(SPECIAL_CASES)}")
    validate_exponent(prm.p)
    if not prm.eta > 0:
        raise PreconditionError("eta must satisfy eta>0")
    crit = 1.0 / conjugate(prm.p)
    if case == "exp_decay" and not prm.mu > 0:
        raise PreconditionError("case exp_decay requires mu>0")
    if case == "power_above" and not prm.alpha > crit:
        raise PreconditionError(f"case power_above requires alpha>1/p' = {crit:g}")
    if case == "power_below" and not prm.alpha < crit:
        raise PreconditionError(f"case power_below requires alpha<1/p' = {crit:g}")
    if case == "power_critical" and not prm.R > math.e:
        raise PreconditionError("case power_critical requires R>e")


def special_case_spec(case: str, prm: SpecialCaseParams):
    """Weight and transform parameters matching ``case``."""
    from .weights import WeightSpec

    _, mu = _potential(case, prm)
    p = prm.p
    if case == "exp_decay":
        spec = WeightSpec.exp_inv_pow(-1, 1.0, p)
    elif case == "exp_growth":
        spec = WeightSpec.exp_inv_pow(1, 1.0, p)
    elif case == "power_critical":
        spec = WeightSpec.power(1.0 / conjugate(p), p)
    else:
        spec = WeightSpec.power(prm.alpha, p)
    return spec, TransformParams(p, prm.eta, mu)


def special_case_check(case: str, u: TestFunction, params: SpecialCaseParams,
                    cross_check: bool = True, tol_factor: float = DEFAULT_TOL_FACTOR) -> InequalityReport:
    """Explicit-weight special case evaluated with its closed-form potential.

    With ``cross_check`` the same terms are recomputed through a quadrature
    transform set under the coupled ``mu``; the largest relative term
    difference is stored in ``extras["cross_check"]``.
    """
    case = case.lower()
    _check_special_case(case, params)
    if u.eta > params.eta * (1 + 1e-12):
        raise PreconditionError("test function extends beyond eta")
    pot, mu = _potential(case, params)
    p = params.p
    pc = conjugate(p)
    lam = hardy_constant(p)
    E = _total(u, pot, "energy", _k_energy)
    H = _total(u, pot, "hardy", _k_hardy)
    bcoef = pc ** (1.0 - p)
    if case in ("exp_decay", "power_critical"):
        log_feta = math.log(mu)
    else:
        log_feta = float(pot.log_f(np.array([math.log(params.eta)]))[0])
    B = 0.0 if u.boundary_value == 0.0 else bcoef * abs(u.boundary_value) ** p * math.exp((1.0 - p) * log_feta)
    if pot.sign < 0:
        lhs, rhs = {"energy": E, "boundary": B}, {"hardy": lam * H}
    else:
        lhs, rhs = {"energy": E}, {"hardy": lam * H, "boundary": B}
    extras: Dict[str, float] = {"mu": mu}
    if cross_check:
        from .transforms import build_transforms

        spec, tp = special_case_spec(case, params)
        tset = build_transforms(spec, tp, mode="quadrature")
        ref = report_sharp(u, tset, tol_factor)
        pairs = [(E, ref.lhs_terms["energy"]), (lam * H, ref.rhs_terms["hardy"]),
                 (B, abs(ref.rhs_terms["boundary"]))]
        extras["cross_check"] = max(abs(a - b) / max(abs(a), abs(b), 1e-300) if a or b else 0.0
                                    for a, b in pairs)
    return make_report(case, lhs, rhs, tol_factor, _flags(u), extras)
