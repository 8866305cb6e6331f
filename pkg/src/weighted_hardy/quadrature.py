"""Log-space adaptive quadrature with a double-exponential endpoint map.

Integrands are supplied as log-magnitudes so that products such as
``exp(1/t) * exp(-1/t)`` never overflow before they are combined.  The
workhorse is a batched adaptive Gauss-Kronrod (7/15) rule that integrates
many intervals at once; the public :func:`integrate` wraps it with an
optional substitution ``t = a + (b - a) exp(-exp(u))`` that clusters nodes
doubly-exponentially at the left endpoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-14

# u-range kept by the double-exponential map near the regular endpoint
_U_LOW = -37.0

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
# Gauss nodes sit at odd positions of the Kronrod abscissae (and the centre)
for _i, _w in zip((1, 3, 5), _WG[:3]):
    _GAUSS_W[_i] = _w
    _GAUSS_W[14 - _i] = _w
_GAUSS_W[7] = _WG[3]

LogIntegrand = Callable[[np.ndarray], np.ndarray]
OwnedLogIntegrand = Callable[[np.ndarray, np.ndarray], np.ndarray]


class QuadratureError(ArithmeticError):
    """Raised when an integrand is non-finite at an interior node."""


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int
    converged: bool
    log_value: float = -math.inf


@dataclass(frozen=True)
class DivergenceVerdict:
    verdict: str  # "convergent" | "divergent" | "inconclusive"
    value: Optional[float]
    probe_trace: List[Tuple[float, float]] = field(default_factory=list)
    log_trace: List[float] = field(default_factory=list)

    @property
    def is_convergent(self) -> bool:
        return self.verdict == "convergent"

    @property
    def is_divergent(self) -> bool:
        return self.verdict == "divergent"


@dataclass
class BatchResult:
    log_values: np.ndarray
    log_errors: np.ndarray
    evaluations: int
    converged: np.ndarray


def _check_finite(vals: np.ndarray) -> None:
    if np.any(np.isnan(vals)) or np.any(vals == np.inf):
        raise QuadratureError("non-finite integrand value at an interior node")


def _grouped_logsumexp(vals: np.ndarray, owners: np.ndarray, m: int) -> np.ndarray:
    top = np.full(m, -np.inf)
    if vals.size == 0:
        return top
    np.maximum.at(top, owners, vals)
    safe_top = np.where(np.isfinite(top), top, 0.0)
    acc = np.zeros(m)
    finite = np.isfinite(vals)
    np.add.at(acc, owners[finite], np.exp(vals[finite] - safe_top[owners[finite]]))
    with np.errstate(divide="ignore"):
        out = safe_top + np.log(acc)
    out[~np.isfinite(top)] = -np.inf
    return out


def _gk_panels(log_h: OwnedLogIntegrand, a: np.ndarray, b: np.ndarray, own: np.ndarray):
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = centre[:, None] + half[:, None] * _NODES[None, :]
    owners = np.broadcast_to(own[:, None], x.shape)
    vals = np.asarray(log_h(x.ravel(), owners.ravel()), dtype=float).reshape(x.shape)
    _check_finite(vals)
    top = vals.max(axis=1)
    ok = np.isfinite(top)
    safe_top = np.where(ok, top, 0.0)
    scaled = np.exp(vals - safe_top[:, None])
    kron = half * (scaled @ _KRONROD_W)
    gauss = half * (scaled @ _GAUSS_W)
    mean = kron / np.where(half > 0, 2 * half, 1.0)
    resasc = half * (np.abs(scaled - mean[:, None]) @ _KRONROD_W)
    diff = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * diff / resasc) ** 1.5), diff)
        # guard against the heuristic shrinking below roundoff
        err = np.maximum(err, 50.0 * np.finfo(float).eps * kron)
        log_k = np.where(ok & (kron > 0), safe_top + np.log(kron), -np.inf)
        log_e = np.where(ok & (err > 0), safe_top + np.log(err), -np.inf)
    return log_k, log_e


def adaptive_log_integrals(
    log_h: OwnedLogIntegrand,
    lo: np.ndarray,
    hi: np.ndarray,
    rtol: float = DEFAULT_RTOL,
    max_depth: int = 64,
    max_panels: int = 4_000_000,
) -> BatchResult:
    """Integrate ``exp(log_h)`` over many intervals simultaneously.

    Parameters
    ----------
    log_h : callable
        ``log_h(x, owner)`` returns the log-integrand at points ``x``; ``owner``
        holds the index of the interval each point belongs to.
    lo, hi : array_like
        Interval endpoints, ``lo <= hi`` elementwise.
    rtol : float
        Relative tolerance per interval.

    Returns
    -------
    BatchResult
        Log of each integral, log of its error estimate, evaluation count and
        a per-interval convergence flag.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    m = lo.size
    width0 = np.maximum(hi - lo, 0.0)
    converged = np.ones(m, dtype=bool)
    done_val: List[np.ndarray] = []
    done_err: List[np.ndarray] = []
    done_own: List[np.ndarray] = []

    live = width0 > 0
    a, b = lo[live], hi[live]
    own = np.nonzero(live)[0]
    depth = np.zeros(own.size, dtype=int)
    evaluations = 0
    half_tol = math.log(0.5 * rtol)
    total_panels = 0

    while own.size:
        log_k, log_e = _gk_panels(log_h, a, b, own)
        evaluations += 15 * own.size
        total_panels += own.size
        prior = _grouped_logsumexp(
            np.concatenate(done_val + [log_k]) if done_val else log_k,
            np.concatenate(done_own + [own]) if done_own else own,
            m,
        )
        with np.errstate(divide="ignore"):
            frac = np.log((b - a) / width0[own])
        budget = np.maximum(log_k, prior[own] + frac) + half_tol
        accept = (log_e <= budget) | (~np.isfinite(log_k) & ~np.isfinite(log_e))
        exhausted = ~accept & ((depth >= max_depth) | (total_panels > max_panels))
        if np.any(exhausted):
            converged[own[exhausted]] = False
            accept |= exhausted
        done_val.append(log_k[accept])
        done_err.append(log_e[accept])
        done_own.append(own[accept])
        split = ~accept
        if not np.any(split):
            break
        sa, sb, so, sd = a[split], b[split], own[split], depth[split]
        mid = 0.5 * (sa + sb)
        a = np.concatenate([sa, mid])
        b = np.concatenate([mid, sb])
        own = np.concatenate([so, so])
        depth = np.concatenate([sd + 1, sd + 1])

    if done_val:
        vals = np.concatenate(done_val)
        errs = np.concatenate(done_err)
        owners = np.concatenate(done_own)
    else:
        vals = errs = np.zeros(0)
        owners = np.zeros(0, dtype=int)
    return BatchResult(
        log_values=_grouped_logsumexp(vals, owners, m),
        log_errors=_grouped_logsumexp(errs, owners, m),
        evaluations=evaluations,
        converged=converged,
    )


def _de_points(u: np.ndarray, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Map u to t = a + (b-a) exp(-exp(u)) and return (t, log|dt/du|)."""
    eu = np.exp(u)
    span = b - a
    near_b = eu < 1.0
    t = np.where(near_b, b + span * np.expm1(-eu), a + span * np.exp(-eu))
    log_jac = math.log(span) + u - eu
    return t, log_jac


def _de_upper_limit(a: float, b: float) -> float:
    span = b - a
    if a > 0:
        floor = max(4.0 * np.finfo(float).eps * a / span, 1e-300)
    else:
        floor = 1e-300 / span if span > 1e-300 else 1e-300
    return math.log(-math.log(min(floor, 0.5)))


def integrate(
    log_f: LogIntegrand,
    a: float,
    b: float,
    tol: float = DEFAULT_RTOL,
    singular_at_a: bool = False,
    atol: float = DEFAULT_ATOL,
    sign: float = 1.0,
) -> QuadratureResult:
    """Integrate ``sign * exp(log_f(t))`` over ``(a, b)``.

    Parameters
    ----------
    log_f : callable
        Vectorised log-magnitude of a single-signed integrand.
    a, b : float
        Limits with ``0 <= a < b``.
    tol : float
        Relative tolerance; ``atol`` is the absolute floor.
    singular_at_a : bool
        Apply the double-exponential substitution clustering nodes at ``a``.
    sign : float
        Sign of the integrand (``+1`` or ``-1``).

    Returns
    -------
    QuadratureResult
    """
    if not (b > a) or a < 0 or not math.isfinite(b):
        raise ValueError("integration limits must satisfy 0 <= a < b < inf")
    if tol <= 0:
        raise ValueError("tolerance must be positive")

    if singular_at_a:
        u_lo, u_hi = _U_LOW, _de_upper_limit(a, b)

        def log_h(u, _own):
            t, log_jac = _de_points(u, a, b)
            return np.asarray(log_f(t), dtype=float) + log_jac

        res = adaptive_log_integrals(log_h, np.array([u_lo]), np.array([u_hi]), rtol=0.5 * tol)
        ends = np.asarray(log_h(np.array([u_lo, u_hi]), None), dtype=float)
        tail = float(np.logaddexp(ends[0], ends[1]))
        log_err = float(np.logaddexp(res.log_errors[0], tail))
    else:
        res = adaptive_log_integrals(
            lambda x, _own: log_f(x), np.array([a]), np.array([b]), rtol=0.5 * tol
        )
        log_err = float(res.log_errors[0])

    log_val = float(res.log_values[0])
    value = sign * math.exp(log_val) if log_val < 709.0 else sign * math.inf
    err = math.exp(log_err) if log_err < 709.0 else math.inf
    ok = bool(res.converged[0]) and err <= max(tol * abs(value), atol)
    return QuadratureResult(value, err, res.evaluations, ok, log_val)


def log_integral_below(
    log_h: LogIntegrand, x0: float, rtol: float = DEFAULT_RTOL, max_span: float = 1e7
) -> Tuple[float, float, bool]:
    """Return ``(log I, log err, converged)`` for ``I = int_{-inf}^{x0} exp(log_h)``.

    Uses ``y = x0 - exp(u)``, the log-coordinate form of the
    double-exponential endpoint map at ``t = 0``.
    """

    def in_u(u, _own=None):
        u = np.asarray(u, dtype=float)
        return np.asarray(log_h(x0 - np.exp(u)), dtype=float) + u

    # start narrow: far-out abscissae can suffer cancellation in log_h
    u_hi = math.log(4.0)
    probe = np.linspace(_U_LOW, u_hi, 257)
    vals = in_u(probe)
    _check_finite(vals)
    peak = float(np.max(vals))
    while math.exp(u_hi) < max_span:
        edge = float(in_u(np.array([u_hi]))[0])
        if not math.isfinite(peak) or edge < peak - 60.0:
            break
        u_hi += math.log(4.0)
        more = in_u(np.linspace(u_hi - math.log(4.0), u_hi, 65))
        _check_finite(more)
        peak = max(peak, float(np.max(more)))
    res = adaptive_log_integrals(in_u, np.array([_U_LOW]), np.array([u_hi]), rtol=0.5 * rtol)
    edge = float(in_u(np.array([u_hi]))[0])
    log_err = float(np.logaddexp(res.log_errors[0], edge))
    return float(res.log_values[0]), log_err, bool(res.converged[0])


def probe_divergence(
    log_f: LogIntegrand, b: float, levels: int = 12, tol: float = DEFAULT_RTOL
) -> DivergenceVerdict:
    """Three-way verdict on whether ``int_0^b exp(log_f)`` is finite.

    Partial integrals ``I(eps)`` are taken at ``eps = b * 4**-j``.  The
    increments ``d_j = I(eps_{j+1}) - I(eps_j)`` decide the verdict: a stable
    geometric decay over the last three ratios means convergent (the value is
    extrapolated geometrically); non-shrinking increments, or growth of
    ``I`` by a factor of at least 1.5 across the last three probes, mean
    divergent; anything else is inconclusive.
    """
    if b <= 0 or levels < 5:
        raise ValueError("probe_divergence needs b > 0 and at least 5 levels")
    eps = b * 4.0 ** -np.arange(1, levels + 1)
    uppers = np.concatenate([[b], eps[:-1]])
    xs_lo, xs_hi = np.log(eps), np.log(uppers)

    def in_x(x, _own):
        return np.asarray(log_f(np.exp(x)), dtype=float) + x

    res = adaptive_log_integrals(in_x, xs_lo, xs_hi, rtol=tol)
    pieces = res.log_values
    log_trace = list(np.logaddexp.accumulate(pieces))
    trace = [(float(e), float(math.exp(v)) if v < 709 else math.inf) for e, v in zip(eps, log_trace)]

    # increments between successive probes are pieces[1:]
    ratios = np.diff(pieces[-4:])  # log of d_{j+1}/d_j for the last three steps
    growth = log_trace[-1] - log_trace[-4]
    if np.all(np.isfinite(ratios)) and np.all(ratios < math.log(0.95)) and np.ptp(ratios) < 0.1:
        r = math.exp(float(np.mean(ratios)))
        log_rest = float(pieces[-1]) + math.log(r / (1.0 - r))
        log_total = float(np.logaddexp(log_trace[-1], log_rest))
        return DivergenceVerdict("convergent", math.exp(log_total), trace, log_trace)
    if np.all(ratios >= math.log(1.0 - 1e-6)) or growth >= math.log(1.5):
        return DivergenceVerdict("divergent", None, trace, log_trace)
    return DivergenceVerdict("inconclusive", None, trace, log_trace)
