"""Numerical witnesses for the substitution ``u = g v`` and its consequences."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import binom

from .inequality import (
    DEFAULT_TOL_FACTOR,
    InequalityReport,
    PreconditionError,
    TestFunction,
    _Ctx,
    _segment_log_integrals,
    _total,
    _with_t,
    boundary_term,
    energy,
    hardy_integral,
    make_report,
    remainder_integral,
)
from .transforms import TransformSet
from .weights import check_admissible

IDENTITIES = ("profile_flux", "cross_term", "hardy_density", "quadratic_gain", "power_gain")


# ------------------------------------------------------- elementary bound
@dataclass(frozen=True)
class ElementaryConstant:
    p: float
    q: Optional[float]
    M: Optional[float]
    c_estimate: float
    argmin_X: float


def _excess(X: np.ndarray, p: float) -> np.ndarray:
    """``|1+X|^p - 1 - pX`` without cancellation near ``X = 0``."""
    X = np.asarray(X, dtype=float)
    out = np.abs(1.0 + X) ** p - 1.0 - p * X
    small = np.abs(X) < 0.1
    if np.any(small):
        xs = X[small]
        acc = np.zeros_like(xs)
        for k in range(2, 40):
            acc += binom(p, k) * xs ** k
        out[small] = acc
    return out


def _denominator(X: np.ndarray, p: float, q: Optional[float], M: Optional[float]) -> np.ndarray:
    a = np.abs(X)
    if q is not None:
        return a ** q
    return np.where(a <= M, M ** (p - 2.0) * X ** 2, a ** p)


@lru_cache(maxsize=64)
def _elementary(p: float, q: Optional[float], M: Optional[float]) -> ElementaryConstant:
    logs = np.geomspace(1e-4, 1e4, 8001)
    X = np.unique(np.concatenate([-logs, logs, np.round(np.arange(-20000, 20001) * 1e-4, 10)]))
    X = X[X != 0.0]

    def ratio(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return _excess(x, p) / _denominator(x, p, q, M)

    r = ratio(X)
    best_val, best_x = float("inf"), float("nan")
    for i in np.argsort(r)[:3]:
        lo, hi = X[max(i - 1, 0)], X[min(i + 1, X.size - 1)]
        if hi > lo and lo < 0.0 < hi:
            hi = -1e-300 if X[i] < 0 else hi
            lo = 1e-300 if X[i] > 0 else lo
        res = minimize_scalar(lambda s: float(ratio(s)[0]), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        cand = [(float(r[i]), float(X[i]))]
        if res.success:
            cand.append((float(res.fun), float(res.x)))
        v, x = min(cand)
        if v < best_val:
            best_val, best_x = v, x
    # analytic limits at 0 and at infinity
    if q is not None:
        at0 = p * (p - 1.0) / 2.0 if q == 2.0 else float("inf")
        atinf = 1.0 if q == p else float("inf")
    else:
        at0 = p * (p - 1.0) / 2.0 / M ** (p - 2.0)
        atinf = 1.0
    for v, x in ((at0, 0.0), (atinf, float("inf"))):
        if v < best_val:
            best_val, best_x = v, x
    return ElementaryConstant(p, q, M, float(best_val), float(best_x))


def elementary_lower_bound(p: float, q: Optional[float] = None, M: Optional[float] = None) -> ElementaryConstant:
    """Best constant ``c`` with ``|1+X|^p - 1 - pX >= c * denominator(X)``.

    Parameters
    ----------
    p : float
        Exponent, ``p > 1``.
    q : float, optional
        Power in ``[2, p]`` for the ``p >= 2`` branch (default 2).
    M : float, optional
        Switch point ``M >= 1`` for the ``1 < p < 2`` branch, where the
        denominator is ``M**(p-2) X**2`` for ``|X| <= M`` and ``|X|**p`` beyond.
    """
    if not p > 1.0:
        raise PreconditionError("exponent must satisfy 1<p<\\infty")
    if p >= 2.0:
        if M is not None and q is None:
            raise PreconditionError("the M-branch applies only to 1<p<2")
        q = 2.0 if q is None else float(q)
        if not 2.0 <= q <= p:
            raise PreconditionError(f"q must lie in [2, p]; got q={q}")
        return _elementary(float(p), q, None)
    if M is None:
        raise PreconditionError("1<p<2 requires the switch point M>=1")
    if M < 1.0:
        raise PreconditionError(f"M must satisfy M>=1; got {M}")
    return _elementary(float(p), None, float(M))


# ------------------------------------------------------ substitution frame
@dataclass(frozen=True)
class SubstitutionFrame:
    """``u = g v`` sampled at segment midpoints of a test function.

    Derivative quantities are taken at midpoints, where ``u'`` is the exact
    segment slope.  ``A_mask`` marks ``|X| <= M`` (and ``v = 0``).
    """

    u: TestFunction
    tset: TransformSet
    M: float
    t: np.ndarray
    u_val: np.ndarray
    du: np.ndarray
    log_g: np.ndarray
    log_dg: np.ndarray  # log |g'|
    log_F: np.ndarray
    log_w: np.ndarray
    G: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    X: np.ndarray
    z: np.ndarray
    a: np.ndarray
    phi: np.ndarray
    A_mask: np.ndarray
    B_mask: np.ndarray

    @property
    def p(self) -> float:
        return self.tset.params.p


def _frame_arrays(u_val, du, b, tset, M):
    p = tset.params.p
    pc = tset.params.p_conj
    s = tset.sign
    au = np.abs(u_val)
    sdu = np.sign(u_val) * du
    sdu = np.where(u_val == 0.0, np.abs(du), sdu)
    log_g = b.log_g
    g = np.exp(log_g)
    # g' from f' = s / w directly
    log_dg = math.log(1.0 / pc) + (1.0 / pc) * math.log(pc) + (1.0 / pc - 1.0) * b.log_f - b.log_w
    v = au / g
    dv = (sdu - au * s * np.exp(-b.log_F) / pc) / g
    with np.errstate(divide="ignore", invalid="ignore"):
        X = np.where(v > 0, pc * np.exp(b.log_F) * dv / v * s, 0.0)
    z = v ** (p / 2.0)
    a = np.sqrt(b.G)
    phi = z / a
    A = (pc * np.exp(b.log_F) * np.abs(dv) <= M * v) | (v == 0.0)
    return dict(log_g=log_g, log_dg=log_dg, v=v, dv=dv, X=X, z=z, a=a, phi=phi, A_mask=A, B_mask=~A)


def substitution_frame(u: TestFunction, tset: TransformSet, M: float = 2.0) -> SubstitutionFrame:
    if not M > 1.0:
        raise PreconditionError("the A/B partition needs M>1")
    t = 0.5 * (u.grid[:-1] + u.grid[1:])
    u_val = u(t)
    du = u.slopes
    b = tset.evaluate_at_log(np.log(t))
    arr = _frame_arrays(u_val, du, b, tset, M)
    return SubstitutionFrame(u, tset, float(M), t, u_val, du, log_F=b.log_F, log_w=b.log_w, G=b.G, **arr)


# ------------------------------------------------------ pointwise checks
def _rel(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(scale > 0, (lhs - rhs) / scale, 0.0)


def identity_sides(frame: SubstitutionFrame, identity: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Both sides of a substitution identity at every frame point plus a defined-mask."""
    p = frame.p
    pc = frame.tset.params.p_conj
    s = frame.tset.sign
    lam = frame.tset.params.hardy_constant
    log_Wp = (p - 1.0) * frame.log_w
    F = np.exp(frame.log_F)
    v, dv, X = frame.v, frame.dv, frame.X
    defined = v > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vg = np.exp(p * np.log(v) + p * frame.log_dg + log_Wp)  # |v|^p |g'|^p W_p
        if identity == "profile_flux":
            lhs = np.exp((p - 1.0) * frame.log_dg + frame.log_g + log_Wp)
            rhs = np.ones_like(lhs)
            defined = np.ones_like(defined)
        elif identity == "cross_term":
            lhs = p * vg * X
            rhs = s * p * v ** (p - 1.0) * dv
        elif identity == "hardy_density":
            lhs = vg
            rhs = lam * np.exp(p * np.log(np.abs(frame.u_val)) + log_Wp - p * frame.log_F)
        elif identity == "quadratic_gain":
            lhs = vg * X ** 2
            rhs = (4.0 * pc / p ** 2) * ((p / 2.0) * v ** (p / 2.0 - 1.0) * dv) ** 2 * F
        elif identity == "power_gain":
            lhs = vg * np.abs(X) ** p
            rhs = pc ** (p - 1.0) * np.abs(dv) ** p * np.exp((p - 1.0) * frame.log_F)
        else:
            raise ValueError(f"unknown identity {identity!r}")
    return lhs, rhs, defined


@dataclass(frozen=True)
class IdentityResidual:
    identity: str
    worst: float
    residuals: np.ndarray
    skipped: int

    @property
    def notice(self) -> str:
        return f"{self.skipped} point(s) with v=0 skipped" if self.skipped else ""


def verify_pointwise_identity(frame: SubstitutionFrame, identity: str, t: Optional[float] = None) -> IdentityResidual:
    """Signed relative residuals of one identity at the frame points (or at ``t``)."""
    if t is not None:
        u = frame.u
        if not (u.grid[0] < t < u.grid[-1]):
            raise PreconditionError("t must lie in the interior of the grid")
        i = int(np.searchsorted(u.grid, t) - 1)
        b = frame.tset.evaluate_at_log(np.array([math.log(t)]))
        arr = _frame_arrays(np.array([u(t)]), u.slopes[i:i + 1], b, frame.tset, frame.M)
        frame = SubstitutionFrame(u, frame.tset, frame.M, np.array([t]), np.array([u(t)]), u.slopes[i:i + 1],
                                  log_F=b.log_F, log_w=b.log_w, G=b.G, **arr)
    lhs, rhs, defined = identity_sides(frame, identity)
    res = np.where(defined, _rel(lhs, rhs), 0.0)
    worst = float(np.max(np.abs(res))) if res.size else 0.0
    return IdentityResidual(identity, worst, res, int(np.sum(~defined)))


# ------------------------------------------------------ boundary integral
@dataclass(frozen=True)
class BoundaryCheck:
    lhs: float
    rhs: float
    residual: float


def boundary_integral_check(frame: SubstitutionFrame) -> BoundaryCheck:
    """Integrate ``(|v|^p)'`` by exact segment increments against the closed form."""
    u, tset = frame.u, frame.tset
    p = frame.p
    xg = np.log(u.grid)
    b = tset.evaluate_at_log(xg)
    vp = np.exp(p * (np.log(np.abs(u.values), where=u.values != 0, out=np.full(u.values.shape, -np.inf))
                     - b.log_g))
    start = 0.0
    if u.has_tail:
        xs = np.array([xg[0] - 60.0])
        la = np.asarray(u.tail.log_abs_u(xs, tset)) - tset.evaluate_at_log(xs).log_g
        start = float(np.exp(p * la[0]))
        if start > 1e-12 * max(vp[-1], 1e-300) and start > 1e-300:
            raise PreconditionError("v does not vanish at the origin; the boundary identity needs v(0+)=0")
    # exact summation: increments can be many orders larger than the endpoint value
    lhs = math.fsum(np.concatenate([vp[1:], -vp[:-1], [vp[0], -start]]))
    rhs = boundary_term(u, tset)
    scale = max(abs(lhs), abs(rhs))
    return BoundaryCheck(lhs, rhs, 0.0 if scale == 0 else abs(lhs - rhs) / scale)


# ---------------------------------------------------- integrated bounds
def _dv_terms(ctx: _Ctx, tset: TransformSet):
    pc = tset.params.p_conj
    s = tset.sign
    au = np.abs(ctx.u)
    sdu = np.where(ctx.u == 0.0, np.abs(ctx.du), np.sign(ctx.u) * ctx.du)
    g = np.exp(ctx.b.log_g)
    v = au / g
    dv = (sdu - au * s * np.exp(-ctx.b.log_F) / pc) / g
    return v, dv


def _k_zprime(tset: TransformSet):
    """``|(v^{p/2})'|^2 F``."""
    def k(ctx: _Ctx):
        p = ctx.p
        v, dv = _dv_terms(ctx, tset)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 2.0 * math.log(p / 2.0) + (p - 2.0) * np.log(v) + 2.0 * np.log(np.abs(dv)) + ctx.b.log_F
        return np.where((np.abs(dv) == 0.0) | (v == 0.0), -np.inf, out)
    return k


def _k_vprime(tset: TransformSet):
    """``|v'|^p F^{p-1}``."""
    def k(ctx: _Ctx):
        p = ctx.p
        _, dv = _dv_terms(ctx, tset)
        with np.errstate(divide="ignore"):
            return p * np.log(np.abs(dv)) + (p - 1.0) * ctx.b.log_F
    return k


def _k_rem(ctx: _Ctx):
    return ctx.p * ctx.log_abs_u - ctx.b.log_w - ctx.p * ctx.b.log_f - 2.0 * np.log(ctx.b.G)


def _segment_values(u: TestFunction, tset: TransformSet, kernel) -> Tuple[np.ndarray, float]:
    seg, tail, _ = _segment_log_integrals(u, tset, kernel)
    return np.exp(seg), float(np.exp(tail))


def _phi_sq_nodes(u: TestFunction, tset: TransformSet) -> np.ndarray:
    p = tset.params.p
    b = tset.evaluate_at_log(np.log(u.grid))
    with np.errstate(divide="ignore"):
        return np.exp(p * (np.log(np.abs(u.values)) - b.log_g)) / b.G


def ground_state_check(frame: SubstitutionFrame, S: Optional[np.ndarray] = None,
                       tol_factor: float = DEFAULT_TOL_FACTOR) -> InequalityReport:
    """Integrated completed-square bound on the segments selected by ``S``.

    With ``S`` covering every segment the report also carries the
    whole-interval form whose boundary term is ``-Lambda^{1/p'}|u(eta)|^p/(2 mu f(eta)^{p-1})``.
    """
    u, tset = frame.u, frame.tset
    n = u.grid.size - 1
    S = np.ones(n, dtype=bool) if S is None else np.asarray(S, dtype=bool)
    if S.shape != (n,):
        raise PreconditionError("segment mask must have one entry per segment")
    pc = tset.params.p_conj
    p = tset.params.p
    zq, ztail = _segment_values(u, tset, _k_zprime(tset))
    rq, rtail = _segment_values(u, tset, _k_rem)
    phi2 = _phi_sq_nodes(u, tset)
    dphi = np.diff(phi2)
    full = bool(np.all(S))
    lhs = float(np.sum(zq[S])) + (ztail if full else 0.0)
    rem = float(np.sum(rq[S])) + (rtail if full else 0.0)
    flux = float(np.sum(dphi[S])) + (phi2[0] if full and u.has_tail else 0.0)
    extras: Dict[str, float] = {}
    if full:
        closed = tset.params.boundary_coefficient * abs(u.boundary_value) ** p * math.exp(
            (1.0 - p) * tset.log_f_eta) / tset.params.mu
        extras["boundary_closed_form"] = -0.5 * closed
        extras["boundary_flux"] = -0.5 * flux
    return make_report(
        "completed_square" if not full else "completed_square_full",
        {"gradient": lhs},
        {"flux": -0.5 * flux, "remainder": rem / (4.0 * pc ** (p - 1.0))},
        tol_factor, ("improper-tail",) if u.has_tail else (), extras,
    )


def assembled_check(frame: SubstitutionFrame, c_estimate: Optional[float] = None,
                    tol_factor: float = DEFAULT_TOL_FACTOR) -> InequalityReport:
    """Energy against Hardy, boundary and the ``v``-gradient gain with ``d = 4 c p'/p^2``."""
    u, tset = frame.u, frame.tset
    p, pc = tset.params.p, tset.params.p_conj
    lam = tset.params.hardy_constant
    if p >= 2.0:
        c = elementary_lower_bound(p).c_estimate if c_estimate is None else c_estimate
    else:
        c = elementary_lower_bound(p, M=frame.M).c_estimate if c_estimate is None else c_estimate
    d = c * 4.0 * pc / p ** 2
    zq, ztail = _segment_values(u, tset, _k_zprime(tset))
    rhs = {"hardy": lam * hardy_integral(u, tset), "boundary": tset.sign * boundary_term(u, tset)}
    if p >= 2.0:
        rhs["gain"] = d * (float(np.sum(zq)) + ztail)
    else:
        vq, vtail = _segment_values(u, tset, _k_vprime(tset))
        A = frame.A_mask
        rhs["gain_A"] = frame.M ** (p - 2.0) * d * float(np.sum(zq[A]))
        rhs["gain_B"] = c * pc ** (p - 1.0) * float(np.sum(vq[~A]))
        if u.has_tail:
            rhs["gain_A"] += frame.M ** (p - 2.0) * d * ztail
    return make_report("assembled_gain", {"energy": energy(u, tset)}, rhs, tol_factor,
                       ("improper-tail",) if u.has_tail else (), {"c": c, "d": d})


@dataclass(frozen=True)
class PointwiseBound:
    worst_ratio: float  # max lhs/rhs over points; <= 1 means the bound holds
    passed: bool


def pointwise_derivative_bound(frame: SubstitutionFrame, rtol: float = 1e-10) -> PointwiseBound:
    """``|u'|^p W_p`` against the A/B-split bound at every frame point."""
    p = frame.p
    lam = frame.tset.params.hardy_constant
    M = frame.M
    with np.errstate(divide="ignore"):
        log_lhs = p * np.log(np.abs(frame.du)) + (p - 1.0) * frame.log_w
        log_a = (math.log(lam) + p * math.log(1.0 + M) + p * np.log(np.abs(frame.u_val))
                 + (p - 1.0) * frame.log_w - p * frame.log_F)
        log_b = (p * math.log(2.0) - math.log(lam) / frame.tset.params.p_conj
                 + p * np.log(np.abs(frame.dv)) + (p - 1.0) * frame.log_F)
    bound = np.where(np.abs(frame.X) <= M, log_a, log_b)
    diff = log_lhs - bound
    diff = diff[np.isfinite(log_lhs)]
    worst = float(np.exp(np.max(diff))) if diff.size else 0.0
    return PointwiseBound(worst, worst <= 1.0 + rtol)


def weighted_t_bound_check(u: TestFunction, tset: TransformSet, K: Optional[float] = None,
                           tol_factor: float = DEFAULT_TOL_FACTOR) -> InequalityReport:
    """``int u^p W_p t / F^p <= K^2 int u^p W_p / (F^p G^2)`` for admissible weights."""
    adm = tset.weight_class.admissible
    witness = tset.weight_class.admissibility_constant_K
    if adm is None:
        adm, witness = check_admissible(tset.spec, tset.params.eta, tset.params.mu, tset.weight_class)
    if not adm:
        raise PreconditionError("the t-weighted bound requires an admissible weight (w in W_A)")
    K = witness if K is None else float(K)
    lhs = _total(u, tset, "hardy_t", _with_t(lambda c: c.p * c.log_abs_u - c.b.log_w - c.p * c.b.log_f))
    rhs = K ** 2 * remainder_integral(u, tset)
    t = u.grid
    G = tset.G_at_log(np.log(t))
    pointwise = float(np.max(t * G ** 2) / K ** 2)
    flags = ("improper-tail",) if u.has_tail else ()
    if pointwise > 1.0 + 1e-12:
        flags = flags + ("pointwise-violation",)
    rep = make_report("t_weighted_bound", {"remainder_K2": rhs}, {"hardy_t": lhs}, tol_factor, flags,
                      {"K": K, "max_tG2_over_K2": pointwise})
    if pointwise > 1.0 + 1e-12:
        return InequalityReport(rep.inequality_id, rep.lhs_terms, rep.rhs_terms, rep.slack,
                                rep.tolerance_used, False, rep.flags, rep.extras)
    return rep
