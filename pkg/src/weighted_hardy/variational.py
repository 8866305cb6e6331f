"""Discrete Rayleigh quotients and their minimisation on graded meshes.

Unknowns are the nodal values of a piecewise-linear ``u`` that vanishes at
the first mesh node.  Segment integrals of ``W_p`` are exact up to the
quadrature tolerance; the Hardy mass uses an 8-point Gauss-Legendre rule per
segment, which is accurate on the fine meshes used here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded
from scipy.special import logsumexp

from .inequality import (
    PreconditionError,
    TestFunction,
    boundary_term,
    energy,
    hardy_integral,
)
from .quadrature import adaptive_log_integrals
from .transforms import TransformParams, TransformSet, build_transforms
from .weights import DomainError, Kind, WeightSpec, classify

CLAMP = 1e-30
ARMIJO = 1e-4
MIN_STEP = 2.0 ** -40
STALL_WINDOW = 10
STALL_RTOL = 1e-9
LOG_RANGE = 200.0
INITIAL_EPS = 0.05

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_S = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class Mesh:
    """Strictly increasing nodes on ``[t_floor, eta]``.

    ``grading`` is ``"log"`` (constant node ratio) or ``"geometric"`` (segment
    widths growing by the factor ``ratio`` away from ``t_floor``).
    """

    nodes: np.ndarray
    grading: str = "log"
    ratio: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", t)
        if t.ndim != 1 or t.size < 3:
            raise DomainError("a mesh needs at least 3 nodes")
        if not t[0] > 0:
            raise DomainError("mesh floor must be positive")
        if np.any(np.diff(t) <= 0):
            raise DomainError("mesh nodes must be strictly increasing")
        if self.grading not in ("log", "geometric"):
            raise DomainError(f"unknown grading {self.grading!r}")

    @classmethod
    def log(cls, t_floor: float, eta: float, n: int) -> "Mesh":
        if not 0 < t_floor < eta:
            raise DomainError("need 0 < t_floor < eta")
        nodes = np.geomspace(t_floor, eta, int(n))
        nodes[0], nodes[-1] = t_floor, eta
        return cls(nodes, "log", float((eta / t_floor) ** (1.0 / (n - 1))))

    @classmethod
    def geometric(cls, t_floor: float, eta: float, n: int, ratio: float = 1.01) -> "Mesh":
        if not 0 < t_floor < eta:
            raise DomainError("need 0 < t_floor < eta")
        if not ratio >= 1.0:
            raise DomainError("geometric ratio must be at least 1")
        k = np.arange(int(n) - 1)
        widths = ratio ** k if ratio > 1 else np.ones(k.size)
        nodes = t_floor + (eta - t_floor) * np.concatenate([[0.0], np.cumsum(widths)]) / widths.sum()
        nodes[-1] = eta
        return cls(nodes, "geometric", float(ratio))

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @property
    def t_floor(self) -> float:
        return float(self.nodes[0])

    @property
    def eta(self) -> float:
        return float(self.nodes[-1])

    @property
    def max_node_ratio(self) -> float:
        return float(np.max(self.nodes[1:] / self.nodes[:-1]))


@dataclass(frozen=True)
class Boundary:
    """Condition at ``eta``: free, or pinned to ``value``.

    The quotient is scale invariant, so a nonzero pin only fixes the scale
    of the returned minimiser; ``pinned(0)`` is a genuine Dirichlet condition.
    """

    kind: str = "free_at_eta"
    value: float = 0.0

    @classmethod
    def free(cls) -> "Boundary":
        return cls("free_at_eta")

    @classmethod
    def pinned(cls, value: float) -> "Boundary":
        return cls("pinned", float(value))

    @property
    def dirichlet(self) -> bool:
        return self.kind == "pinned" and self.value == 0.0


@dataclass
class MinimizationResult:
    value: float
    minimizer: TestFunction
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)
    reevaluated: float = float("nan")  # adaptive-quadrature quotient of the minimiser


def rayleigh_quotient(u: TestFunction, tset: TransformSet) -> float:
    """``(energy - s B) / hardy``; at least ``Lambda_p`` for every admissible ``u``."""
    H = hardy_integral(u, tset)
    if not H > 0:
        raise DomainError("the Hardy integral of u vanishes; the quotient is undefined")
    return (energy(u, tset) - tset.sign * boundary_term(u, tset)) / H


# ------------------------------------------------------------- discrete model
def _log_segment_weights(spec: WeightSpec, p: float, nodes: np.ndarray) -> np.ndarray:
    """``log int_{t_i}^{t_{i+1}} w^{p-1} dt`` per segment."""
    x = np.log(nodes)
    res = adaptive_log_integrals(lambda y, _own: (p - 1.0) * spec.log_weight_at_log(y) + y,
                                 x[:-1], x[1:], rtol=1e-13)
    return res.log_values


def representable_floor(tset: TransformSet, limit: float = LOG_RANGE, lowest: float = 1e-12) -> float:
    """Smallest ``t`` above ``lowest`` where weight and potential stay in double range."""
    eta = tset.params.eta
    x = np.linspace(math.log(lowest * eta), math.log(eta), 2000)
    b = tset.evaluate_at_log(x)
    p = tset.params.p
    worst = np.maximum.reduce([np.abs((p - 1.0) * b.log_w), np.abs(b.log_w + p * b.log_f), np.abs(b.log_f)])
    bad = np.nonzero(worst > limit)[0]
    if bad.size == 0:
        return float(math.exp(x[0]))
    return float(math.exp(x[min(bad[-1] + 1, x.size - 1)]))


class _Model:
    """Discrete numerator and denominator with analytic gradients."""

    def __init__(self, tset: TransformSet, mesh: Mesh, boundary: Boundary):
        if mesh.eta > tset.params.eta * (1 + 1e-12) or mesh.eta < tset.params.eta * (1 - 1e-12):
            raise DomainError("mesh must end at eta")
        self.tset, self.mesh, self.boundary = tset, mesh, boundary
        p = self.p = tset.params.p
        t = mesh.nodes
        self.h = np.diff(t)
        self.log_a = _log_segment_weights(tset.spec, p, t)
        tq = t[:-1, None] + self.h[:, None] * _GL_S[None, :]
        bq = tset.evaluate_at_log(np.log(tq))
        self.log_kw = np.log(self.h)[:, None] + np.log(_GL_W)[None, :] - bq.log_w - p * bq.log_f
        worst = max(np.max(np.abs(self.log_a)), np.max(np.abs(self.log_kw)))
        if not np.isfinite(worst) or worst > 600.0:
            raise PreconditionError(
                f"weights leave double range on this mesh; raise t_floor to at least {representable_floor(tset):.3g}"
            )
        self.a = np.exp(self.log_a)
        self.kw = np.exp(self.log_kw)
        self.b = 0.0 if boundary.dirichlet else tset.params.boundary_coefficient * math.exp(
            (1.0 - p) * tset.log_f_eta)
        self.s = tset.sign
        # free nodes: first node pinned at zero, last one too under Dirichlet
        self.free = slice(1, mesh.n - 1 if boundary.dirichlet else mesh.n)

    def full(self, y: np.ndarray) -> np.ndarray:
        u = np.zeros(self.mesh.n)
        u[self.free] = y
        return u

    def parts(self, y: np.ndarray, grad: bool = False):
        p = self.p
        u = self.full(y)
        sl = np.diff(u) / self.h
        asl = np.abs(sl)
        N = float(np.sum(self.a * asl ** p)) - self.s * self.b * abs(u[-1]) ** p
        v = u[:-1, None] * (1.0 - _GL_S)[None, :] + u[1:, None] * _GL_S[None, :]
        av = np.abs(v)
        D = float(np.sum(self.kw * av ** p))
        if not grad:
            return N, D
        dseg = p * self.a * asl ** (p - 1.0) * np.sign(sl) / self.h
        gN = np.zeros_like(u)
        gN[1:] += dseg
        gN[:-1] -= dseg
        gN[-1] -= self.s * self.b * p * abs(u[-1]) ** (p - 1.0) * np.sign(u[-1])
        dv = p * self.kw * av ** (p - 1.0) * np.sign(v)
        gD = np.zeros_like(u)
        gD[:-1] += dv @ (1.0 - _GL_S)
        gD[1:] += dv @ _GL_S
        return N, D, gN[self.free], gD[self.free]

    def quotient(self, y: np.ndarray) -> float:
        N, D = self.parts(y)
        if not D > 0:
            raise DomainError("discrete Hardy mass vanishes")
        return N / D

    def gradient(self, y: np.ndarray) -> Tuple[float, np.ndarray]:
        N, D, gN, gD = self.parts(y, grad=True)
        Q = N / D
        return Q, (gN - Q * gD) / D

    def normalise(self, y: np.ndarray) -> np.ndarray:
        _, D = self.parts(y)
        return y / D ** (1.0 / self.p)

    def preconditioner_solve(self, y: np.ndarray, r: np.ndarray, Q: float = 0.0) -> np.ndarray:
        """Solve with ``H_N - sigma Q H_D`` frozen at ``y`` (tridiagonal).

        The shift ``sigma`` is the largest of 0.9, 0.5, 0 giving a positive
        definite matrix; with ``sigma = 0`` and ``p = 2`` a unit step is one
        inverse-power step.
        """
        p = self.p
        u = self.full(y)
        asl = np.abs(np.diff(u) / self.h)
        # local floors: values may span hundreds of decades
        scale = (np.abs(u[:-1]) + np.abs(u[1:])) / self.h
        floor = np.maximum(1e-8 * scale, 1e-300)
        c = p * (p - 1.0) * self.a * np.maximum(asl, floor) ** (p - 2.0) / self.h ** 2
        n = self.mesh.n
        dN = np.zeros(n)
        dN[:-1] += c
        dN[1:] += c
        oN = -c
        dN[-1] += -self.s * self.b * p * (p - 1.0) * max(abs(u[-1]), 1e-300) ** (p - 2.0)
        v = u[:-1, None] * (1.0 - _GL_S)[None, :] + u[1:, None] * _GL_S[None, :]
        vfloor = np.maximum(1e-8 * (np.abs(u[:-1]) + np.abs(u[1:]))[:, None], 1e-300)
        m = p * (p - 1.0) * self.kw * np.maximum(np.abs(v), vfloor) ** (p - 2.0)
        dD = np.zeros(n)
        dD[:-1] += m @ (1.0 - _GL_S) ** 2
        dD[1:] += m @ _GL_S ** 2
        oD = m @ (_GL_S * (1.0 - _GL_S))
        lo, hi = self.free.start, self.free.stop
        for sigma in (0.9, 0.5, 0.0):
            ab = np.zeros((2, hi - lo))
            ab[0, 1:] = (oN - sigma * Q * oD)[lo:hi - 1]
            ab[1] = (dN - sigma * Q * dD)[lo:hi]
            try:
                return solveh_banded(ab, r)
            except LinAlgError:
                continue
        # energy part alone without the boundary term
        ab = np.zeros((2, hi - lo))
        ab[0, 1:] = oN[lo:hi - 1]
        diag = np.zeros(n)
        diag[:-1] += c
        diag[1:] += c
        ab[1] = diag[lo:hi]
        return solveh_banded(ab, r)


def _initial(tset: TransformSet, mesh: Mesh, boundary: Boundary) -> np.ndarray:
    a = 1.0 / tset.params.p_conj + tset.sign * INITIAL_EPS
    lf = tset.log_f_at_log(np.log(mesh.nodes))
    la = a * lf
    u = np.exp(la - la.max())
    u[0] = 0.0
    if boundary.dirichlet:
        # taper so the profile vanishes at eta
        u *= (mesh.eta - mesh.nodes) / (mesh.eta - mesh.t_floor)
    return u


def _stalled(history: Sequence[float]) -> bool:
    if len(history) <= STALL_WINDOW:
        return False
    old, new = history[-1 - STALL_WINDOW], history[-1]
    return abs(old - new) <= STALL_RTOL * abs(new)


def minimize_quotient(tset: TransformSet, mesh: Mesh, boundary: Union[Boundary, str] = "free_at_eta",
                      max_iter: int = 2000, reevaluate: bool = True) -> MinimizationResult:
    """Preconditioned projected descent on the discrete quotient.

    The search direction solves with a shifted Hessian frozen at the current
    iterate (shifted inverse iteration when ``p = 2``).
    Each trial point is clamped to ``u >= CLAMP`` relative to the starting
    profile and rescaled to unit
    Hardy mass; steps are accepted under an Armijo condition, halving from 1.
    """
    if isinstance(boundary, str):
        boundary = Boundary(boundary)
    model = _Model(tset, mesh, boundary)

    y0 = _initial(tset, mesh, boundary)[model.free]
    # clamp relative to the starting profile, which may span many decades
    ref = y0 / y0.max()

    def project(z):
        floor = CLAMP * ref * np.max(z / ref)
        return model.normalise(np.maximum(z, floor)), z <= floor

    y, clamped = project(y0)
    Q, g = model.gradient(y)
    history = [Q]
    converged = False
    it = 0

    while it < max_iter:
        it += 1
        d = -model.preconditioner_solve(y, g, Q)
        slope = float(g @ d)
        if slope >= 0:
            d, slope = -g, -float(g @ g)
        step = 1.0
        accepted = False
        while step >= MIN_STEP:
            y_new, c_new = project(y + step * d)
            Q_new = model.quotient(y_new)
            if Q_new <= Q + ARMIJO * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # no descent left at working precision
            converged = _stalled(history) or len(history) > 1 and abs(history[-2] - Q) <= STALL_RTOL * Q
            break
        y, clamped = y_new, c_new
        Q, g = model.gradient(y)
        history.append(Q)
        if _stalled(history):
            converged = True
            break

    # drop the clamp before the final evaluation
    u = model.full(np.where(clamped, 0.0, y))
    Q_final = model.quotient(u[model.free])
    if Q_final <= history[-1]:
        history.append(Q_final)
    if boundary.kind == "pinned" and boundary.value != 0.0 and u[-1] != 0.0:
        u *= boundary.value / u[-1]
    tf = TestFunction(mesh.nodes, u, support_floor=mesh.t_floor, label="quotient minimiser")
    re = rayleigh_quotient(tf, tset) if reevaluate else float("nan")
    return MinimizationResult(history[-1], tf, it, converged, history, re)


def gradient_check(tset: TransformSet, mesh: Mesh, rng: np.random.Generator, points: int = 20,
                   boundary: Boundary = Boundary()) -> float:
    """Worst relative gap between analytic and central-difference directional derivatives.

    Uses the fourth-order five-point stencil.
    """
    model = _Model(tset, mesh, boundary)
    base = np.maximum(_initial(tset, mesh, boundary)[model.free], 1e-300)
    steps = np.diff(np.log(base))
    worst = 0.0
    for _ in range(points):
        # rescale log-increments: slopes keep their sign and stay clear of zero
        logs = np.concatenate([[0.0], np.cumsum(steps * rng.uniform(0.5, 1.5, steps.size))])
        y = model.normalise(base[-1] * np.exp(logs - logs[-1]))
        d = rng.standard_normal(y.size) * y
        _, g = model.gradient(y)
        # keep the stencil clear of slope sign changes, where |slope|^(p-1) kinks
        sl = np.diff(model.full(y)) / model.h
        dsl = np.abs(np.diff(model.full(d)) / model.h)
        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.nanmin(np.where(dsl > 0, np.abs(sl) / dsl, np.inf))
        h = float(np.clip(0.01 * room, 1e-8, 1e-4))
        q = [model.quotient(y + k * h * d) for k in (-2, -1, 1, 2)]
        fd = (8.0 * (q[2] - q[1]) - (q[3] - q[0])) / (12.0 * h)
        an = float(g @ d)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-300))
    return worst


# ------------------------------------------------------- infimum-zero witness
@dataclass(frozen=True)
class PinnedMinimum:
    t_floor: float
    log_minimum: float
    log_feasible_energy: float  # closed-form energy of the ramp family at the same floor

    @property
    def minimum(self) -> float:
        return math.exp(self.log_minimum)

    @property
    def feasible_energy(self) -> float:
        return math.exp(self.log_feasible_energy)


def log_pinned_minimum(spec: WeightSpec, mesh: Mesh) -> float:
    """Log of the least discrete energy with ``u(t_floor) = 0`` and ``u(eta) = 1``.

    On a piecewise-linear space the minimiser is explicit: segment increments
    are proportional to ``(h_i**p / a_i)**(1/(p-1))`` with ``a_i`` the
    segment integral of ``W_p``.
    """
    p = spec.p
    h = np.diff(mesh.nodes)
    la = _log_segment_weights(spec, p, mesh.nodes)
    return float((1.0 - p) * logsumexp((p * np.log(h) - la) / (p - 1.0)))


def infimum_zero_table(spec: WeightSpec, params: TransformParams, meshes: Sequence[Mesh]) -> List[PinnedMinimum]:
    from .extremals import vanishing_family

    wc = classify(spec, params.eta, mu=params.mu, admissibility=False)
    if wc.kind is not Kind.P:
        raise PreconditionError("the infimum-zero phenomenon needs a P-class weight (w in P(R_+))")
    tset = build_transforms(spec, params, wc)
    rows = []
    for mesh in meshes:
        if abs(mesh.eta - params.eta) > 1e-12 * params.eta:
            raise DomainError("mesh must end at eta")
        lm = log_pinned_minimum(spec, mesh)
        try:
            feas = vanishing_family(tset, mesh.t_floor).log_energy_closed_form
        except PreconditionError:
            feas = float("nan")
        rows.append(PinnedMinimum(mesh.t_floor, lm, float(feas)))
    return rows


def infimum_zero_demo(spec: WeightSpec, params: TransformParams, mesh_seq: Sequence[Mesh]) -> List[float]:
    """Pinned minima along ``mesh_seq``; they decrease to zero for P-class weights."""
    return [r.minimum for r in infimum_zero_table(spec, params, mesh_seq)]
