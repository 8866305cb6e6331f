"""End-to-end acceptance checks.

Each criterion prints one ``CRITERION n: PASS|FAIL`` line.  Runtime budgets
are part of the pass condition.  Run standalone with
``python3 tests/test_acceptance.py`` or through pytest.
"""
from __future__ import annotations

import math
import sys
import time
from typing import Callable, Dict, List, Tuple

import numpy as np
import pytest

from weighted_hardy.extremals import sharpness_sweep
from weighted_hardy.identities import (
    IDENTITIES,
    boundary_integral_check,
    elementary_lower_bound,
    ground_state_check,
    substitution_frame,
    verify_pointwise_identity,
    weighted_t_bound_check,
)
from weighted_hardy.inequality import (
    monotone_comparison,
    random_test_function,
    report_remainder,
    report_sharp,
)
from weighted_hardy.transforms import TransformParams, build_transforms, eval_transform, power_coupled_mu
from weighted_hardy.variational import (
    Mesh,
    gradient_check,
    minimize_quotient,
    log_pinned_minimum,
    representable_floor,
)
from weighted_hardy.weights import BUILTIN_NAMES, Kind, WeightSpec, builtin_weight, classify

P_VALUES = (1.5, 2.0, 3.0)
EPS_SWEEP = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 0.0005, 0.0002, 0.0001]

Outcome = Tuple[bool, str]


def _tset(name: str, p: float, eta: float = 1.0, mu: float = 1.0, admissibility: bool = False):
    spec = builtin_weight(name, p)
    wc = classify(spec, eta, mu=mu, admissibility=admissibility)
    return build_transforms(spec, TransformParams(p, eta, mu), wc)


# -------------------------------------------------------------- criteria
def criterion_1() -> Outcome:
    # expected verdicts at p = 2: Q iff 1/w is integrable at the origin
    cases = [(WeightSpec.power(a, 2.0), kind, None) for a, kind in
             ((0.25, "Q"), (0.5, "P"), (0.75, "P"), (1.0, "P"))]
    cases += [
        (WeightSpec.exp_inv_pow(-1, 1.0, 2.0), "P", False),
        (WeightSpec.exp_inv_pow(1, 1.0, 2.0), "Q", False),
        (WeightSpec.exp_inv_pow(-1, 0.5, 2.0), "P", True),
        (WeightSpec.exp_inv_pow(1, 0.5, 2.0), "Q", True),
        (WeightSpec.power_times_exp(1.0, -1, 1.0, 2.0), "P", None),
        (WeightSpec.power_times_exp(1.0, 1, 1.0, 2.0), "Q", None),
    ]
    bad = []
    for spec, kind, adm in cases:
        wc = classify(spec, 1.0)
        if wc.kind.value != kind or (adm is not None and wc.admissible is not adm):
            bad.append(f"{spec.label}: got {wc.summary()}")
    return not bad, "; ".join(bad) or f"{len(cases)} weights classified as expected"


def criterion_2() -> Outcome:
    t = np.geomspace(1e-3, 1.0, 200)
    worst = 0.0
    for p in P_VALUES:
        pc = p / (p - 1.0)
        for alpha in (0.8, 1.0, 1.5):
            k = alpha * pc
            if k <= 1.0:
                continue
            mu = power_coupled_mu(alpha, p, 1.0)
            ts = build_transforms(WeightSpec.power(alpha, p), TransformParams(p, 1.0, mu), mode="quadrature")
            F = eval_transform(ts, "F", t)
            G = eval_transform(ts, "G", t)
            worst = max(worst, float(np.max(np.abs(F / (t / (k - 1.0)) - 1.0))),
                        float(np.max(np.abs(G / (mu + (k - 1.0) * np.log(1.0 / t)) - 1.0))))
    return worst <= 1e-8, f"max relative error {worst:.3e}"


def criterion_3() -> Outcome:
    errs = []
    for name in ("exp_neg_inv", "exp_pos_inv"):
        ts = _tset(name, 2.0)
        errs.append(abs(float(eval_transform(ts, "F", 1e-3)) / 1e-6 - 1.0))
    return max(errs) <= 0.05, "|F/t^2 - 1| = " + ", ".join(f"{e:.3e}" for e in errs)


def criterion_4() -> Outcome:
    bad = []
    rows_checked = 0
    for p in P_VALUES:
        pc = p / (p - 1.0)
        for name in BUILTIN_NAMES:
            for r in sharpness_sweep(_tset(name, p), EPS_SWEEP, numeric_min_eps=1e-3):
                rows_checked += 1
                if 1.0 - r.ratio > 3.0 * r.eps * p * pc:
                    bad.append(f"{name} p={p} eps={r.eps}: 1-ratio={1 - r.ratio:.3g}")
                if r.convexity_gap < 0:
                    bad.append(f"{name} p={p} eps={r.eps}: convexity gap {r.convexity_gap:.3g}")
                if r.eps >= 1e-3 and not (r.discrepancy <= 1e-4):
                    bad.append(f"{name} p={p} eps={r.eps}: numeric/analytic gap {r.discrepancy:.3g}")
    return not bad, "; ".join(bad[:5]) or f"{rows_checked} rows"


def criterion_5() -> Outcome:
    rng = np.random.default_rng(20240501)
    failures, worst = 0, 0.0
    for p in P_VALUES:
        for name in BUILTIN_NAMES:
            ts = _tset(name, p)
            for _ in range(100):
                u = random_test_function(rng, 1.0)
                for rep in (report_sharp(u, ts), report_remainder(u, ts)):
                    failures += not rep.passed
                    worst = min(worst, rep.slack / (rep.tolerance_used / 1e-6))
    return failures == 0, f"{failures} failures over 3600 reports, worst scaled slack {worst:.3e}"


def criterion_6() -> Outcome:
    rng = np.random.default_rng(7)
    worst_id, worst_bd, failures, n = 0.0, 0.0, 0, 0
    for p in P_VALUES:
        for name in BUILTIN_NAMES:
            ts = _tset(name, p, admissibility=True)
            for _ in range(5):
                u = random_test_function(rng, 1.0)
                fr = substitution_frame(u, ts, M=2.0)
                for ident in IDENTITIES:
                    worst_id = max(worst_id, verify_pointwise_identity(fr, ident).worst)
                worst_bd = max(worst_bd, boundary_integral_check(fr).residual)
                reps = [ground_state_check(fr)]
                if ts.weight_class.admissible:
                    reps.append(weighted_t_bound_check(u, ts))
                for rep in reps:
                    n += 1
                    failures += not rep.passed
    ok = worst_id <= 1e-8 and worst_bd <= 1e-6 and failures == 0
    return ok, f"identity residual {worst_id:.2e}, boundary residual {worst_bd:.2e}, {failures}/{n} bound failures"


def criterion_7() -> Outcome:
    c2 = elementary_lower_bound(2.0, q=2.0).c_estimate
    others = {
        "p=3,q=2": elementary_lower_bound(3.0, q=2.0).c_estimate,
        "p=3,q=3": elementary_lower_bound(3.0, q=3.0).c_estimate,
        "p=1.5,M=1": elementary_lower_bound(1.5, M=1.0).c_estimate,
        "p=1.5,M=2": elementary_lower_bound(1.5, M=2.0).c_estimate,
    }
    ok = abs(c2 - 1.0) <= 1e-6 and all(v > 0 for v in others.values())
    return ok, f"c(2)={c2:.12f}, " + ", ".join(f"{k}: {v:.6f}" for k, v in others.items())


def criterion_8() -> Outcome:
    spec = builtin_weight("t2", 2.0)
    mins = [math.exp(log_pinned_minimum(spec, Mesh.log(tf, 1.0, 2 ** 10))) for tf in (1e-2, 1e-3, 1e-4)]
    bound = 1.0 / (1.0 / 1e-3 - 2.0)
    ok = mins[1] <= 1.01e-3 and mins[0] > mins[1] > mins[2]
    return ok, "minima " + ", ".join(f"{m:.6e}" for m in mins) + f" (feasible value {bound:.6e})"


def criterion_9() -> Outcome:
    ts = _tset("constant", 2.0)
    r = minimize_quotient(ts, Mesh.log(1e-6, 1.0, 2 ** 12))
    notes = [f"w=1: {r.value:.6f}"]
    ok = 0.25 <= r.value <= 0.30 and r.converged
    rng = np.random.default_rng(3)
    worst_grad = 0.0
    for p in P_VALUES:
        for name in BUILTIN_NAMES:
            ts = _tset(name, p)
            mesh = Mesh.log(max(1e-6, representable_floor(ts)), 1.0, 2 ** 10)
            res = minimize_quotient(ts, mesh)
            lam = ts.params.hardy_constant
            if not (res.value >= lam - 1e-9):
                ok = False
                notes.append(f"{name} p={p}: {res.value:.9f} < {lam:.9f}")
            worst_grad = max(worst_grad, gradient_check(ts, mesh, rng, points=20))
    ok = ok and worst_grad <= 1e-6
    notes.append(f"gradient mismatch {worst_grad:.2e}")
    return ok, "; ".join(notes)


def criterion_10() -> Outcome:
    rng = np.random.default_rng(11)
    eta = 1.0
    profiles: Dict[str, Callable] = {
        "1": lambda t: np.ones_like(np.asarray(t, dtype=float)),
        "t/eta": lambda t: np.minimum(np.asarray(t, dtype=float) / eta, 1.0),
        "t^2/eta^2": lambda t: np.minimum(np.asarray(t, dtype=float) / eta, 1.0) ** 2,
    }
    failures, worst_const = 0, 0.0
    q_weights = [n for n in BUILTIN_NAMES if _tset(n, 2.0).weight_class.kind is Kind.Q]
    for name in q_weights:
        ts = _tset(name, 2.0)
        for _ in range(50):
            u = random_test_function(rng, eta)
            for key, prof in profiles.items():
                rep = monotone_comparison(u, ts, prof)
                failures += not rep.passed
                if key == "1":
                    worst_const = max(worst_const, abs(rep.slack))
    ok = failures == 0 and worst_const <= 1e-10
    return ok, f"weights {q_weights}: {failures} failures, |slack| for f=1 at most {worst_const:.1e}"


CRITERIA: List[Tuple[int, Callable[[], Outcome], float]] = [
    (1, criterion_1, 5.0),
    (2, criterion_2, 10.0),
    (3, criterion_3, 5.0),
    (4, criterion_4, 60.0),
    (5, criterion_5, 300.0),
    (6, criterion_6, 120.0),
    (7, criterion_7, 10.0),
    (8, criterion_8, 60.0),
    (9, criterion_9, 300.0),
    (10, criterion_10, 60.0),
]


# collected for the terminal summary; pytest captures output during tests
REPORT_LINES: List[str] = []


def run_criterion(n: int, fn: Callable[[], Outcome], budget: float) -> bool:
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    within = elapsed <= budget
    status = "PASS" if ok and within else "FAIL"
    line = f"CRITERION {n}: {status} ({elapsed:.1f}s of {budget:.0f}s) {detail}"
    if not within:
        line += " [over time budget]"
    REPORT_LINES.append(line)
    if __name__ == "__main__":
        print(line, flush=True)
    return ok and within


@pytest.mark.parametrize("n,fn,budget", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(n, fn, budget):
    assert run_criterion(n, fn, budget)


if __name__ == "__main__":
    results = [run_criterion(*c) for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
