"""Command-line front end.

Usage::

    weighted-hardy COMMAND [--config FILE] [--out DIR] [--seed N] [--tol X]

Commands: classify, transforms, verify, special, identities, sharpness,
minimize, report.  Exit status: 0 all checks pass, 1 a check failed beyond
tolerance, 2 usage or configuration error, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .extremals import sharpness_sweep
from .identities import (
    IDENTITIES,
    assembled_check,
    boundary_integral_check,
    elementary_lower_bound,
    ground_state_check,
    pointwise_derivative_bound,
    substitution_frame,
    verify_pointwise_identity,
    weighted_t_bound_check,
)
from .inequality import (
    DEFAULT_TOL_FACTOR,
    SPECIAL_CASES,
    DivergenceError,
    InequalityReport,
    PreconditionError,
    SpecialCaseParams,
    TestFunction,
    monotone_comparison,
    random_test_function,
    remainder_constants,
    report_remainder,
    report_sharp,
    report_t_weighted,
    special_case_check,
)
from .quadrature import QuadratureError
from .transforms import TransformParams, build_transforms
from .variational import Boundary, Mesh, minimize_quotient, representable_floor
from .weights import BUILTIN_NAMES, DomainError, Family, WeightSpec, builtin_weight, classify

COMMANDS = ("classify", "transforms", "verify", "special", "identities", "sharpness", "minimize", "report")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

# column orders of every CSV the tool writes
COLUMNS = {
    "transforms.csv": ["t", "f", "F", "G", "g", "mode"],
    "verify.csv": ["function", "inequality_id", "lhs", "rhs", "slack", "tolerance", "passed", "flags", "terms"],
    "special.csv": ["function", "inequality_id", "lhs", "rhs", "slack", "tolerance", "passed", "flags", "terms"],
    "identities.csv": ["function", "check", "value", "passed"],
    "sharpness.csv": ["ε", "lhs", "rhs", "ratio", "convexity_gap", "analytic_ratio", "discrepancy", "flags"],
    "history.csv": ["iteration", "value"],
    "minimizer.csv": ["t", "u"],
}

_WEIGHT_KEYS = {"preset", "family", "alpha", "sign", "beta"}
_PARAM_KEYS = {"p", "eta", "mu", "M", "R", "alpha", "C0", "C1", "L"}
_RUN_KEYS = {"command", "case", "n_functions", "corpus", "eps", "numeric_min_eps", "nodes", "t_floor",
             "boundary", "n_points", "t_min", "tol", "seed", "out", "max_iter"}


class ConfigError(ValueError):
    def __init__(self, problems: Sequence[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


@dataclass
class RunConfig:
    weight: Dict[str, Any]
    params: Dict[str, float]
    run: Dict[str, Any]
    raw: Dict[str, Any] = field(default_factory=dict)

    @property
    def command(self) -> str:
        return self.run["command"]

    @property
    def p(self) -> float:
        return self.params["p"]

    def spec(self) -> WeightSpec:
        w = self.weight
        if "preset" in w:
            return builtin_weight(w["preset"], self.p)
        return WeightSpec(Family(w["family"]), self.p, alpha=float(w.get("alpha", 0.0)),
                          sign=int(w.get("sign", 1)), beta=float(w.get("beta", 1.0)))

    def transform_params(self) -> TransformParams:
        return TransformParams(self.p, self.params["eta"], self.params["mu"])

    def echo(self) -> str:
        out = []
        for name, table in (("weight", self.weight), ("params", self.params), ("run", self.run)):
            out.append(f"[{name}]")
            for k in sorted(table):
                out.append(f"{k} = {_toml_value(table[k])}")
            out.append("")
        return "\n".join(out)


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _number(table: Dict[str, Any], key: str, problems: List[str], where: str) -> Optional[float]:
    if key not in table:
        return None
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{where}.{key} must be a number, got {v!r}")
        return None
    return float(v)


def parse_config(text: str, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Parse and validate a configuration; every violation is reported at once."""
    try:
        raw = tomllib.loads(text) if text.strip() else {}
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"config is not valid key-value text: {exc}"]) from None
    problems: List[str] = []
    for sec in raw:
        if sec not in ("weight", "params", "run"):
            problems.append(f"unknown section [{sec}]; expected [weight], [params], [run]")
    w_in = dict(raw.get("weight", {}))
    p_in = dict(raw.get("params", {}))
    r_in = dict(raw.get("run", {}))
    for name, table, keys in (("weight", w_in, _WEIGHT_KEYS), ("params", p_in, _PARAM_KEYS), ("run", r_in, _RUN_KEYS)):
        if not isinstance(table, dict):
            problems.append(f"[{name}] must be a table")
            continue
        for k in table:
            if k not in keys:
                problems.append(f"unknown key {name}.{k}")
    for k, v in (overrides or {}).items():
        if v is not None:
            r_in[k] = v

    # weight
    weight: Dict[str, Any] = {}
    if "preset" in w_in:
        if w_in["preset"] not in BUILTIN_NAMES:
            problems.append(f"unknown preset {w_in['preset']!r}; expected one of {', '.join(BUILTIN_NAMES)}")
        weight["preset"] = w_in["preset"]
    else:
        fam = w_in.get("family", "constant")
        valid = [f.value for f in Family if f is not Family.USER_TABLE]
        if fam not in valid:
            problems.append(f"unknown weight family {fam!r}; expected one of {', '.join(valid)}")
        weight["family"] = fam
        for k in ("alpha", "beta"):
            v = _number(w_in, k, problems, "weight")
            if v is not None:
                weight[k] = v
        if "sign" in w_in:
            if w_in["sign"] not in (-1, 1):
                problems.append("weight.sign must be +1 or -1")
            weight["sign"] = int(w_in["sign"]) if w_in["sign"] in (-1, 1) else 1
        if fam in ("exp_inv_pow", "power_times_exp") and not weight.get("beta", 1.0) > 0:
            problems.append("weight.beta must satisfy beta>0")

    # params
    params: Dict[str, float] = {"p": 2.0, "eta": 1.0, "mu": 1.0}
    for k in _PARAM_KEYS:
        v = _number(p_in, k, problems, "params")
        if v is not None:
            params[k] = v
    p = params["p"]
    if not (p > 1.0 and math.isfinite(p)):
        problems.append(f"params.p={p:g} violates the hypothesis 1<p<\\infty")
    if not (params["eta"] > 0 and math.isfinite(params["eta"])):
        problems.append(f"params.eta={params['eta']:g} violates the hypothesis \\eta>0")
    if not (params["mu"] > 0 and math.isfinite(params["mu"])):
        problems.append(f"params.mu={params['mu']:g} violates the hypothesis \\mu>0")
    if "M" in params and not params["M"] >= 1.0:
        problems.append(f"params.M={params['M']:g} violates the hypothesis M\\ge 1")

    # run
    run: Dict[str, Any] = {
        "n_functions": 100, "seed": 0, "tol": DEFAULT_TOL_FACTOR, "out": "out", "nodes": 1024,
        "boundary": "free_at_eta", "n_points": 200, "numeric_min_eps": 1e-3, "max_iter": 2000,
        "eps": [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 0.0005, 0.0002, 0.0001],
    }
    run.update(r_in)
    cmd = run.get("command")
    if cmd not in COMMANDS:
        problems.append(f"unknown command {cmd!r}; expected one of {', '.join(COMMANDS)}")
    if not isinstance(run["seed"], int) or isinstance(run["seed"], bool) or run["seed"] < 0:
        problems.append("run.seed must be a non-negative integer")
    if not isinstance(run["tol"], (int, float)) or not run["tol"] > 0:
        problems.append("run.tol must be positive")
    for k in ("n_functions", "nodes", "n_points", "max_iter"):
        if not isinstance(run[k], int) or isinstance(run[k], bool) or run[k] < 0:
            problems.append(f"run.{k} must be a non-negative integer")
    if cmd == "special":
        case = run.get("case")
        if case not in SPECIAL_CASES:
            problems.append(f"run.case must be one of {', '.join(SPECIAL_CASES)}; got {case!r}")
        crit = 1.0 - 1.0 / p if p > 1 else float("nan")
        alpha = params.get("alpha", 0.0)
        if case == "power_critical" and not params.get("R", math.e ** 2) > math.e:
            problems.append(f"params.R={params.get('R'):g} violates the hypothesis R>e")
        if case == "power_above" and not alpha > crit:
            problems.append(f"params.alpha={alpha:g} violates the hypothesis \\alpha>1/p' (= {crit:g})")
        if case == "power_below" and not alpha < crit:
            problems.append(f"params.alpha={alpha:g} violates the hypothesis \\alpha<1/p' (= {crit:g})")
    if cmd == "minimize":
        b = run["boundary"]
        if not (b in ("free_at_eta", "pinned") or (isinstance(b, str) and b.startswith("pinned:"))):
            problems.append("run.boundary must be free_at_eta, pinned or pinned:<value>")
        if "t_floor" in run and not (isinstance(run["t_floor"], (int, float)) and 0 < run["t_floor"] < params["eta"]):
            problems.append("run.t_floor must satisfy 0<t_floor<\\eta")
        if run["nodes"] < 3:
            problems.append("run.nodes must be at least 3")
    eps = run.get("eps")
    if cmd == "sharpness":
        if not isinstance(eps, list) or not eps or not all(isinstance(e, (int, float)) and e > 0 for e in eps):
            problems.append("run.eps must be a non-empty list of positive numbers")
        elif any(b >= a for a, b in zip(eps, eps[1:])):
            problems.append("run.eps must be strictly decreasing")
    if problems:
        raise ConfigError(problems)
    return RunConfig(weight, params, run, raw)


# ------------------------------------------------------------------ corpus
def read_corpus(text: str, eta: float) -> List[TestFunction]:
    """Blocks of ``t,u`` rows separated by blank lines; ``#`` starts a comment."""
    blocks: List[List[Tuple[float, float]]] = [[]]
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            if blocks[-1]:
                blocks.append([])
            continue
        cells = [c.strip() for c in line.split(",")]
        if cells[0].lower() == "t":
            continue
        if len(cells) != 2:
            raise ConfigError([f"corpus row {line!r} must have exactly two columns t,u"])
        blocks[-1].append((float(cells[0]), float(cells[1])))
    out = []
    for k, rows in enumerate(b for b in blocks if b):
        t = np.array([r[0] for r in rows])
        u = np.array([r[1] for r in rows])
        if t[-1] > eta * (1 + 1e-12):
            raise ConfigError([f"corpus function {k} extends beyond eta"])
        try:
            floor = float(t[0]) if u[0] == 0.0 else 0.0
            out.append(TestFunction(t, u, support_floor=floor, label=f"corpus[{k}]"))
        except DomainError as exc:
            raise ConfigError([f"corpus function {k}: {exc}"]) from None
    return out


def _corpus(cfg: RunConfig) -> List[TestFunction]:
    if cfg.run.get("corpus"):
        path = Path(cfg.run["corpus"])
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError([f"cannot read corpus {path}: {exc}"]) from None
        funcs = read_corpus(text, cfg.params["eta"])
    else:
        rng = np.random.default_rng(cfg.run["seed"])
        funcs = [random_test_function(rng, cfg.params["eta"]) for _ in range(cfg.run["n_functions"])]
    if not funcs:
        raise ConfigError(["the test-function corpus is empty"])
    return funcs


# ----------------------------------------------------------------- results
@dataclass
class Results:
    tables: Dict[str, List[List[Any]]] = field(default_factory=dict)
    summary: List[str] = field(default_factory=list)
    failed: bool = False
    nonconverged: bool = False
    stdout: List[str] = field(default_factory=list)


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _terms(rep: InequalityReport) -> str:
    items = [f"lhs.{k}={_fmt(v)}" for k, v in rep.lhs_terms.items()]
    items += [f"rhs.{k}={_fmt(v)}" for k, v in rep.rhs_terms.items()]
    return ";".join(items)


def _report_row(fid: Any, rep: InequalityReport) -> List[Any]:
    return [fid, rep.inequality_id, rep.lhs, rep.rhs, rep.slack, rep.tolerance_used, rep.passed,
            "|".join(rep.flags), _terms(rep)]


def emit_report(res: Results, out: Path) -> None:
    """Write every table with its documented columns plus ``summary.txt``."""
    out.mkdir(parents=True, exist_ok=True)
    for name, rows in res.tables.items():
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS[name])
        for r in rows:
            w.writerow([_fmt(c) for c in r])
        (out / name).write_text(buf.getvalue(), encoding="utf-8")
    (out / "summary.txt").write_text("\n".join(res.summary) + ("\n" if res.summary else ""), encoding="utf-8")


def _summarise(res: Results, table: str, id_col: int, pass_col: int) -> None:
    rows = res.tables.get(table, [])
    counts: Dict[str, List[int]] = {}
    for r in rows:
        key = str(r[id_col])
        c = counts.setdefault(key, [0, 0])
        c[0] += 1
        if not bool(r[pass_col]):
            c[1] += 1
    for key, (n, bad) in counts.items():
        res.summary.append(f"{table}: {key}: {n} rows, {bad} failed")


# ---------------------------------------------------------------- commands
def _tset(cfg: RunConfig, admissibility: bool = False):
    spec = cfg.spec()
    prm = cfg.transform_params()
    wc = classify(spec, prm.eta, mu=prm.mu, admissibility=admissibility)
    return build_transforms(spec, prm, wc)


def cmd_classify(cfg: RunConfig, res: Results) -> None:
    spec = cfg.spec()
    wc = classify(spec, cfg.params["eta"], mu=cfg.params["mu"])
    res.stdout.append(wc.summary())
    res.summary.append(f"classification of w = {spec.label}: {wc.summary()}")
    if wc.admissibility_constant_K is not None:
        res.summary.append(f"admissibility witness K = {_fmt(wc.admissibility_constant_K)}")


def cmd_transforms(cfg: RunConfig, res: Results) -> None:
    tset = _tset(cfg)
    eta = cfg.params["eta"]
    t_min = float(cfg.run.get("t_min", 1e-3 * eta))
    t = np.geomspace(t_min, eta, cfg.run["n_points"])
    tab = tset.table(t)
    mode = tset.mode["f"]
    res.tables["transforms.csv"] = [[ti, *row, mode] for ti, row in zip(t, tab)]
    res.summary.append(f"transforms.csv: transform quadruple at {t.size} points, mode {mode}")


def cmd_verify(cfg: RunConfig, res: Results) -> None:
    tset = _tset(cfg, admissibility=True)
    funcs = _corpus(cfg)
    tol = cfg.run["tol"]
    M = cfg.params.get("M")
    rows = []
    adm = bool(tset.weight_class.admissible)
    use_c1 = adm and "C1" in cfg.params
    if use_c1:
        k = remainder_constants(tset, M)
        C0 = cfg.params.get("C0", k["C"])
        L = cfg.params.get("L", k["L"])
    for i, u in enumerate(funcs):
        reps = [report_sharp(u, tset, tol), report_remainder(u, tset, M, tol_factor=tol)]
        if tset.weight_class.kind.value == "Q":
            eta = cfg.params["eta"]
            reps.append(monotone_comparison(u, tset, lambda t: np.minimum(np.asarray(t) / eta, 1.0), tol))
        if use_c1:
            reps.append(report_t_weighted(u, tset, C0, cfg.params["C1"], L, tol))
        for rep in reps:
            rows.append(_report_row(i, rep))
            res.failed |= not rep.passed
    res.tables["verify.csv"] = rows
    _summarise(res, "verify.csv", 1, 6)


def cmd_special(cfg: RunConfig, res: Results) -> None:
    prm = SpecialCaseParams(cfg.p, cfg.params["eta"], alpha=cfg.params.get("alpha", 0.0),
                            mu=cfg.params["mu"], R=cfg.params.get("R", math.e ** 2))
    funcs = _corpus(cfg)
    rows = []
    worst = 0.0
    for i, u in enumerate(funcs):
        rep = special_case_check(cfg.run["case"], u, prm, tol_factor=cfg.run["tol"])
        rows.append(_report_row(i, rep))
        worst = max(worst, rep.extras.get("cross_check", 0.0))
        res.failed |= not rep.passed
    if worst > 1e-8:
        res.failed = True
    res.tables["special.csv"] = rows
    _summarise(res, "special.csv", 1, 6)
    res.summary.append(f"special.csv: largest relative gap to the general inequality {_fmt(worst)}")


def cmd_identities(cfg: RunConfig, res: Results) -> None:
    tset = _tset(cfg, admissibility=True)
    funcs = _corpus(cfg)
    M = cfg.params.get("M", 2.0)
    rows: List[List[Any]] = []
    p = cfg.p
    if p >= 2:
        ec = elementary_lower_bound(p, q=2.0)
    else:
        ec = elementary_lower_bound(p, M=M)
    rows.append(["-", "elementary_constant", ec.c_estimate, ec.c_estimate > 0])
    for i, u in enumerate(funcs):
        fr = substitution_frame(u, tset, M=M)
        for name in IDENTITIES:
            r = verify_pointwise_identity(fr, name)
            rows.append([i, name, r.worst, r.worst <= 1e-8])
        bc = boundary_integral_check(fr)
        rows.append([i, "boundary_integral", bc.residual, bc.residual <= 1e-6])
        for rep in (ground_state_check(fr), assembled_check(fr)):
            rows.append([i, rep.inequality_id, rep.slack, rep.passed])
        pb = pointwise_derivative_bound(fr)
        rows.append([i, "pointwise_split_bound", pb.worst_ratio, pb.passed])
        if tset.weight_class.admissible:
            rep = weighted_t_bound_check(u, tset)
            rows.append([i, rep.inequality_id, rep.slack, rep.passed])
    for r in rows:
        res.failed |= not r[3]
    res.tables["identities.csv"] = rows
    _summarise(res, "identities.csv", 1, 3)


def cmd_sharpness(cfg: RunConfig, res: Results) -> None:
    tset = _tset(cfg)
    sweep = sharpness_sweep(tset, cfg.run["eps"], numeric_min_eps=cfg.run["numeric_min_eps"])
    rows = []
    for r in sweep:
        rows.append([r.eps, r.lhs, r.rhs, r.ratio, r.convexity_gap, r.analytic_ratio, r.discrepancy,
                     "|".join(r.flags)])
        res.failed |= r.convexity_gap < 0 or "numeric-analytic-mismatch" in r.flags
    res.tables["sharpness.csv"] = rows
    res.summary.append(f"sharpness.csv: {len(rows)} rows of the extremal ratio for w = {tset.spec.label}")


def cmd_minimize(cfg: RunConfig, res: Results) -> None:
    tset = _tset(cfg)
    eta = cfg.params["eta"]
    floor = cfg.run.get("t_floor") or max(1e-6 * eta, representable_floor(tset))
    b = cfg.run["boundary"]
    if b == "free_at_eta":
        bnd = Boundary.free()
    elif b == "pinned":
        bnd = Boundary.pinned(0.0)
    else:
        bnd = Boundary.pinned(float(b.split(":", 1)[1]))
    mesh = Mesh.log(float(floor), eta, cfg.run["nodes"])
    r = minimize_quotient(tset, mesh, bnd, max_iter=cfg.run["max_iter"])
    res.tables["history.csv"] = [[k, v] for k, v in enumerate(r.history)]
    res.tables["minimizer.csv"] = [[t, u] for t, u in zip(r.minimizer.grid, r.minimizer.values)]
    lam = tset.params.hardy_constant
    res.summary.append(f"minimum_quotient: value {_fmt(r.value)} (hardy constant {_fmt(lam)}), "
                       f"{r.iterations} iterations, converged={r.converged}, t_floor={_fmt(float(floor))}")
    res.stdout.append(_fmt(r.value))
    res.nonconverged |= not r.converged
    res.failed |= r.value < lam - 1e-9


def cmd_report(cfg: RunConfig, res: Results) -> None:
    for fn in (cmd_classify, cmd_transforms, cmd_verify, cmd_identities, cmd_sharpness):
        fn(cfg, res)


_DISPATCH = {
    "classify": cmd_classify, "transforms": cmd_transforms, "verify": cmd_verify, "special": cmd_special,
    "identities": cmd_identities, "sharpness": cmd_sharpness, "minimize": cmd_minimize, "report": cmd_report,
}


def _manifest(cfg: RunConfig, code: int, wall: float) -> str:
    import scipy

    lines = [
        f"command = {cfg.command}",
        f"exit_code = {code}",
        f"seed = {cfg.run['seed']}",
        f"wall_time_s = {wall:.3f}",
        f"weighted_hardy = {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"scipy = {scipy.__version__}",
        "",
        "# effective configuration",
        cfg.echo(),
    ]
    return "\n".join(lines)


def run_command(cfg: RunConfig, err=None) -> int:
    """Dispatch ``cfg.command``, write outputs and the manifest; return the exit code."""
    err = err or sys.stderr
    start = time.perf_counter()
    res = Results()
    out = Path(cfg.run["out"])
    try:
        _DISPATCH[cfg.command](cfg, res)
        code = EXIT_NUMERIC if res.nonconverged else (EXIT_FAIL if res.failed else EXIT_OK)
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"error: {msg}", file=err)
        return EXIT_USAGE
    except (PreconditionError, DomainError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except (QuadratureError, DivergenceError, OverflowError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=err)
        code = EXIT_NUMERIC
    try:
        emit_report(res, out)
        (out / "manifest.txt").write_text(_manifest(cfg, code, time.perf_counter() - start), encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc}", file=err)
        return EXIT_USAGE
    for line in res.stdout:
        print(line)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="weighted-hardy", description="Weighted Hardy inequality toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="configuration file with [weight], [params], [run] sections")
    ap.add_argument("--out", help="output directory (default: run.out or ./out)")
    ap.add_argument("--seed", type=int, help="seed for random corpora")
    ap.add_argument("--tol", type=float, help="pass tolerance factor")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        cfg = parse_config(text, {"command": args.command, "out": args.out, "seed": args.seed, "tol": args.tol})
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    return run_command(cfg)


if __name__ == "__main__":
    sys.exit(main())
