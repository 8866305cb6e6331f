import sys
import numpy as np
import pytest

from weighted_hardy.transforms import TransformParams, build_transforms
from weighted_hardy.weights import builtin_weight, classify


def make_tset(name: str, p: float, eta: float = 1.0, mu: float = 1.0, admissibility: bool = False):
    spec = builtin_weight(name, p)
    wc = classify(spec, eta, mu=mu, admissibility=admissibility)
    return build_transforms(spec, TransformParams(p, eta, mu), wc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
