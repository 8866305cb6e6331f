"""One-dimensional weighted Hardy inequalities: classification, transforms, checks."""

__version__ = "0.1.0"

from .weights import (  # noqa: E402
    BUILTIN_NAMES,
    DomainError,
    Family,
    Kind,
    WeightClass,
    WeightSpec,
    builtin_weight,
    builtin_weights,
    check_admissible,
    classify,
    eval_log_weight,
)
from .transforms import TransformParams, TransformSet, build_transforms, eval_transform  # noqa: E402
from .inequality import (  # noqa: E402
    SPECIAL_CASES,
    DivergenceError,
    InequalityReport,
    PreconditionError,
    SpecialCaseParams,
    TestFunction,
    energy,
    hardy_integral,
    monotone_comparison,
    random_test_function,
    remainder_integral,
    report_remainder,
    report_sharp,
    report_t_weighted,
    special_case_check,
)
from .extremals import extremal_profile, sharpness_sweep, vanishing_family  # noqa: E402
from .variational import Mesh, minimize_quotient, rayleigh_quotient, infimum_zero_demo  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
