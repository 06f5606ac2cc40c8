"""Frank-Wolfe with Taylor-point updating for ERM with linear prediction."""

from ._core import (
    BatchRule,
    ConfigError,
    DimensionError,
    DomainError,
    FeasibleSet,
    ParseError,
    Problem,
    SolverError,
    TaylorModel,
    __version__,
    bound_rhs,
    compute_reference,
    fw_ada_run,
    fw_gap,
    lipschitz_constants,
    load_libsvm,
    load_trace,
    loss_d1,
    loss_d2,
    loss_value,
    problem_constants,
    standard_fw_run,
    step_size,
    summarize_traces,
    synth_problem,
    tufw_run,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
