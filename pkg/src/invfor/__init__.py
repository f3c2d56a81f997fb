"""Load forecasting for price-responsive consumers by inverse optimization.

The pool's hourly load is modelled as the solution of a block-dispatch LP
whose bounds and marginal utilities depend on regressors.  ``estimation``
fits those parameters from history, ``forward_model`` turns them into
forecasts, ``simulator`` produces synthetic heat-pump fleet data and
``benchmarks`` holds the reference forecasters and error metrics.
"""

from .errors import (
    ArityMismatch,
    ConfigError,
    InconsistentBounds,
    InsufficientHistory,
    InvforError,
    MalformedProblem,
    SingularDesign,
    SolverFailure,
    UnstableBase,
    ZeroRange,
)
from .lp_core import LpBuilder, LpProblem, LpSolution, Status, solve_lp

__all__ = [
    "ArityMismatch",
    "ConfigError",
    "InconsistentBounds",
    "InsufficientHistory",
    "InvforError",
    "LpBuilder",
    "LpProblem",
    "LpSolution",
    "MalformedProblem",
    "SingularDesign",
    "SolverFailure",
    "Status",
    "UnstableBase",
    "ZeroRange",
    "solve_lp",
]

__version__ = "0.1.0"
