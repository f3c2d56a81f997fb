"""Exception hierarchy shared by every module of the package."""


class InvforError(Exception):
    """Base class for all errors raised by invfor."""


class MalformedProblem(InvforError):
    """An LP is structurally invalid (missing bounds, NaN data, bad shapes)."""


class SolverFailure(InvforError):
    """An LP that should have an optimum did not produce one."""


class InconsistentBounds(InvforError):
    """Load bounds or block widths make the reconstruction problem infeasible."""


class ArityMismatch(InvforError):
    """A regressor row does not match the arity the model was estimated with."""


class InsufficientHistory(InvforError):
    """A series is too short for the requested lags or windows."""


class SingularDesign(InvforError):
    """A least-squares design matrix is rank deficient."""


class ZeroRange(InvforError):
    """The range normalizer of NRMSE is zero."""


class UnstableBase(InvforError):
    """A building state matrix has spectral radius >= 1."""


class ConfigError(InvforError):
    """Invalid experiment configuration or data file."""
