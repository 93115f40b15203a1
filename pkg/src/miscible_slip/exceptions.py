"""Exception hierarchy. Each class carries a short machine-readable category
used by the command line for error reporting and exit codes."""


class MiscibleError(Exception):
    category = "error"
    exit_code = 1


class MeshError(MiscibleError, ValueError):
    category = "mesh"
    exit_code = 2


class ConfigError(MiscibleError, ValueError):
    category = "config"
    exit_code = 2


class ConstraintError(MiscibleError, ValueError):
    category = "constraints"
    exit_code = 2


class HypothesisError(MiscibleError, ValueError):
    """A friction law or the data violate an assumption of the model."""

    category = "hypothesis"
    exit_code = 3


class QuadratureError(MiscibleError, RuntimeError):
    category = "quadrature"
    exit_code = 4


class SolverError(MiscibleError, RuntimeError):
    category = "solver"
    exit_code = 4


class FixedPointError(SolverError):
    """Friction fixed-point iteration did not converge."""

    category = "fixed_point"


class SolvabilityError(SolverError):
    category = "solvability"
