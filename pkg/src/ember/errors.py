"""Exception hierarchy shared by the engine, the service layer and the CLI.

Every error carries a coarse ``code`` used by the HTTP layer and mapped to a
process exit status by the CLI: ``config`` -> 2, ``convergence`` -> 3,
``resource`` -> 4.
"""

EXIT_CODES = {"config": 2, "convergence": 3, "resource": 4}


class EmberError(Exception):
    code = "config"

    def __init__(self, message, **detail):
        super().__init__(message)
        self.message = message
        self.detail = detail

    @property
    def exit_code(self):
        return EXIT_CODES.get(self.code, 1)


class ConfigError(EmberError):
    """Bad run configuration, missing paths, invalid option values."""

    code = "config"


class BundleFormatError(ConfigError):
    """Malformed or inconsistent integral bundle / FCIDUMP file."""


class ValidationError(ConfigError):
    """Input data violates a structural invariant (non-SPD overlap, ...)."""


class LinearDependenceError(ConfigError):
    """Overlap matrix too ill-conditioned for the orthogonalization step."""


class ConvergenceError(EmberError):
    code = "convergence"


class ScfConvergenceError(ConvergenceError):
    """SCF failed to reach the commutator threshold within max_iter."""


class DavidsonError(ConvergenceError):
    """Iterative eigensolver failed to reach the residual threshold."""


class MuIterationError(ConvergenceError):
    """Chemical-potential root search stalled or diverged."""


class DegenerateOrbitalsError(ConvergenceError):
    """Vanishing denominator in the perturbative doubles amplitudes."""


class EmbeddingError(ConvergenceError):
    """Inconsistent embedding, e.g. a non-integer impurity electron count."""


class ResourceGuardError(EmberError):
    """Requested problem size exceeds a desk-scale guard rail."""

    code = "resource"


class SolverError(ConvergenceError):
    """High-level impurity solver produced no usable configurations."""
