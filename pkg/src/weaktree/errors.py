"""Exception hierarchy shared by all modules."""


class WeakTreeError(Exception):
    """Base class for every error raised by this package."""


class DegenerateRangeError(WeakTreeError):
    """Too few tree generations in the requested fitting window."""


class UnboundedRatioError(WeakTreeError):
    """The branching function does not follow the supplied power law."""


class DivergentMomentError(WeakTreeError):
    """A weighted integral of the potential does not converge."""


class BadGridError(WeakTreeError):
    """Grid cells straddle a discontinuity of the weight or the potential."""


class UnconvergedError(WeakTreeError):
    """A discretized result did not stabilize under refinement or truncation."""


class NearSingularError(WeakTreeError):
    """Constants requested too close to the d = 2 singularity."""


class QuadratureUnderresolvedError(WeakTreeError):
    """Kernel quadrature changes too much when the node count is doubled."""


class NoRootError(WeakTreeError):
    """The weak-coupling secular equation has no root in the search range."""


class NormConditionError(WeakTreeError):
    """lambda * ||M(kappa)|| >= 1, so the rank-one reduction is not valid."""


class InconclusiveError(WeakTreeError):
    """Preconditions of an asymptotic prediction are not met."""


class CutoffNotFoundError(WeakTreeError):
    """No certified channel cutoff exists below the hard cap."""


class SizeCapError(WeakTreeError):
    """The explicit tree discretization would exceed the allowed size."""


class SandwichViolationError(WeakTreeError):
    """A computed eigenvalue fell outside its comparison-operator bracket."""


class ConfigError(WeakTreeError):
    """Invalid configuration file."""
