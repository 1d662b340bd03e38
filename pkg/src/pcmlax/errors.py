"""Exception hierarchy shared by all modules.

Singular loci are hard errors carrying the offending sites; nothing is
silently regularized.
"""

from __future__ import annotations


class PcmlaxError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PcmlaxError):
    """Malformed configuration, field expression, or input file."""


class NonFiniteError(PcmlaxError):
    """Non-finite entries where finite data is required."""


class MissingRepresentationError(PcmlaxError):
    """Operation needs a matrix representation the algebra does not carry."""


class SingularityError(PcmlaxError):
    """Singular or ill-conditioned pointwise operator.

    ``sites`` lists the offending lattice indices (or batch indices),
    ``values`` the local data that produced the singularity.
    """

    def __init__(self, message, sites=None, values=None):
        super().__init__(message)
        self.sites = sites if sites is not None else []
        self.values = values


class KernelSingularError(SingularityError):
    """Kernel inv(T) inv(1 - lam^2) singular or cond > limit."""


class PoleError(SingularityError):
    """Scalar solver evaluated within tolerance of A^2 = 1."""


class OperatorSingularError(SingularityError):
    """Assembled pointwise linear system singular."""


class NonConvergentSeriesError(PcmlaxError):
    """Series solver refused: spectral radius >= 1 somewhere."""

    def __init__(self, message, max_radius=None):
        super().__init__(message)
        self.max_radius = max_radius


class StageError(PcmlaxError):
    """A staged pipeline precondition failed; carries the stage report."""

    def __init__(self, message, stage, report=None):
        super().__init__(message)
        self.stage = stage
        self.report = report


class ClosednessError(StageError):
    def __init__(self, message, report=None):
        super().__init__(message, stage="closedness", report=report)


class CommutationError(StageError):
    def __init__(self, message, report=None):
        super().__init__(message, stage="commutation", report=report)
