"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto
distinct process exit statuses without a lookup table.
"""

from __future__ import annotations


class NVortexError(Exception):
    exit_code = 1


class ConfigError(NVortexError):
    exit_code = 2


class NumericalFailure(NVortexError):
    """The problem is well posed but a numerical procedure did not succeed."""

    exit_code = 3


class InfeasibleProblem(NVortexError):
    """Inputs violate a precondition (collisions, domain exits, symmetry...)."""

    exit_code = 4


# -- infeasible inputs ------------------------------------------------------

class CollisionError(InfeasibleProblem):
    pass


class OutsideDomainError(InfeasibleProblem):
    pass


class CollisionOnLoop(CollisionError):
    pass


class OutsideDomainOnLoop(OutsideDomainError):
    pass


class LoopLeftDomain(OutsideDomainOnLoop):
    pass


class StrengthMismatch(InfeasibleProblem):
    pass


class NotSymmetric(InfeasibleProblem):
    pass


class SeedRejected(InfeasibleProblem):
    pass


class NotApplicable(InfeasibleProblem):
    pass


class ZeroOnContour(InfeasibleProblem):
    pass


# -- numerical failures -----------------------------------------------------

class NoConvergence(NumericalFailure):
    pass


class SingularJacobian(NumericalFailure):
    def __init__(self, message: str, kernel_dim: int | None = None):
        super().__init__(message)
        self.kernel_dim = kernel_dim


# loopspace wording for the same condition
JacobianSingular = SingularJacobian


class ToleranceAmbiguity(NumericalFailure):
    pass


class TruncationUnstable(NumericalFailure):
    pass


class AmbiguousWinding(NumericalFailure):
    pass


class SingularBlock(NumericalFailure):
    pass


class DegenerateOrbit(NumericalFailure):
    pass


class SolverFailure(NumericalFailure):
    pass


class TrajectoryEvent(NumericalFailure):
    """Integration stopped early; the partial trajectory is attached."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class CollisionEvent(TrajectoryEvent):
    pass


class BlowupEvent(TrajectoryEvent):
    pass
