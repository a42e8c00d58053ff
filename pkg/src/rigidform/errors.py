"""Exception hierarchy shared by all rigidform modules."""


class RigidFormError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(RigidFormError, ValueError):
    pass


class NonOrthogonal(RigidFormError, ValueError):
    pass


class BranchSingularity(RigidFormError, ValueError):
    """A rotation angle sits on the branch cut of the matrix logarithm (angle = pi)."""


class RankDeficient(RigidFormError, ValueError):
    pass


class SupportViolation(RigidFormError, ValueError):
    """An offset field has a nonzero entry outside its declared support."""


class NonReciprocal(RigidFormError, ValueError):
    pass


class NotCritical(RigidFormError, ValueError):
    pass


class NumericalFailure(RigidFormError, ArithmeticError):
    """Base class for failures of an iterative numerical procedure."""


class NoConvergence(NumericalFailure):
    pass


class DivergedState(NumericalFailure):
    pass


class SingularLinearization(NumericalFailure):
    pass


class SingularJacobian(NumericalFailure):
    pass
