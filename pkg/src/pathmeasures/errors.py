"""Exception hierarchy.

Every error raised for a mathematically invalid input derives from
:class:`DomainError`; the CLI maps those to exit status 1.
"""


class DomainError(ValueError):
    """Input is well formed but violates a mathematical precondition."""


class NotAbsolutelyContinuous(DomainError):
    pass


class NotProbability(DomainError):
    pass


class NonIntegrable(DomainError):
    pass


class MeasurabilityViolation(DomainError):
    pass


class WNotAdmissible(DomainError):
    pass


class NonIntegrableW(DomainError):
    pass


class DualInadmissible(DomainError):
    pass


class DegenerateTransform(DomainError):
    pass


class InfiniteMass(DomainError):
    pass


class Infeasible(DomainError):
    pass


class MaxIterations(DomainError):
    pass


class NotMarkov(DomainError):
    pass
