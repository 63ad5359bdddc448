"""Exception hierarchy.

Everything raised on bad input derives from :class:`SemotError` so the CLI can
map it to exit status 1.
"""


class SemotError(Exception):
    pass


class DeadFeature(SemotError):
    pass


class EmptyInput(SemotError):
    pass


class NonPositiveValue(SemotError):
    pass


class LayerMismatch(SemotError):
    pass


class DimensionMismatch(SemotError):
    pass


class CosineNormViolation(SemotError):
    pass


class InvalidSimplex(SemotError):
    pass


class TooLarge(SemotError):
    pass


class NonConvergence(SemotError):
    """Sinkhorn hit ``max_iter`` before reaching the marginal tolerance.

    The rounded (feasible) plan is attached so the caller can still use it.
    """

    def __init__(self, violation, plan=None):
        super().__init__(f"sinkhorn did not converge: marginal violation {violation:.3e}")
        self.violation = violation
        self.plan = plan


class EmptySample(SemotError):
    pass


class EmptySources(SemotError):
    pass


class NegativeEpsilon(SemotError):
    pass


class InvalidClusterCount(SemotError):
    pass


class UnknownNode(SemotError):
    pass


class DisconnectedAndOverclustered(SemotError):
    pass


class ZeroVector(SemotError):
    pass


class MissingParam(SemotError):
    pass


class InvalidRegime(SemotError):
    pass


class InvalidSpec(SemotError):
    pass


class FormatError(SemotError):
    pass


class BadMagic(FormatError):
    pass


class DimMismatch(FormatError):
    pass


class TokenCountMismatch(FormatError):
    pass


class NonFiniteValue(FormatError):
    pass
