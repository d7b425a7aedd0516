"""Exception hierarchy.

Everything raised for bad input derives from :class:`ValidationError` (CLI exit
code 2); numerical breakdown of the exact transport solver raises
:class:`SolverFailure` (exit code 3).
"""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class SolverFailure(RuntimeError):
    """The exact transport solver failed or could not certify optimality."""


# metric spaces and measures
class NegativeDistance(ValidationError):
    pass


class NonSquareTable(ValidationError):
    pass


class AsymmetricDistance(ValidationError):
    pass


class NonzeroDiagonal(ValidationError):
    pass


class TriangleViolation(ValidationError):
    """``triple = (i, k, j)`` with ``d(i, j) > d(i, k) + d(k, j)``."""

    def __init__(self, i, k, j, dij, dik, dkj):
        self.triple = (i, k, j)
        super().__init__(
            f"triangle inequality fails for ({i}, {k}, {j}): "
            f"d({i},{j})={dij:g} > d({i},{k}) + d({k},{j}) = {dik:g} + {dkj:g}"
        )


class InvalidMeasure(ValidationError):
    pass


class EmptySubset(ValidationError):
    pass


class DegenerateSubset(ValidationError):
    pass


class NonpositiveOrder(ValidationError):
    pass


class SpaceMismatch(ValidationError):
    pass


# partitions
class InvalidPartition(ValidationError):
    pass


class IncompleteCover(ValidationError):
    pass


class ExactModeTooLarge(ValidationError):
    pass


class NTooLarge(ValidationError):
    pass


class NotNonIncreasing(ValidationError):
    pass


# transport
class NotLineEmbeddable(ValidationError):
    pass


class CellMassMismatch(ValidationError):
    def __init__(self, cell, p_mass, q_mass):
        self.cell = tuple(cell)
        super().__init__(
            f"cell {self.cell} has P-mass {p_mass!r} but Q-mass {q_mass!r}"
        )


class DegenerateSupport(ValidationError):
    pass


class BadLevelZero(ValidationError):
    pass


class BadRadii(ValidationError):
    pass


# bounds
class BadCounts(ValidationError):
    pass


class BadShellTable(ValidationError):
    pass


class MomentBelowOne(ValidationError):
    pass


class NoFiniteRadii(ValidationError):
    pass


class KTooLargeForN(ValidationError):
    pass


class AbsoluteContinuityViolation(ValidationError):
    pass


# estimators / harness
class EmptyCenterSet(ValidationError):
    pass


class NonpositiveRisk(ValidationError):
    pass


class UnknownExample(ValidationError):
    pass


class ConfigError(ValidationError):
    pass
