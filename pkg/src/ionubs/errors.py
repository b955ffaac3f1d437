"""Exception hierarchy shared by all modules."""


class IonUBSError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(IonUBSError):
    """A numerical procedure could not deliver a result within tolerance."""


class SingularityError(NumericalError):
    pass


class StepError(NumericalError):
    pass


class BoundaryError(IonUBSError):
    """A control profile does not return to storage-trap values at its ends."""


class DegenerateBasisError(NumericalError):
    pass


class RootBracketError(NumericalError):
    pass


class PhaseBracketError(RootBracketError):
    pass


class NonPositiveOmegaSqError(NumericalError):
    pass


class NegativeQuarticError(NumericalError):
    pass


class CollisionError(NumericalError):
    pass


class ConditionError(NumericalError):
    """A per-sample linear solve is too badly conditioned to trust."""


class CutoffError(NumericalError):
    """Fock-space truncation is no longer adequate for the evolving state."""


class DomainError(NumericalError):
    pass


class UnsupportedOpError(IonUBSError):
    pass


class DimensionError(IonUBSError):
    pass


class ConfigError(IonUBSError):
    pass
