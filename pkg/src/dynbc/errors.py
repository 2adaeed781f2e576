"""Exception hierarchy shared by all dynbc modules."""


class DynBCError(Exception):
    """Base class for every error raised by dynbc."""


class SingularMatrix(DynBCError):
    pass


class NoConvergence(DynBCError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class Overflow(DynBCError):
    pass


class GridMismatch(DynBCError):
    pass


class NonFiniteEntries(DynBCError):
    pass


class InvalidSize(DynBCError):
    pass


class DisconnectedGraph(DynBCError):
    pass


class DimensionMismatch(DynBCError):
    pass


class RankDeficientL(DynBCError):
    pass


class LambdaInSpectrum(DynBCError):
    pass


class WrongCase(DynBCError):
    pass


class NonConvergedValidation(DynBCError):
    pass


class BlockMapMismatch(DynBCError):
    pass


class UnknownCut(DynBCError):
    pass


class BoundsMissing(DynBCError):
    pass


class PremiseViolated(DynBCError):
    pass


class ConfigInvalid(DynBCError):
    pass


class CheckFailed(DynBCError):
    def __init__(self, message, check=None):
        super().__init__(message)
        self.check = check


class IncompatibleScenarios(DynBCError):
    pass
