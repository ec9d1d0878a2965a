class PandoraError(ValueError):
    """Base class for all errors raised by this package."""


class InvalidDistribution(PandoraError):
    pass


class InvalidEpsilon(PandoraError):
    pass


class NegativeCost(PandoraError):
    pass


class DimensionMismatch(PandoraError):
    pass


class UnsupportedContinuous(PandoraError):
    """An exact oracle was handed a non-discrete distribution."""


class ExplosionCap(PandoraError):
    """The support product is larger than the enumeration cap."""


class CostMismatch(PandoraError):
    pass


class InstanceFormatError(PandoraError):
    pass
