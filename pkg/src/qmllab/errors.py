"""Exception types raised across qmllab."""


class QmlLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(QmlLabError, ValueError):
    pass


class InvalidKey(InvalidParameter):
    pass


class DimensionError(QmlLabError, ValueError):
    pass


class InvalidState(QmlLabError, ValueError):
    pass


class InvalidDistribution(QmlLabError, ValueError):
    pass


class NoSupport(QmlLabError, RuntimeError):
    """Every key has zero likelihood for the observed batch."""


class TooLarge(QmlLabError, ValueError):
    pass


class BoundVacuous(QmlLabError):
    """The reverse-reduction bound carries no information (success <= 1/eps)."""


class ConfigError(QmlLabError, ValueError):
    """Configuration failed validation.

    ``fields`` lists every offending field so callers can report them all at once.
    """

    def __init__(self, fields):
        self.fields = dict(fields)
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(self.fields.items()))
        super().__init__(f"invalid configuration ({detail})")
