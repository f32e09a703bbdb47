"""Exception types raised by the package."""


class BergmanError(Exception):
    """Base class for all errors raised here."""


class InvalidPointError(BergmanError, ValueError):
    pass


class ConfigurationError(BergmanError, ValueError):
    pass


class DimensionError(BergmanError, ValueError):
    pass


class RankDeficiencyError(BergmanError, ValueError):
    """The node set cannot separate sections of the requested degree."""


class IllConditionedError(BergmanError, ValueError):
    pass


class UnsupportedOracleError(BergmanError, KeyError):
    pass


class UnconvergedError(BergmanError, RuntimeError):
    pass
