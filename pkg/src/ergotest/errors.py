"""Exception hierarchy.  Everything raised on bad domain input derives from
:class:`DomainError`; the CLI maps it to exit status 1."""


class DomainError(Exception):
    pass


class AlphabetError(DomainError, ValueError):
    pass


class StochasticMatrixError(DomainError, ValueError):
    pass


class NonUniqueStationaryError(DomainError):
    """The chain has several invariant laws and no initial law was given."""


class DesignError(DomainError, ValueError):
    pass


class CalibrationError(DomainError, ValueError):
    pass


class CapExceededError(DomainError):
    pass


class CacheMismatchError(DomainError):
    pass


class SpecError(DomainError, ValueError):
    """Malformed model, family or run configuration."""
