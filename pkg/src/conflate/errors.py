"""Exception and warning types shared by every engine."""


class ConflationError(Exception):
    """Base class for errors raised by this package."""


class InvalidSpec(ConflationError, ValueError):
    """A distribution description violates its family constraints."""


class IncompatibleInputs(ConflationError):
    """The inputs share no region of positive product mass."""


class ConflationUndefined(IncompatibleInputs):
    """Discrete inputs without a common atom: the conflation does not exist."""


class NonIntegrableProduct(UserWarning):
    """The product of densities does not integrate; no density is returned."""
