"""Exception hierarchy shared across the package."""


class ProvRegError(Exception):
    """Base class for all errors raised by this package."""


# -- hashing ----------------------------------------------------------------

class DimensionMismatch(ProvRegError):
    pass


class TooFewSamples(ProvRegError):
    pass


class DegenerateCovariance(ProvRegError):
    pass


class NonFiniteInput(ProvRegError):
    pass


class LengthMismatch(ProvRegError):
    pass


# -- match statistics -------------------------------------------------------

class OutOfRange(ProvRegError):
    pass


class Unachievable(ProvRegError):
    pass


class EmptyInput(ProvRegError):
    pass


# -- circuits ---------------------------------------------------------------

class BackendMismatch(ProvRegError):
    pass


class EmptyVector(ProvRegError):
    pass


class WidthOverflow(ProvRegError):
    pass


# -- multi-party encryption -------------------------------------------------

class InvalidThreshold(ProvRegError):
    pass


class KeyMismatch(ProvRegError):
    pass


class DecryptionIncomplete(ProvRegError):
    pass


class BindingMismatch(ProvRegError):
    pass


class EmptyDatabase(ProvRegError):
    pass


# -- registry ---------------------------------------------------------------

class BadSignature(ProvRegError):
    pass


class DuplicateId(ProvRegError):
    pass


class NotFound(ProvRegError):
    pass


class IntegrityError(ProvRegError):
    pass


class UnknownProducer(ProvRegError):
    pass


# -- service ----------------------------------------------------------------

class UnknownRequest(ProvRegError):
    pass
