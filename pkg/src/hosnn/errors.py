"""Exception hierarchy shared across the package."""


class HosnnError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HosnnError, ValueError):
    """Invalid configuration, topology, or argument combination."""


class TopologyError(ConfigError):
    """Network, trace, or signature shapes do not line up."""


class NumericDomainError(HosnnError, ArithmeticError):
    """Non-finite values or out-of-domain parameters."""


class DivergenceError(NumericDomainError):
    """Training produced a non-finite loss."""


class FileFormatError(HosnnError, IOError):
    """Base class for on-disk format problems."""


class BadMagicError(FileFormatError):
    pass


class VersionError(FileFormatError):
    pass


class CorruptFileError(FileFormatError):
    pass


class CountMismatchError(FileFormatError):
    pass
