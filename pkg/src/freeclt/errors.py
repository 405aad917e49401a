"""Exception hierarchy shared by all modules."""


class FreeCLTError(Exception):
    """Base class for every error raised by the package."""


class Singular(FreeCLTError):
    """A matrix is not invertible at working precision."""


class PreconditionFailed(FreeCLTError):
    pass


class ZeroParameter(FreeCLTError):
    pass


class OrderExceeded(FreeCLTError):
    """More moments/cumulants are needed than the data provides."""


class DimensionMismatch(FreeCLTError):
    pass


class Divergent(FreeCLTError):
    """A Neumann series cannot be certified to converge."""


class NoConvergence(FreeCLTError):
    """An iteration hit its cap before meeting the tolerance."""


class InvalidParams(FreeCLTError):
    pass


class OnSupport(FreeCLTError):
    pass


class ZeroPolynomial(FreeCLTError):
    pass


class NotValidated(FreeCLTError):
    pass


class DomainError(FreeCLTError):
    pass


class InvalidSize(FreeCLTError):
    pass


class EvaluatorFailure(FreeCLTError):
    pass


class NegativeMass(FreeCLTError):
    pass


class UnknownKind(FreeCLTError):
    pass


class ConfigError(FreeCLTError):
    """Invalid or inconsistent run configuration."""
