"""Exception hierarchy shared by all cvmdi modules."""


class CvmdiError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CvmdiError, ValueError):
    """An input violates a documented precondition."""


class UnphysicalStateError(CvmdiError, ValueError):
    """A covariance matrix violates the uncertainty principle."""


class DomainError(CvmdiError, ValueError):
    """A function was evaluated outside its mathematical domain."""


class NumericalError(CvmdiError, ArithmeticError):
    """A numerically singular configuration was encountered."""


class DegenerateWaveformError(ValidationError):
    """A waveform has zero energy and cannot be normalized."""


class DivergentGainError(ValidationError):
    """The optimal displacement gain diverges (zero mode matching on Bob's side)."""


class EstimationError(CvmdiError, ValueError):
    """Finite-size confidence bounds crossed zero; too few estimation samples."""


class NoKeyError(CvmdiError):
    """No positive key rate exists anywhere on the requested range."""
