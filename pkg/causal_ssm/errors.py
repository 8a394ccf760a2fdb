class CausalSsmError(Exception):
    """
    Base class for every error raised by the package.
    """


class ValidationError(CausalSsmError, ValueError):
    """
    Raised when inputs, dimensions or configuration values are invalid.
    """


class NumericalError(CausalSsmError, ArithmeticError):
    """
    Raised when a numerical routine meets an ill-posed problem, like a singular
    innovation covariance or a non-monotone EM objective.
    """
