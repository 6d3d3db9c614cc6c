"""
Exception types raised by the simulation core
"""


class BridgeTruncError(Exception):
    """Base class for all errors raised by bridge_trunc"""


class InvalidSizeError(BridgeTruncError, ValueError):
    """Matrix or environment size is not a positive integer"""


class DomainError(BridgeTruncError, ValueError):
    """Argument outside its mathematical domain (e.g. s outside [0, 1])"""


class ContractError(BridgeTruncError, ValueError):
    """Input violates an invariant the operation relies on"""


class ConfigError(BridgeTruncError, ValueError):
    """Experiment, probe or CLI configuration is inconsistent"""


class NumericalError(BridgeTruncError, ArithmeticError):
    """Numerical factorization failed (e.g. covariance not positive definite)"""


class OutputError(BridgeTruncError, OSError):
    """Report or CSV could not be written"""

    def __init__(self, path, reason):
        super().__init__(f"cannot write {path}: {reason}")
        self.path = path
