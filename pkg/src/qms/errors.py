"""Exception types shared across the toolkit."""


class QMSError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(QMSError, ValueError):
    pass


class SingularMatrix(QMSError, ValueError):
    pass


class ShapeMismatch(QMSError, ValueError):
    pass


class BasisNotOrthonormal(QMSError, ValueError):
    pass


class NotUnital(QMSError, ValueError):
    pass


class KernelConditionViolated(QMSError, ValueError):
    pass


class RangeViolation(QMSError, ValueError):
    pass


class PreconditionViolated(QMSError, ValueError):
    pass


class NotCP(QMSError, ValueError):
    pass


class NotUnitalGenerator(QMSError, ValueError):
    pass


class NotDetailedBalance(QMSError, ValueError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BlockLeakage(QMSError, ValueError):
    def __init__(self, message, magnitude=None):
        super().__init__(message)
        self.magnitude = magnitude


class NotErgodic(QMSError, ValueError):
    pass


class IndexMismatch(QMSError, ValueError):
    pass
