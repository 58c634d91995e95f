"""Exception types raised across the package."""


class MlgpiError(Exception):
    """Base class for all package errors."""


class SingularMatrix(MlgpiError, ValueError):
    pass


class NonPrincipalLog(MlgpiError, ValueError):
    """An eigenvalue lies on the closed negative real axis."""


class DefectiveMatrix(MlgpiError, ValueError):
    """Eigenvector basis too ill-conditioned to reconstruct from."""


class ClassTooSmall(MlgpiError, ValueError):
    pass


class NonFinite(MlgpiError, FloatingPointError):
    """A flow trajectory left the finite floating point range."""


class EmptyTrainingSet(MlgpiError, ValueError):
    pass


class ParseError(MlgpiError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionMismatch(MlgpiError, ValueError):
    pass
