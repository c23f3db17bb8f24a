"""
Exception hierarchy shared by every pwlab module.

Every error names the precondition it violates so the command-line runner
can report it without inspecting the message text.
"""


class PWLabError(ValueError):
    """Base class for validation and numerical errors.

    Args:
        message: Human-readable description
        precondition: Short name of the violated precondition
    """

    def __init__(self, message, precondition=None):
        super().__init__(message)
        self.precondition = precondition or 'unspecified'

    def __str__(self):
        return f"{super().__str__()} [precondition: {self.precondition}]"


class GridMismatchError(PWLabError):
    def __init__(self, message="operands live on different grids"):
        super().__init__(message, 'grid mismatch')


class ResolutionError(PWLabError):
    def __init__(self, message, precondition='grid alignment'):
        super().__init__(message, precondition)


class NyquistError(PWLabError):
    def __init__(self, message):
        super().__init__(message, 'nyquist')


class SizeCapError(PWLabError):
    def __init__(self, message, precondition='size cap'):
        super().__init__(message, precondition)


class NumericallySingularError(PWLabError):
    """Raised when lambda_min is at or below the machine-zero threshold."""

    def __init__(self, message, lambda_min=None):
        super().__init__(message, 'lambda_min > 1e-14')
        self.lambda_min = lambda_min


class IllConditionedGramError(PWLabError):
    def __init__(self, message, lambda_min=None):
        super().__init__(message, 'well-conditioned gram')
        self.lambda_min = lambda_min


class ConvergenceError(PWLabError):
    """Raised when an iteration cap is hit before the tolerance is met."""

    def __init__(self, message, final_error=None, iterations=None):
        super().__init__(message, 'iteration cap')
        self.final_error = final_error
        self.iterations = iterations


class CertificateRefused(PWLabError):
    """Raised when a contraction certificate is refused (c >= 1)."""

    def __init__(self, certificate):
        super().__init__(
            f"contraction refused: c = {certificate.c:.6g} >= 1 "
            f"(C_U = {certificate.c_u:.6g}, |RC_K| = {certificate.rc_k_norm:.6g})",
            'c < 1'
        )
        self.certificate = certificate
