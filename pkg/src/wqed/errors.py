"""Exception hierarchy shared by all wqed modules."""


class WqedError(Exception):
    """Base class for every error raised by the package."""


class NumericError(WqedError):
    """Numerical failure (maps to CLI exit code 3)."""


class DivergentDispersion(NumericError):
    """Quasi-momentum sits on a pole of the dispersion (k = +-k0)."""


class NoBracket(NumericError):
    """Root finder could not bracket the resonance condition."""


class DimensionOverflow(NumericError):
    """Requested matrix is larger than the configured dense cap."""


class DegenerateBasis(NumericError):
    """Complex-orthogonal normalisation failed (v^T v ~ 0)."""

    def __init__(self, index: int, value: complex):
        super().__init__(f"eigenvector {index} has v^T v = {value:.3e}; cannot normalise")
        self.index = index
        self.value = value


class ConvergenceFailure(NumericError):
    def __init__(self, n_unconverged: int):
        super().__init__(f"eigensolver failed to converge ({n_unconverged} pairs)")
        self.n_unconverged = n_unconverged


class ResidualExceeded(NumericError):
    def __init__(self, worst: float, bound: float):
        super().__init__(f"eigenpair residual {worst:.3e} exceeds bound {bound:.3e}")
        self.worst = worst
        self.bound = bound


class StripeNotFound(NumericError):
    """No emergent off-diagonal stripe in the momentum-space correction."""


class EmptySelection(WqedError):
    pass


class TooFewLevels(WqedError):
    pass


class NotNormalized(WqedError):
    pass


class DegenerateFit(NumericError):
    pass


class ValidationError(WqedError):
    """Invalid configuration or parameter value (CLI exit code 2)."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ParseError(WqedError):
    def __init__(self, path, line: int, col: int, message: str):
        super().__init__(f"{path}:{line}:{col}: {message}")
        self.line = line
        self.col = col


class RefusedOverwrite(WqedError):
    pass
