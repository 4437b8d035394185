"""Exception hierarchy shared by all modules."""


class HypError(Exception):
    """Base class for all torushyp errors."""


class EvaluationOutsideDomain(HypError):
    """A coefficient evaluation was requested at a non-admissible state."""


class StateOutsideDomain(EvaluationOutsideDomain):
    """A field takes values outside the admissible region.

    ``witness`` holds the offending grid point (or state) and ``t`` the time.
    """

    def __init__(self, msg, witness=None, t=None):
        super().__init__(msg)
        self.witness = witness
        self.t = t


class AdmissibilityViolation(StateOutsideDomain):
    """A model inequality fails; ``inequality`` names the first one."""

    def __init__(self, msg, inequality, witness=None, t=None):
        super().__init__(msg, witness=witness, t=t)
        self.inequality = inequality


class SymbolError(HypError):
    """The principal symbol at some sample point is not strongly hyperbolic."""

    kind = "symbol_error"

    def __init__(self, msg, value=None):
        super().__init__(msg)
        self.value = value


class ComplexSpectrum(SymbolError):
    kind = "complex_spectrum"


class Defective(SymbolError):
    kind = "defective"


class IllConditionedProjection(SymbolError):
    kind = "ill_conditioned_projection"


class SymbolFailure(HypError):
    """Wraps a :class:`SymbolError` raised while quantizing a symbol on a grid."""

    def __init__(self, msg, cause, x=None, xi=None):
        super().__init__(msg)
        self.cause = cause
        self.x = x
        self.xi = xi


class SingularTimeMatrix(HypError):
    """The time-direction coefficient matrix is not invertible."""


class EmptyPlan(HypError):
    pass


class NonFiniteField(HypError):
    pass


class NonFinite(HypError):
    """Overflow or NaN encountered while time stepping."""


class NoConvergence(HypError):
    pass


class GridMismatch(HypError):
    pass


class InsufficientSamples(HypError):
    pass


class ConfigError(HypError):
    pass


class IoError(HypError):
    """An input file could not be read or an output could not be written."""
