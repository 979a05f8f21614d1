"""Exception hierarchy shared by the library and the CLI."""


class NemscatError(Exception):
    """Base class for all package errors."""


class DomainError(NemscatError, ValueError):
    """An input lies outside the domain of a formula."""


class ConfigError(NemscatError, ValueError):
    """A scenario configuration is malformed or violates an invariant."""


class NumericalGateError(NemscatError, RuntimeError):
    """A numerical safety check (step size, Fock cutoff) refused to proceed."""


class CutoffError(NumericalGateError):
    """Fock truncation too small for the requested coherent amplitude."""


class StepGateError(NumericalGateError):
    """Step-doubling check failed; ``suggested_dt`` holds a smaller step."""

    def __init__(self, message: str, suggested_dt: float):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class QuadratureError(NumericalGateError):
    """Adaptive integration of the decoherence ODE failed."""
