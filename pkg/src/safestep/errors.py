"""Exception types shared across the package."""


class SafestepError(Exception):
    """Base class for all package-specific errors."""


class Infeasible(SafestepError):
    """The QP constraint polyhedron is empty."""

    def __init__(self, message="constraint polyhedron is empty", **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class NumericalFailure(SafestepError):
    """Conditioning fell below the usable threshold."""


class SingularMass(SafestepError):
    """Mass-inertia matrix is not invertible at tolerance."""


class SingularImpact(SafestepError):
    """The impact KKT block system is singular."""


class ControllerFailure(SafestepError):
    """A controller could not produce a value at the queried state."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class RelativeDegreeViolation(SafestepError):
    """A barrier handled as relative degree two has nonzero L_g h."""


class DegenerateParams(SafestepError):
    """Parameter combination makes a formula numerically undefined."""


class TooShort(SafestepError):
    """A series is shorter than the smoothing window requires."""


class EmptyDataset(SafestepError):
    """Training was requested on an empty dataset."""


class DivergedLoss(SafestepError):
    """Training loss exceeded 10x its initial value."""


class ConfigError(SafestepError):
    """An experiment configuration failed to parse or validate."""


class MismatchedConfigs(SafestepError):
    """Comparison requested across configs with different models or gait."""
