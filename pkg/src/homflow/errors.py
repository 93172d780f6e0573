"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Invalid algebraic or metric data."""


class NonSPDMetricError(GeometryError):
    """Metric matrix is not symmetric positive definite."""


class UnknownPresetError(GeometryError):
    """Preset name not in the catalog; the message lists valid names."""


class FlowKindError(ValueError):
    """Operation applied to a trajectory of the wrong flow kind."""


class TooFewSamplesError(ValueError):
    """Trajectory does not carry enough samples for the requested check."""


class IntegrationError(RuntimeError):
    """Adaptive step control broke down; carries the time of breakdown."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


class ConfigError(ValueError):
    """Scenario configuration failed schema validation; carries the JSON path."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path
