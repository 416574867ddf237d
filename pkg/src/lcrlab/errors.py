"""Exception types shared across the package."""


class LabError(ValueError):
    """Base class for input errors raised by the lab."""


class DimensionError(LabError):
    """A vector does not have the dimension of the space it is used in."""


class DomainError(LabError):
    """A point or segment leaves the domain ball of a map."""


class DescriptorError(LabError):
    """A JSON descriptor (space, map, scenario) failed validation.

    ``field`` names the offending entry using dotted paths, e.g. ``map.params.k``.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class EstimationError(LabError):
    """An estimator had no admissible samples to work with."""
