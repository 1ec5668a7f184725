"""Exception hierarchy shared by every pipeline stage."""


class RadarSortError(Exception):
    """Base class for all errors raised by this package."""


class DataError(RadarSortError, ValueError):
    """Input data is malformed, inconsistent or insufficient."""


class ConfigError(RadarSortError, ValueError):
    """A configuration value violates its invariant."""


class RangeAxisError(DataError):
    """A distance falls outside the range axis."""


class InvalidCodeError(DataError):
    """An integer does not name a material class."""


class InvalidMaterialError(DataError):
    pass


class GeometryError(DataError):
    """A reflector would land outside the range axis."""


class DetectionError(DataError):
    """Peak detection could not find a secondary search region."""


class EmptyDatasetError(DataError):
    pass


class DegenerateTrainingError(DataError):
    pass


class NumericError(RadarSortError, ArithmeticError):
    """A forward pass produced a non-finite value."""

    def __init__(self, layer: str, message: str = "non-finite activation"):
        super().__init__(f"{message} in layer {layer}")
        self.layer = layer


class SchemaError(DataError):
    """A file does not match the expected format or version."""
