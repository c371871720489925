"""Exception taxonomy. CLI exit codes map onto these classes."""


class CircgprError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(CircgprError):
    """Invalid or inconsistent parameter values."""


class GeometryError(CircgprError):
    """Scene/window geometry cannot be realized (CLI exit 3)."""


class SamplingError(CircgprError):
    """Random scene sampling failed to satisfy the constraints."""


class ShapeError(CircgprError):
    """Array dimensions disagree with the operation's contract."""


class FormatError(CircgprError):
    """On-disk data is malformed (CLI exit 2)."""


class SimulationError(CircgprError):
    """FDTD placement or stability failure."""
