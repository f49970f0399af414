"""Exception hierarchy shared by the solver modules."""


class CornerBIEError(Exception):
    """Base class for all library errors."""


class GeometryError(CornerBIEError, ValueError):
    pass


class DegenerateEdge(GeometryError):
    pass


class SelfIntersection(GeometryError):
    pass


class CollinearCorner(GeometryError):
    pass


class InvalidPartition(GeometryError):
    pass


class InvalidSpec(CornerBIEError, ValueError):
    pass


class UnsupportedOrder(CornerBIEError, ValueError):
    pass


class SegmentOutOfRange(CornerBIEError, IndexError):
    pass


class CoincidentPoints(CornerBIEError, ValueError):
    pass


class CornerSource(CornerBIEError, ValueError):
    pass


class InvalidCornerParam(CornerBIEError, ValueError):
    pass


class ObservationOnPanel(CornerBIEError, ValueError):
    pass


class NonFiniteIntegrand(CornerBIEError, FloatingPointError):
    def __init__(self, message: str, node: float | None = None):
        super().__init__(message)
        self.node = node


class MaxDepthExceeded(CornerBIEError, RuntimeError):
    pass


class SingularSystem(CornerBIEError, ArithmeticError):
    pass


class EvaluationAtBreakpoint(CornerBIEError, ValueError):
    pass


class PointNotInterior(CornerBIEError, ValueError):
    pass


class PointPlacement(CornerBIEError, ValueError):
    pass


class NonPositiveError(CornerBIEError, ValueError):
    pass


class ConfigError(CornerBIEError, ValueError):
    """Problems with a run configuration file."""


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
