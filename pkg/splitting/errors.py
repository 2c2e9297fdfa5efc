"""
Exception hierarchy for the splitting library.
Each error also derives from the builtin it refines, so callers that catch
ValueError (or NotImplementedError) keep working.
"""

from typing import Optional, Tuple


class SplittingError(Exception):
    """Base class for all library errors"""


class ShapeError(SplittingError, ValueError):
    """Dimensions of matrices or block vectors do not conform"""


class ContractError(SplittingError, ValueError):
    """A documented precondition was violated by the caller"""


class MonotonicityError(SplittingError, ValueError):
    """An affine map is not monotone within tolerance"""


class ConvexityError(SplittingError, ValueError):
    """A saddle function is not convex-concave within tolerance"""


class ConstructionError(SplittingError, ValueError):
    """Malformed parameters for an operator or problem"""


class UnsupportedOperatorError(SplittingError, NotImplementedError):
    """The operator has no closed form for the requested action"""


class EmbeddingError(SplittingError, ValueError):
    """A candidate zero could not be lifted to a fixed point"""


class CommunicationError(SplittingError, RuntimeError):
    """A node attempted to message a non-neighbour"""


class ConfigError(SplittingError, ValueError):
    """An environment setting could not be parsed"""


class DocumentError(SplittingError, ValueError):
    """A JSON document is malformed; `location` points at the offending part"""

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class GraphError(SplittingError, ValueError):
    """Invalid graph input"""


class EdgeListParseError(GraphError):
    """Edge-list text could not be parsed"""

    def __init__(self, message: str, line_number: int):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class RegularityError(GraphError):
    """Graph is not d-regular"""

    def __init__(self, vertices: Tuple[int, int], degrees: Tuple[int, int]):
        self.vertices = vertices
        self.degrees = degrees
        super().__init__(
            f"graph is not regular: vertex {vertices[0]} has degree {degrees[0]} "
            f"but vertex {vertices[1]} has degree {degrees[1]}"
        )


class ConnectivityError(GraphError):
    """Graph is not connected"""
