"""Exception types shared across the package."""


class DeffuantLabError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(DeffuantLabError):
    """Vector dimension does not match the norm or space."""


class UnsupportedGeometryError(DeffuantLabError):
    """Shape/norm pairing with no closed form; never silently estimated."""


class StructureError(DeffuantLabError):
    """Self-loop, duplicate edge, or out-of-range vertex id."""


class ConnectivityError(DeffuantLabError):
    """Graph is not connected.  Carries one unreachable vertex."""

    def __init__(self, vertex: int, message: str | None = None):
        self.vertex = vertex
        super().__init__(message or f"graph is not connected: vertex {vertex} unreachable from 0")


class EdgeListParseError(DeffuantLabError):
    """Malformed edge-list text.  Carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class SamplingError(DeffuantLabError):
    """Rejection sampler exceeded its rejection guard."""


class NoClosedFormError(DeffuantLabError):
    """Distribution has no analytic disagreement moment; use the MC estimator."""


class InapplicableBoundError(DeffuantLabError):
    """Bound requested outside its validity region (threshold too small)."""
