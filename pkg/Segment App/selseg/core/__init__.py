from .errors import (
    CoarseSolverError,
    DegenerateRegionError,
    DimensionError,
    DivergenceError,
    FormatError,
    NumericError,
    ParameterError,
    SelsegError,
    SingularSystemError,
)
from .grid import Field2D, GridHierarchy, build_hierarchy, interpolate, restrict

__all__ = [
    "CoarseSolverError",
    "DegenerateRegionError",
    "DimensionError",
    "DivergenceError",
    "FormatError",
    "NumericError",
    "ParameterError",
    "SelsegError",
    "SingularSystemError",
    "Field2D",
    "GridHierarchy",
    "build_hierarchy",
    "interpolate",
    "restrict",
]
