"""Transfer operator of an interval map with a spectral gap on Lipschitz
functions but no bounded action on bounded-variation functions."""

__version__ = "0.1.0"

from .function_space import GridFunction, Indicator  # noqa: E402
from .map_core import GapError, MapParams, ParameterError, make_params, make_partition  # noqa: E402
from .transfer import TailBound, apply_L, apply_L_power  # noqa: E402

__all__ = [
    "GridFunction",
    "Indicator",
    "GapError",
    "MapParams",
    "ParameterError",
    "make_params",
    "make_partition",
    "TailBound",
    "apply_L",
    "apply_L_power",
]
