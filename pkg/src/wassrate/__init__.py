"""Minimax Wasserstein estimation on finite metric spaces.

Exact optimal transport, covering and packing computations, nested
multi-resolution partition bounds, closed-form risk bounds and a Monte Carlo
harness for empirical convergence rates.
"""

from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from . import errors  # noqa: E402
from .metric import (  # noqa: E402
    DiscreteMeasure,
    FiniteMetricSpace,
    MomentEstimate,
    diameter,
    metric_moment,
    separation,
    validate_space,
)
from .partitions import (  # noqa: E402
    CountBound,
    NestedSequence,
    Partition,
    build_nested_sequence,
    covering_number,
    disjointify,
    packing_number,
    packing_radius,
    refine_coarsen,
    resolution,
)

__all__ = [
    "errors",
    "DiscreteMeasure",
    "FiniteMetricSpace",
    "MomentEstimate",
    "diameter",
    "metric_moment",
    "separation",
    "validate_space",
    "CountBound",
    "NestedSequence",
    "Partition",
    "build_nested_sequence",
    "covering_number",
    "disjointify",
    "packing_number",
    "packing_radius",
    "refine_coarsen",
    "resolution",
]
