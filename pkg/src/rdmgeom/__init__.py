"""Geometry of expectation-value sets: ground and Gibbs states on convex-body surfaces."""
__version__ = "0.1.0"

from .core import (AXES, MODEL_TAGS, Direction3, ExpectationPoint, SeededRng,  # noqa: E402
                   SpinParams, axis_labels)

__all__ = ["AXES", "MODEL_TAGS", "Direction3", "ExpectationPoint", "SeededRng", "SpinParams",
           "axis_labels", "__version__"]
