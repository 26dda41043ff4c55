"""Computational laboratory for logarithmic connections on surfaces.

Exact/float sl_N structure constants, formal gauge normalization at a
puncture, numeric monodromy of Fuchsian systems, parabolic cohomology of
surface groups, period cocycles of cusp forms, and the hermitian pairings
that detect transversality of real and holomorphic period subspaces.
"""

__version__ = "0.1.0"

from . import (
    continuation,
    eichler,
    exactscalar,
    hyperbolic,
    jsonio,
    lie,
    pairing,
    series,
    surface,
)

__all__ = [
    "continuation",
    "eichler",
    "exactscalar",
    "hyperbolic",
    "jsonio",
    "lie",
    "pairing",
    "series",
    "surface",
    "__version__",
]
