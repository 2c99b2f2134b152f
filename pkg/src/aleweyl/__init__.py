"""Coordinate normalization machinery for asymptotically flat Ricci-flat ends.

Subpackages and modules:

- ``tensors``     dense multilinear algebra primitives
- ``gauge_maps``  the linear maps coupling coordinate changes to expansion coefficients
- ``spaces``      named tensor subspaces, projectors, decomposition solvers
- ``jets``        order-2 normal form of a metric at a point
- ``infinity``    expansion-level gauge pipeline at infinity
- ``exterior``    weighted norms, exterior Poisson solver, harmonic-map correction
- ``models``      metric catalog (flat, quotients, Weyl-leading, gravitational instanton)
- ``volume``      renormalized volume, mean-curvature and isoperimetric diagnostics
- ``cli``         command-line entry points
"""

__version__ = "0.1.0"
