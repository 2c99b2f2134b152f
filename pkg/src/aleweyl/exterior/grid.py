"""Annulus grids on exterior domains and discrete weighted-norm proxies.

The radial grid is geometric, ``r_i = R * 2**(i/ppo)``, grouped into dyadic
octaves; the angular rule is a product quadrature on S^(m-1) built from
Gauss-Jacobi nodes in the polar angles and a uniform azimuth, exact for
polynomials up to the requested degree.

The weighted norm here is a deliberate proxy for the scaling-invariant
Hölder norm sup_r r^beta |f o S_r|_{C^alpha}: per octave it combines the
sup, first difference quotients at two step scales (radial and angular),
and a fractional second-difference quotient, all measured after rescaling
the octave to a unit annulus.  It is scale-consistent and monotone in the
resolution, which is what the solver certificates need; it is not a true
supremum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

__all__ = [
    "sphere_quadrature",
    "sphere_area",
    "AnnulusGrid",
    "WeightedField",
    "weighted_norm",
]


def sphere_area(m: int) -> float:
    """|S^(m-1)| = 2 pi^(m/2) / Gamma(m/2)."""
    return 2.0 * math.pi ** (m / 2.0) / math.gamma(m / 2.0)


def sphere_quadrature(m: int, degree: int):
    """Product quadrature on S^(m-1), exact for polynomials of total degree
    <= degree.  Returns (nodes, weights) with nodes of shape (K, m) and
    sum(weights) = |S^(m-1)|.
    """
    if m < 3:
        raise ValueError("dimension must be >= 3")
    n_polar = max(2, (degree + 2) // 2)
    n_phi = max(4, degree + 1)
    # polar angles theta_k with measure sin^(m-1-k), k = 1..m-2
    grids = []
    for k in range(1, m - 1):
        p = m - 1 - k
        t, w = roots_jacobi(n_polar, (p - 1) / 2.0, (p - 1) / 2.0)
        grids.append((t, w))
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * math.pi / n_phi)

    nodes = np.zeros((1, 0))
    weights = np.ones(1)
    sines = np.ones(1)  # running product of sin(theta_k)
    for (t, w) in grids:
        nn = nodes.shape[0]
        new_nodes = np.zeros((nn * t.size, nodes.shape[1] + 1))
        new_weights = np.zeros(nn * t.size)
        new_sines = np.zeros(nn * t.size)
        for a in range(t.size):
            sl = slice(a * nn, (a + 1) * nn)
            new_nodes[sl, : nodes.shape[1]] = nodes
            new_nodes[sl, -1] = sines * t[a]
            new_weights[sl] = weights * w[a]
            new_sines[sl] = sines * math.sqrt(max(0.0, 1.0 - t[a] ** 2))
        nodes, weights, sines = new_nodes, new_weights, new_sines
    nn = nodes.shape[0]
    out_nodes = np.zeros((nn * n_phi, m))
    out_weights = np.zeros(nn * n_phi)
    for a in range(n_phi):
        sl = slice(a * nn, (a + 1) * nn)
        out_nodes[sl, : m - 2] = nodes
        out_nodes[sl, m - 2] = sines * math.cos(phi[a])
        out_nodes[sl, m - 1] = sines * math.sin(phi[a])
        out_weights[sl] = weights * wphi[a]
    # coordinate convention above fills x_1..x_{m-2} from the polar angles
    return out_nodes, out_weights


@dataclass(frozen=True)
class AnnulusGrid:
    """Geometric radial grid times a product sphere rule."""

    dim: int
    inner_radius: float
    octaves: int
    points_per_octave: int = 16
    angular_degree: int = 12
    radii: np.ndarray = field(init=False, repr=False)
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.inner_radius <= 0 or self.octaves < 1:
            raise ValueError("need a positive inner radius and >= 1 octave")
        n = self.octaves * self.points_per_octave + 1
        i = np.arange(n)
        radii = self.inner_radius * 2.0 ** (i / self.points_per_octave)
        nodes, weights = sphere_quadrature(self.dim, self.angular_degree)
        total = weights.sum()
        if abs(total - sphere_area(self.dim)) > 1e-10 * total:
            raise AssertionError("sphere rule failed its area check")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_pairs", _angular_pairs(nodes))

    @property
    def n_radii(self) -> int:
        return self.radii.size

    @property
    def n_angular(self) -> int:
        return self.nodes.shape[0]

    def points(self) -> np.ndarray:
        """(n_radii, n_angular, m) array of sample points."""
        return self.radii[:, None, None] * self.nodes[None, :, :]

    def flat_points(self) -> np.ndarray:
        return self.points().reshape(-1, self.dim)

    def octave_slices(self):
        ppo = self.points_per_octave
        return [slice(j * ppo, (j + 1) * ppo + 1) for j in range(self.octaves)]

    def octave_radii(self) -> np.ndarray:
        return self.inner_radius * 2.0 ** np.arange(self.octaves)

    def restrict(self, new_inner: float) -> "AnnulusGrid":
        """Grid with the same resolution starting at a larger inner radius."""
        if new_inner < self.inner_radius:
            raise ValueError("can only restrict outward")
        k = int(round(math.log2(new_inner / self.inner_radius)))
        if k == 0:
            return self
        return AnnulusGrid(
            self.dim,
            self.inner_radius * 2.0**k,
            max(1, self.octaves - k),
            self.points_per_octave,
            self.angular_degree,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "inner_radius": self.inner_radius,
                "octaves": self.octaves,
                "points_per_octave": self.points_per_octave,
                "angular_degree": self.angular_degree,
                "radii": self.radii.tolist(),
                "nodes": self.nodes.tolist(),
                "weights": self.weights.tolist(),
            }
        )


def _angular_pairs(nodes: np.ndarray):
    """Index pairs of nearest and next-nearest angular neighbors."""
    d2 = np.sum((nodes[:, None, :] - nodes[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1)
    first = order[:, 0]
    second = order[:, 1]
    idx = np.arange(nodes.shape[0])
    dist1 = np.sqrt(d2[idx, first])
    dist2 = np.sqrt(d2[idx, second])
    return (idx, first, dist1), (idx, second, dist2)


@dataclass
class WeightedField:
    """Sampled scalar or vector field with weighted-norm metadata."""

    grid: AnnulusGrid
    values: np.ndarray  # (n_r, n_ang) or (n_r, n_ang, m)
    alpha: float = 1.5
    beta: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expect = (self.grid.n_radii, self.grid.n_angular)
        if v.shape != expect and v.shape != expect + (self.grid.dim,):
            raise ValueError(f"field shape {v.shape} does not match the grid")
        self.values = v

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 3

    def component(self, i: int) -> "WeightedField":
        return WeightedField(self.grid, self.values[:, :, i], self.alpha, self.beta)

    def __add__(self, other):
        return WeightedField(self.grid, self.values + other.values, self.alpha, self.beta)

    def __sub__(self, other):
        return WeightedField(self.grid, self.values - other.values, self.alpha, self.beta)

    def __mul__(self, c: float):
        return WeightedField(self.grid, self.values * float(c), self.alpha, self.beta)

    __rmul__ = __mul__

    @classmethod
    def from_function(cls, grid: AnnulusGrid, fn, alpha=1.5, beta=1.0):
        pts = grid.flat_points()
        vals = np.asarray(fn(pts))
        if vals.ndim == 1:
            vals = vals.reshape(grid.n_radii, grid.n_angular)
        else:
            vals = vals.reshape(grid.n_radii, grid.n_angular, -1)
        return cls(grid, vals, alpha, beta)

    def octave_sup(self) -> np.ndarray:
        """Per-octave sup of |f| (vector fields: euclidean magnitude)."""
        mag = self.values if not self.is_vector else np.linalg.norm(self.values, axis=2)
        return np.array([np.max(np.abs(mag[sl])) for sl in self.grid.octave_slices()])

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": self.alpha,
                "beta": self.beta,
                "values": self.values.tolist(),
                "radii": self.grid.radii.tolist(),
            }
        )


def _octave_seminorms(field: WeightedField, sl: slice, r_ann: float, alpha: float):
    """sup + difference quotients on one octave rescaled to the unit annulus."""
    g = field.grid
    v = field.values[sl]
    if field.is_vector:
        v = np.linalg.norm(v, axis=2)
    radii = g.radii[sl]
    sup = float(np.max(np.abs(v)))
    quot1 = 0.0
    quot_frac = 0.0
    frac = alpha - math.floor(alpha)
    # radial differences at one and two steps
    for step in (1, 2):
        if v.shape[0] > step:
            dr = (radii[step:] - radii[:-step]) / r_ann
            dv = np.abs(v[step:] - v[:-step])
            quot1 = max(quot1, float(np.max(dv / dr[:, None])))
            if v.shape[0] > 2 * step and frac > 0:
                d2 = np.abs(v[2 * step:] - 2.0 * v[step:-step] + v[: -2 * step])
                h = dr[:-step]
                quot_frac = max(
                    quot_frac, float(np.max(d2 / (h[:, None] ** min(alpha, 2.0))))
                )
    # angular differences: nearest and next-nearest neighbor pairs
    for (ia, ib, dist) in field.grid._pairs:
        scale = radii[:, None] / r_ann  # unit-annulus separation is r*dist/r_ann
        dv = np.abs(v[:, ia] - v[:, ib])
        quot1 = max(quot1, float(np.max(dv / (dist[None, :] * scale))))
    return sup, quot1, quot_frac


def weighted_norm(field: WeightedField, alpha: float | None = None, beta: float | None = None):
    """Discrete proxy of sup_r r^beta |f o S_r|_{C^alpha}; see module docstring.

    Returns (norm, per_octave) where per_octave lists the weighted octave
    contributions.
    """
    alpha = field.alpha if alpha is None else alpha
    beta = field.beta if beta is None else beta
    g = field.grid
    per = []
    for j, sl in enumerate(g.octave_slices()):
        r_ann = g.radii.flat[sl.start]
        sup, q1, qf = _octave_seminorms(field, sl, r_ann, alpha)
        per.append(r_ann**beta * (sup + q1 + qf))
    return float(np.max(per)), np.array(per)
