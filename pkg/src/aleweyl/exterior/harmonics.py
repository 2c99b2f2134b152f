"""Spherical harmonics on S^(m-1) as restricted harmonic polynomials.

Degree-l harmonics are built as the null space of the polynomial Laplacian
on homogeneous degree-l monomials, then orthonormalized against the grid's
sphere rule (blockwise per degree; distinct degrees are orthogonal exactly
once the rule integrates degree 2*lmax).  Works for any ambient dimension,
which is what lets the solver run the same code path for m = 3, 4 and the
restricted mode set used for m > 4.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

__all__ = ["HarmonicBasis", "harmonic_dimension"]


def harmonic_dimension(m: int, l: int) -> int:
    """dim of degree-l spherical harmonics on S^(m-1)."""
    if l == 0:
        return 1
    if l == 1:
        return m
    return _n_monomials(m, l) - _n_monomials(m, l - 2)


def _n_monomials(m, d):
    from math import comb

    return comb(m + d - 1, d)


def _monomial_exponents(m, d):
    out = []
    for combo in combinations_with_replacement(range(m), d):
        e = np.zeros(m, dtype=int)
        for c in combo:
            e[c] += 1
        out.append(e)
    return np.array(out).reshape(-1, m) if out else np.zeros((1, m), dtype=int)


def _laplacian_matrix(m, d):
    """Matrix of the flat Laplacian from degree-d to degree-(d-2) monomials."""
    src = _monomial_exponents(m, d)
    dst = _monomial_exponents(m, d - 2)
    index = {tuple(e): i for i, e in enumerate(dst)}
    M = np.zeros((dst.shape[0], src.shape[0]))
    for j, e in enumerate(src):
        for a in range(m):
            if e[a] >= 2:
                f = e.copy()
                f[a] -= 2
                M[index[tuple(f)], j] += e[a] * (e[a] - 1)
    return M


def _nullspace(M, tol=1e-10):
    u, s, vt = np.linalg.svd(M, full_matrices=True)
    if s.size == 0:
        return vt
    r = int(np.sum(s > tol * s[0]))
    return vt[r:]


def _eval_monomials(exps, pts):
    """(n_pts, n_mono) monomial values."""
    return np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)


@dataclass(frozen=True)
class HarmonicBasis:
    """Orthonormal harmonics through degree lmax, tabulated on a sphere rule."""

    dim: int
    lmax: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        coeffs = []   # per degree: (n_harm, n_mono)
        exps = []     # per degree: (n_mono, m)
        values = []   # per degree: (n_harm, n_nodes)
        for l in range(self.lmax + 1):
            E = _monomial_exponents(self.dim, l)
            if l < 2:
                C = np.eye(E.shape[0])
            else:
                C = _nullspace(_laplacian_matrix(self.dim, l))
            if C.shape[0] != harmonic_dimension(self.dim, l):
                raise AssertionError(f"harmonic count mismatch at degree {l}")
            V = C @ _eval_monomials(E, self.nodes).T
            gram = (V * self.weights[None, :]) @ V.T
            evals, evecs = np.linalg.eigh(gram)
            if np.min(evals) <= 1e-10 * np.max(evals):
                raise ValueError(
                    f"sphere rule cannot resolve degree-{l} harmonics; "
                    f"use a rule exact to degree >= {2 * l}"
                )
            inv_sqrt = evecs @ np.diag(evals**-0.5) @ evecs.T
            C = inv_sqrt @ C
            V = inv_sqrt @ V
            coeffs.append(C)
            exps.append(E)
            values.append(V)
        object.__setattr__(self, "_coeffs", coeffs)
        object.__setattr__(self, "_exps", exps)
        object.__setattr__(self, "_values", values)
        object.__setattr__(self, "_table", np.concatenate(values, axis=0))
        degrees = np.concatenate(
            [np.full(values[l].shape[0], l, dtype=int) for l in range(self.lmax + 1)]
        )
        object.__setattr__(self, "degrees", degrees)

    @property
    def n_modes(self) -> int:
        return self._table.shape[0]

    def mode_slices(self):
        out = []
        start = 0
        for l in range(self.lmax + 1):
            n = self._values[l].shape[0]
            out.append((l, slice(start, start + n)))
            start += n
        return out

    def project(self, sphere_values: np.ndarray) -> np.ndarray:
        """Coefficients of the tabulated values: (..., n_nodes) -> (..., n_modes)."""
        return np.tensordot(sphere_values * self.weights, self._table.T, axes=1)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return np.tensordot(coeffs, self._table, axes=1)

    def eval_at(self, l: int, unit_pts: np.ndarray) -> np.ndarray:
        """Degree-l harmonics at unit vectors: (n_harm_l, n_pts)."""
        return self._coeffs[l] @ _eval_monomials(self._exps[l], unit_pts).T

    def poly_eval(self, l: int, pts: np.ndarray) -> np.ndarray:
        """The underlying homogeneous harmonic polynomials at arbitrary points."""
        return self._coeffs[l] @ _eval_monomials(self._exps[l], pts).T

    def poly_grad(self, l: int, pts: np.ndarray) -> np.ndarray:
        """Gradients of the degree-l harmonic polynomials: (n_harm_l, n_pts, m)."""
        E = self._exps[l]
        n_pts = pts.shape[0]
        out = np.zeros((self._coeffs[l].shape[0], n_pts, self.dim))
        for a in range(self.dim):
            Ea = E.copy()
            mask = Ea[:, a] > 0
            if not np.any(mask):
                continue
            Ea = Ea[mask]
            coef = E[mask, a].astype(float)
            Ea = Ea.copy()
            Ea[:, a] -= 1
            vals = _eval_monomials(Ea, pts) * coef[None, :]
            out[:, :, a] = self._coeffs[l][:, mask] @ vals.T
        return out

    def degree_one_vector(self, coeffs_l1: np.ndarray) -> np.ndarray:
        """Convert degree-1 coefficients to the coordinate representation:
        sum_k c_k P_k(x) = (v . x) returns v."""
        return self._coeffs[1].T @ coeffs_l1


@lru_cache(maxsize=None)
def basis_for(m: int, lmax: int, degree: int):
    from .grid import sphere_quadrature

    nodes, weights = sphere_quadrature(m, degree)
    return HarmonicBasis(m, lmax, nodes, weights)
