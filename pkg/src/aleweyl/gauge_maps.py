"""Linear maps between tensor spaces used by the gauge-fixing pipelines.

Each map encodes how one coefficient in a metric expansion responds to a
polynomial or inverse-power coordinate change, or expresses a divergence
(Bianchi-type) constraint on such a coefficient.  All maps act on plain
ndarrays; the ambient dimension is read off the array shape.

Conventions. A rank-3 coefficient ``A[i,j,k]`` is symmetric in (i,j) with
k the monomial index; a rank-4 coefficient ``A[i,j,k,l]`` is symmetric in
(i,j) and in (k,l) with (k,l) the monomial indices.  The curvature
convention is fixed once by :func:`curvature_of_quadratic`: for the metric
g = delta + A.xx the curvature at the origin is ``curvature_of_quadratic(A)``,
and constant sectional curvature K corresponds to
``R[i,j,k,l] = K*(d_il d_jk - d_ik d_jl)``.
"""

from __future__ import annotations

import numpy as np

from .tensors import perm, sym, delta

__all__ = [
    "curvature_of_quadratic",
    "normal_coefficient",
    "sym_pair",
    "weyl_from_sym_pair",
    "linear_shift",
    "quadratic_shift",
    "decay_vector_shift",
    "decay_matrix_shift",
    "bianchi_op1",
    "bianchi_op2",
    "trace_pattern",
    "ricci_from_curvature",
    "gauge_map",
    "GAUGE_MAP_IDS",
]


def _dim(T):
    return T.shape[0]


def _require_sym(T, i, j, what, tol=1e-8):
    scale = max(1.0, float(np.max(np.abs(T))))
    if np.max(np.abs(T - perm(T, *_swap(T.ndim, i, j)))) > tol * scale:
        raise ValueError(f"input not symmetric in slots ({i},{j}): {what}")


def _swap(rank, i, j):
    image = list(range(1, rank + 1))
    image[i - 1], image[j - 1] = j, i
    return image


def curvature_of_quadratic(A: np.ndarray) -> np.ndarray:
    """Curvature tensor at 0 of the metric delta + A.xx (A sym in (12),(34))."""
    _require_sym(A, 1, 2, "quadratic coefficient")
    _require_sym(A, 3, 4, "quadratic coefficient")
    return perm(A, 2, 4, 1, 3) - perm(A, 2, 3, 1, 4) - perm(A, 1, 4, 2, 3) + perm(A, 1, 3, 2, 4)


def normal_coefficient(A: np.ndarray) -> np.ndarray:
    """Quadratic coefficient left after normalizing delta + A.xx at a point.

    Equals -(1/3) * sym_pair(curvature_of_quadratic(A)).
    """
    R = curvature_of_quadratic(A)
    return -(perm(R, 1, 3, 4, 2) + perm(R, 1, 4, 3, 2)) / 6.0


def sym_pair(R: np.ndarray) -> np.ndarray:
    """Symmetric-pair form of a curvature-type tensor: (1/2)[R_(1342)+R_(1432)].

    Injective on curvature tensors; maps Weyl tensors onto the order-m
    coefficients that appear in the normalized expansion at infinity.
    """
    return 0.5 * (perm(R, 1, 3, 4, 2) + perm(R, 1, 4, 3, 2))


def weyl_from_sym_pair(Wt: np.ndarray) -> np.ndarray:
    """Inverse of sym_pair on the image of the Weyl space."""
    return -(2.0 / 3.0) * Wt - (4.0 / 3.0) * perm(Wt, 1, 3, 2, 4)


def linear_shift(B: np.ndarray) -> np.ndarray:
    """Response of the linear metric coefficient to the quadratic change
    x_k -> x_k + B[i,j,k] x_i x_j (B sym in (12)): -2[B_(312)+B_(321)]."""
    _require_sym(B, 1, 2, "quadratic change coefficient")
    return -2.0 * (perm(B, 3, 1, 2) + perm(B, 3, 2, 1))


def quadratic_shift(B: np.ndarray) -> np.ndarray:
    """Response of the quadratic metric coefficient to a cubic change,
    B in R^m (x) S^3: -3[B_(1234)+B_(2134)]."""
    if B.ndim != 4:
        raise ValueError("rank-4 input required")
    for i, j in ((2, 3), (3, 4)):
        _require_sym(B, i, j, "cubic change coefficient")
    return -3.0 * (B + perm(B, 2, 1, 3, 4))


def decay_vector_shift(B: np.ndarray, m: int | None = None) -> np.ndarray:
    """Order-(m-1) coefficient shift from the change x -> x + B/|x|^(m-2)."""
    B = np.asarray(B, dtype=float)
    m = B.shape[0] if m is None else m
    I = delta(m)
    return -(m - 2.0) * (np.einsum("ik,j->ijk", I, B) + np.einsum("jk,i->ijk", I, B))


def decay_matrix_shift(B: np.ndarray) -> np.ndarray:
    """Order-m coefficient shift from the change x_i -> x_i + B[i,j] x_j/|x|^m."""
    B = np.asarray(B, dtype=float)
    m = B.shape[0]
    I = delta(m)
    out = np.einsum("ij,kl->ijkl", B + B.T, I)
    out -= (m / 2.0) * (
        np.einsum("ik,jl->ijkl", B, I)
        + np.einsum("il,jk->ijkl", B, I)
        + np.einsum("jk,il->ijkl", B, I)
        + np.einsum("jl,ik->ijkl", B, I)
    )
    return out


def bianchi_op1(A: np.ndarray) -> np.ndarray:
    """Divergence-gauge constraint operator on the order-(m-1) coefficient.

    Vanishes exactly when the coefficient is compatible with harmonic
    coordinate functions at that order.
    """
    _require_sym(A, 1, 2, "order-(m-1) coefficient")
    m = _dim(A)
    I = delta(m)
    v1 = np.einsum("kaa->k", A)
    v2 = np.einsum("aak->k", A)
    out = 2.0 * np.einsum("ij,k->ijk", I, v1)
    out -= m * (perm(A, 3, 1, 2) + perm(A, 3, 2, 1))
    out -= np.einsum("ij,k->ijk", I, v2)
    out += (m / 2.0) * (np.einsum("ik,j->ijk", I, v2) + np.einsum("jk,i->ijk", I, v2))
    return out


def bianchi_op2(A: np.ndarray) -> np.ndarray:
    """Divergence-gauge constraint operator on the order-m coefficient."""
    _require_sym(A, 1, 2, "order-m coefficient")
    _require_sym(A, 3, 4, "order-m coefficient")
    m = _dim(A)
    I = delta(m)
    M1 = np.einsum("apaq->pq", A)
    M2 = np.einsum("aapq->pq", A)
    pre = 4.0 * np.einsum("il,jk->ijkl", M1, I)
    pre -= 2.0 * (m + 2.0) * perm(A, 3, 1, 2, 4)
    pre -= 2.0 * np.einsum("il,jk->ijkl", M2, I)
    pre += (m + 2.0) * np.einsum("jl,ik->ijkl", M2, I)
    return sym(pre, (2, 3, 4))


def trace_pattern(k: int, B, m: int | None = None) -> np.ndarray:
    """The five delta-product insertions of a 2-tensor into S^2 (x) S^2.

    k=1,2,5 expect trace-free symmetric B, k=3 skew B, k=4 a scalar.
    Pattern 5 equals pattern 2 plus (4/m) pattern 1.
    """
    if k == 4:
        c = float(B)
        if m is None:
            raise ValueError("pattern 4 needs the ambient dimension")
        I = delta(m)
        return c * (
            np.einsum("ik,jl->ijkl", I, I)
            + np.einsum("il,jk->ijkl", I, I)
            - (2.0 / m) * np.einsum("ij,kl->ijkl", I, I)
        )
    B = np.asarray(B, dtype=float)
    m = B.shape[0]
    I = delta(m)
    tol = 1e-8 * max(1.0, float(np.max(np.abs(B))))
    if k in (1, 2, 5):
        if np.max(np.abs(B - B.T)) > tol or abs(np.trace(B)) > tol:
            raise ValueError(f"pattern {k} expects trace-free symmetric input")
    elif k == 3:
        if np.max(np.abs(B + B.T)) > tol:
            raise ValueError("pattern 3 expects skew input")
    else:
        raise ValueError(f"unknown pattern {k}")
    if k == 1:
        return np.einsum("ij,kl->ijkl", I, B)
    spread = (
        np.einsum("jk,il->ijkl", B, I)
        + np.einsum("ik,jl->ijkl", B, I)
        + np.einsum("jl,ik->ijkl", B, I)
        + np.einsum("il,jk->ijkl", B, I)
    )
    if k == 3:
        return spread
    if k == 2:
        return spread - (4.0 / m) * (
            np.einsum("kl,ij->ijkl", B, I) + np.einsum("ij,kl->ijkl", B, I)
        )
    return spread - (4.0 / m) * np.einsum("ij,kl->ijkl", B, I)


def ricci_from_curvature(R: np.ndarray) -> np.ndarray:
    """Ricci tensor in the package curvature convention: -Tr_(13)."""
    return -np.einsum("aiaj->ij", R)


GAUGE_MAP_IDS = (
    "R", "Rtilde", "s", "Psi1", "Psi2", "Psi3", "Psi4", "B1", "B2",
    "Xi1", "Xi2", "Xi3", "Xi4", "Xi5",
)


def gauge_map(map_id: str, T, m: int | None = None) -> np.ndarray:
    """Dispatch by wire-format id (see GAUGE_MAP_IDS)."""
    table = {
        "R": curvature_of_quadratic,
        "Rtilde": normal_coefficient,
        "s": sym_pair,
        "Psi1": linear_shift,
        "Psi2": quadratic_shift,
        "Psi3": lambda B: decay_vector_shift(B, m),
        "Psi4": decay_matrix_shift,
        "B1": bianchi_op1,
        "B2": bianchi_op2,
    }
    if map_id in table:
        return table[map_id](T)
    if map_id.startswith("Xi"):
        k = int(map_id[2:])
        return trace_pattern(k, T, m)
    raise ValueError(f"unknown gauge map id {map_id!r}")
