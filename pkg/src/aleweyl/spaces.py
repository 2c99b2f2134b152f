"""Named subspaces of low-rank tensor spaces, with bases and projectors.

Primitive spaces (symmetric / skew / traceless families) get explicit
orthonormal bases; constrained spaces (curvature-type, fully traceless)
are cut out of a product basis by small null-space computations; image
spaces are generated by applying the defining map to a domain basis and
orthonormalizing with a rank-revealing SVD (relative tolerance 1e-8).

Also hosts the concrete decomposition solvers used by the normal-form
pipelines: the Y1/Y2/traceless split of rank-3 coefficients, the
curvature/cubic-change split of rank-4 coefficients, the five-way split
of trace-free rank-4 coefficients, and the reduction of a divergence-free
coefficient to its Weyl part.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import gauge_maps as gm
from .tensors import perm, delta, norm, sym_part, skew_part

__all__ = [
    "TensorSpace",
    "SPACE_IDS",
    "space_basis",
    "is_member",
    "space_dim_formula",
    "dims_table",
    "decompose_s2_rm",
    "split_curvature",
    "decompose_s2_s20",
    "weyl_reduce",
    "map_matrix",
    "kernel_basis",
    "image_basis",
    "span_equal",
    "exact_rank",
    "integer_spanning_set",
]

SPACE_IDS = (
    "S2", "S2_0", "Lambda2", "S3",
    "S2xRm", "RmxS3", "S2xS2", "S2xS2_0",
    "C", "W", "Ctilde", "Wtilde",
    "Y1", "Y2", "H21",
    "Z1", "Z2", "Z3", "Z4", "Z5", "H22",
)

_RANK = {
    "S2": 2, "S2_0": 2, "Lambda2": 2, "S3": 3,
    "S2xRm": 3, "RmxS3": 4, "S2xS2": 4, "S2xS2_0": 4,
    "C": 4, "W": 4, "Ctilde": 4, "Wtilde": 4,
    "Y1": 3, "Y2": 3, "H21": 3,
    "Z1": 4, "Z2": 4, "Z3": 4, "Z4": 4, "Z5": 4, "H22": 4,
}

RANK_TOL = 1e-8


@dataclass(frozen=True)
class TensorSpace:
    """Orthonormal basis (rows, flattened) of a subspace of rank-k tensors."""

    space_id: str
    dim_ambient: int
    rank: int
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def _shape(self):
        return (self.dim_ambient,) * self.rank

    def coords(self, T: np.ndarray) -> np.ndarray:
        return self.basis @ np.asarray(T, dtype=float).reshape(-1)

    def from_coords(self, c: np.ndarray) -> np.ndarray:
        return (np.asarray(c, dtype=float) @ self.basis).reshape(self._shape())

    def project(self, T: np.ndarray) -> np.ndarray:
        return self.from_coords(self.coords(T))

    def contains(self, T: np.ndarray, tol: float = 1e-10) -> bool:
        T = np.asarray(T, dtype=float)
        return norm(T - self.project(T)) <= tol * max(1.0, norm(T))

    def projector_matrix(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def basis_tensors(self):
        return [self.basis[i].reshape(self._shape()) for i in range(self.dim)]

    def to_json(self) -> str:
        """Basis as a JSON array of flat row-major tensors."""
        import json

        return json.dumps(
            {
                "space": self.space_id,
                "dim_ambient": self.dim_ambient,
                "rank": self.rank,
                "basis": [row.tolist() for row in self.basis],
            }
        )


def _orthonormal_rows(rows: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Rank-revealing orthonormalization of a spanning set (rows)."""
    rows = np.asarray(rows, dtype=float)
    if rows.size == 0:
        return rows.reshape(0, rows.shape[-1] if rows.ndim == 2 else 0)
    u, s, vt = np.linalg.svd(rows, full_matrices=False)
    r = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return vt[:r]


def _nullspace_rows(A: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (rows) of the null space of A."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.eye(A.shape[1])
    u, s, vt = np.linalg.svd(A, full_matrices=True)
    if s.size == 0 or s[0] == 0:
        return vt
    r = int(np.sum(s > tol * s[0]))
    return vt[r:]


def _sym2_basis(m):
    rows = []
    for i in range(m):
        e = np.zeros((m, m))
        e[i, i] = 1.0
        rows.append(e.reshape(-1))
    for i in range(m):
        for j in range(i + 1, m):
            e = np.zeros((m, m))
            e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
            rows.append(e.reshape(-1))
    return np.array(rows)


def _skew2_basis(m):
    rows = []
    for i in range(m):
        for j in range(i + 1, m):
            e = np.zeros((m, m))
            e[i, j] = 1.0 / np.sqrt(2.0)
            e[j, i] = -e[i, j]
            rows.append(e.reshape(-1))
    return np.array(rows)


def _sym3_basis(m):
    from itertools import combinations_with_replacement, permutations

    rows = []
    for idx in combinations_with_replacement(range(m), 3):
        e = np.zeros((m, m, m))
        for p in set(permutations(idx)):
            e[p] = 1.0
        rows.append(e.reshape(-1) / np.linalg.norm(e))
    return np.array(rows)


def _product_basis(left: np.ndarray, right: np.ndarray):
    # rows of the tensor product of two orthonormal row families
    n1, n2 = left.shape[0], right.shape[0]
    out = np.einsum("ip,jq->ijpq", left, right).reshape(n1 * n2, -1)
    return out


def _trace_rows(basis: np.ndarray, m: int, rank: int, pairs):
    """Matrix of the listed slot traces restricted to the given basis rows.

    ``pairs`` are 0-based tensor slots; axis 0 of the stacked array is the
    basis index.
    """
    tens = basis.reshape((-1,) + (m,) * rank)
    blocks = []
    for (i, j) in pairs:
        tr = np.trace(tens, axis1=i + 1, axis2=j + 1)
        blocks.append(tr.reshape(tens.shape[0], -1))
    return np.concatenate(blocks, axis=1).T


def _apply_to_rows(fn, basis: np.ndarray, m: int, rank: int):
    cols = [fn(basis[i].reshape((m,) * rank)).reshape(-1) for i in range(basis.shape[0])]
    return np.array(cols)


@lru_cache(maxsize=None)
def space_basis(space_id: str, m: int) -> TensorSpace:
    """Generate the named subspace of tensors on R^m."""
    if space_id not in SPACE_IDS:
        raise ValueError(f"unknown space id {space_id!r}")
    if m < 3:
        raise ValueError("dimension must be >= 3")
    rank = _RANK[space_id]
    basis = _build_basis(space_id, m)
    return TensorSpace(space_id, m, rank, basis)


def _build_basis(space_id, m):
    if space_id == "S2":
        return _sym2_basis(m)
    if space_id == "Lambda2":
        return _skew2_basis(m)
    if space_id == "S2_0":
        s2 = _sym2_basis(m)
        tr = _trace_rows(s2, m, 2, [(0, 1)])
        return _nullspace_rows(tr) @ s2
    if space_id == "S3":
        return _sym3_basis(m)
    if space_id == "S2xRm":
        return _product_basis(_sym2_basis(m), np.eye(m))
    if space_id == "RmxS3":
        return _product_basis(np.eye(m), _sym3_basis(m))
    if space_id == "S2xS2":
        s2 = _sym2_basis(m)
        return _product_basis(s2, s2)
    if space_id == "S2xS2_0":
        return _product_basis(_sym2_basis(m), _build_basis("S2_0", m))
    if space_id == "H21":
        b = _build_basis("S2xRm", m)
        rows = _trace_rows(b, m, 3, [(0, 1), (0, 2)])
        return _nullspace_rows(rows) @ b
    if space_id == "C":
        lam = _skew2_basis(m)
        b = _product_basis(lam, lam)
        tens = b.reshape(-1, m, m, m, m)
        pairswap = (tens - np.transpose(tens, (0, 3, 4, 1, 2))).reshape(b.shape[0], -1)
        bianchi = (
            tens
            + np.transpose(tens, (0, 1, 3, 4, 2))
            + np.transpose(tens, (0, 1, 4, 2, 3))
        ).reshape(b.shape[0], -1)
        rows = np.concatenate([pairswap, bianchi], axis=1).T
        return _nullspace_rows(rows) @ b
    if space_id == "W":
        c = _build_basis("C", m)
        rows = _trace_rows(c, m, 4, [(0, 2)])
        return _nullspace_rows(rows) @ c
    if space_id == "H22":
        b = _build_basis("S2xS2", m)
        rows = _trace_rows(b, m, 4, [(0, 1), (2, 3), (0, 2)])
        return _nullspace_rows(rows) @ b
    if space_id == "Ctilde":
        dom = _build_basis("C", m)
        return _orthonormal_rows(_apply_to_rows(gm.sym_pair, dom, m, 4))
    if space_id == "Wtilde":
        dom = _build_basis("W", m)
        if dom.shape[0] == 0:
            return np.zeros((0, m ** 4))
        return _orthonormal_rows(_apply_to_rows(gm.sym_pair, dom, m, 4))
    if space_id == "Y1":
        I = delta(m)
        rows = [np.einsum("ij,k->ijk", I, e).reshape(-1) for e in np.eye(m)]
        return _orthonormal_rows(np.array(rows))
    if space_id == "Y2":
        rows = [gm.decay_vector_shift(e, m).reshape(-1) for e in np.eye(m)]
        return _orthonormal_rows(np.array(rows))
    if space_id in ("Z1", "Z2", "Z5"):
        k = int(space_id[1])
        dom = _build_basis("S2_0", m)
        rows = [gm.trace_pattern(k, dom[i].reshape(m, m)).reshape(-1) for i in range(dom.shape[0])]
        return _orthonormal_rows(np.array(rows))
    if space_id == "Z3":
        dom = _skew2_basis(m)
        rows = [gm.trace_pattern(3, dom[i].reshape(m, m)).reshape(-1) for i in range(dom.shape[0])]
        return _orthonormal_rows(np.array(rows))
    if space_id == "Z4":
        return _orthonormal_rows(gm.trace_pattern(4, 1.0, m).reshape(1, -1))
    raise AssertionError(space_id)


def is_member(space_id: str, T: np.ndarray, tol: float = 1e-10, m: int | None = None) -> bool:
    """Relative-distance membership test against the generated projector."""
    T = np.asarray(T, dtype=float)
    m = T.shape[0] if m is None else m
    return space_basis(space_id, m).contains(T, tol)


def space_dim_formula(space_id: str, m: int) -> int:
    """Closed-form dimension counts used as cross-checks on the generators."""
    s2 = m * (m + 1) // 2
    lam = m * (m - 1) // 2
    s3 = m * (m + 1) * (m + 2) // 6
    table = {
        "S2": s2,
        "S2_0": s2 - 1,
        "Lambda2": lam,
        "S3": s3,
        "S2xRm": s2 * m,
        "RmxS3": m * s3,
        "S2xS2": s2 * s2,
        "S2xS2_0": s2 * (s2 - 1),
        "C": m * m * (m * m - 1) // 12,
        "W": m * (m + 1) * (m + 2) * (m - 3) // 12,
        "Ctilde": m * m * (m * m - 1) // 12,
        "Wtilde": m * (m + 1) * (m + 2) * (m - 3) // 12,
        "Y1": m,
        "Y2": m,
        "H21": s2 * m - 2 * m,
        "Z1": s2 - 1,
        "Z2": s2 - 1,
        "Z3": lam,
        "Z4": 1,
        "Z5": s2 - 1,
        "H22": s2 * s2 - s2 - (2 * (s2 - 1) + lam + 1),
    }
    return table[space_id]


def dims_table(ms, ids=SPACE_IDS):
    """(space x m) dimension table as CSV rows."""
    rows = [["space"] + [f"m={m}" for m in ms]]
    for sid in ids:
        rows.append([sid] + [str(space_basis(sid, m).dim) for m in ms])
    return rows


# ---------------------------------------------------------------------------
# decomposition solvers


def decompose_s2_rm(A: np.ndarray):
    """Split A (sym in (12)) into delta-trace parts and a totally traceless part.

    Returns (B, Bp, H) with
    A = [d_(12) B_(3)] + [d_(13) Bp_(2) + d_(23) Bp_(1)] + H.
    The two vectors solve the 2x2 trace system with matrix ((m,2),(1,m+1));
    its determinant m(m+1)-2 is nonzero for every m >= 2.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    t12 = np.einsum("aak->k", A)
    t13 = np.einsum("aka->k", A)
    det = m * (m + 1.0) - 2.0
    B = ((m + 1.0) * t12 - 2.0 * t13) / det
    Bp = (m * t13 - t12) / det
    I = delta(m)
    y1 = np.einsum("ij,k->ijk", I, B)
    y2 = np.einsum("ik,j->ijk", I, Bp) + np.einsum("jk,i->ijk", I, Bp)
    H = A - y1 - y2
    return B, Bp, H


def split_curvature(A: np.ndarray):
    """Split A (sym in (12),(34)) into its curvature-type part and the part
    removable by a cubic coordinate change.

    Returns (Ct, B) with Ct = normal_coefficient(A), quadratic_shift(B) = A - Ct.
    """
    A = np.asarray(A, dtype=float)
    Ct = gm.normal_coefficient(A)
    B = -(
        2.0 * A
        + 2.0 * perm(A, 1, 3, 2, 4)
        + 2.0 * perm(A, 1, 4, 2, 3)
        - perm(A, 3, 4, 1, 2)
        - perm(A, 2, 3, 1, 4)
        - perm(A, 2, 4, 1, 3)
    ) / 18.0
    return Ct, B


def decompose_s2_s20(A: np.ndarray, tol: float = 1e-8):
    """Five-way split of A in S^2 (x) S^2_0 along the trace-pattern subspaces.

    Returns a dict with components z1, z2, z3, z4, h and the generating data
    (b1 in S^2_0, b2 in S^2_0, b3 skew, c4 scalar). The pieces sum to A and
    h is totally traceless.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    tr34 = np.einsum("ijaa->ij", A)
    if norm(tr34) > tol * max(1.0, norm(A)):
        raise ValueError("input is not trace-free in its last two slots")
    # sanitize the extracted generators: in exact arithmetic b1 is symmetric
    # trace-free (tr T12 A = T12 T34 A = 0), but fitted inputs carry rounding
    b1 = sym_part(np.einsum("aakl->kl", A)) / m
    b1 -= np.trace(b1) / m * np.eye(m)
    z1 = gm.trace_pattern(1, b1) if norm(b1) > 0 else np.zeros_like(A)
    Ap = A - z1
    t = np.einsum("iaal->il", Ap)
    tsym = sym_part(t)
    c4 = np.trace(tsym) / m
    b2 = (tsym - c4 * np.eye(m)) / (m + 2.0 - 8.0 / m)
    b2 -= np.trace(b2) / m * np.eye(m)
    b3 = skew_part(t) / (m + 2.0)
    c4 = c4 / (m + 1.0 - 2.0 / m)
    z2 = gm.trace_pattern(2, b2)
    z3 = gm.trace_pattern(3, b3)
    z4 = gm.trace_pattern(4, c4, m)
    h = Ap - z2 - z3 - z4
    return {
        "z1": z1, "z2": z2, "z3": z3, "z4": z4, "h": h,
        "b1": b1, "b2": b2, "b3": b3, "c4": c4,
    }


def weyl_reduce(A: np.ndarray, tol: float = 1e-8):
    """Reduce a trace-free, divergence-constraint-free coefficient to Weyl form.

    For A with vanishing (34)-trace and bianchi_op2(A) = 0, returns the unique
    B and Wt with A + decay_matrix_shift(B) = Wt totally traceless and
    divergence-free.  B is unique because the decay-matrix shift is injective;
    Tr(B) vanishes exactly when A has no pure-trace (delta-pattern) component.
    The pure-trace pattern does lie in the constraint kernel: it is the flat
    metric's Lie derivative along the decaying harmonic field x/|x|^m, so it
    must be absorbed here rather than rejected.  Raises ValueError naming the
    violated constraint otherwise.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    scale = max(1.0, norm(A))
    tr34 = np.einsum("ijaa->ij", A)
    if norm(tr34) > tol * scale:
        raise ValueError(f"trace over slots (3,4) is nonzero: {norm(tr34):.3e}")
    b2res = norm(gm.bianchi_op2(A))
    if b2res > tol * scale * m ** 2:
        raise ValueError(f"divergence constraint violated: |B2(A)| = {b2res:.3e}")
    parts = decompose_s2_s20(A, tol=tol)
    # kernel membership ties the two trace families together
    z5gap = norm(parts["b1"] - (4.0 / m) * parts["b2"])
    if z5gap > tol * scale:
        raise ValueError(f"trace components incompatible with the kernel: {z5gap:.3e}")
    B = (2.0 / m) * (parts["b2"] + parts["b3"]) + (parts["c4"] / m) * np.eye(m)
    Wt = A + gm.decay_matrix_shift(B)
    return B, Wt


# ---------------------------------------------------------------------------
# matrices of maps, kernels, images, span comparisons


def map_matrix(fn, domain: TensorSpace, out_rank: int | None = None) -> np.ndarray:
    """Matrix of a linear map in the domain's orthonormal coordinates.

    Columns are the flattened images of the basis tensors.
    """
    m = domain.dim_ambient
    cols = [fn(b).reshape(-1) for b in domain.basis_tensors()]
    return np.array(cols).T


def kernel_basis(fn, domain: TensorSpace, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal rows spanning ker(fn) inside the domain (flattened)."""
    M = map_matrix(fn, domain)
    ns = _nullspace_rows(M, tol)
    return ns @ domain.basis


def image_basis(fn, domain: TensorSpace, tol: float = RANK_TOL) -> np.ndarray:
    M = map_matrix(fn, domain)
    return _orthonormal_rows(M.T, tol)


def span_equal(rows_a: np.ndarray, rows_b: np.ndarray, tol: float = 1e-8) -> bool:
    """Two containments plus a dimension equality, robust to basis ordering."""
    a = _orthonormal_rows(rows_a)
    b = _orthonormal_rows(rows_b)
    if a.shape[0] != b.shape[0]:
        return False
    if a.shape[0] == 0:
        return True
    ra = norm(a - (a @ b.T) @ b)
    rb = norm(b - (b @ a.T) @ a)
    return max(ra, rb) <= tol * max(1.0, a.shape[0])


# ---------------------------------------------------------------------------
# exact-rational mode


def integer_spanning_set(space_id: str, m: int):
    """Integer-entry spanning sets for the product spaces (exact-rank mode)."""
    if space_id == "S2xRm":
        vecs = []
        for i in range(m):
            for j in range(i, m):
                for k in range(m):
                    e = np.zeros((m, m, m))
                    e[i, j, k] = 1.0
                    e[j, i, k] = 1.0
                    vecs.append(e)
        return vecs
    if space_id == "S2":
        vecs = []
        for i in range(m):
            for j in range(i, m):
                e = np.zeros((m, m))
                e[i, j] = e[j, i] = 1.0
                vecs.append(e)
        return vecs
    raise ValueError(f"no integer spanning set for {space_id!r}")


def exact_rank(M) -> int:
    """Rank over Q by fraction-free Gaussian elimination.

    Entries must be exactly representable (integers or Fractions).
    """
    rows = [[Fraction(x).limit_denominator(10 ** 12) for x in row] for row in M]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    col = 0
    r = 0
    while r < len(rows) and col < ncols:
        pivot = next((k for k in range(r, len(rows)) if rows[k][col] != 0), None)
        if pivot is None:
            col += 1
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        pr = rows[r]
        for k in range(r + 1, len(rows)):
            if rows[k][col] != 0:
                f = rows[k][col] / pr[col]
                rows[k] = [a - f * b for a, b in zip(rows[k], pr)]
        rank += 1
        r += 1
        col += 1
    return rank
