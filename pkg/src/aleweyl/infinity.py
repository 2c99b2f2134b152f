"""Gauge pipeline on metric expansions at infinity.

An :class:`InfinityExpansion` tracks the two leading deviation coefficients
of an asymptotically flat metric,

    g_ij = delta_ij + A3[i,j,k] x_k/|x|^m + A4[i,j,k,l] x_k x_l/|x|^(m+2) + O(|x|^-tau),

together with the remainder order tau and the gauge the expansion was
obtained in.  The pipeline checks the harmonic/divergence constraints,
removes the order-(m-1) coefficient by an inverse-power change, reduces the
order-m coefficient to its Weyl part, and compares Weyl tensors across
coordinates up to rotation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import gauge_maps as gm
from . import spaces
from .exterior.grid import sphere_quadrature
from .tensors import conjugate, norm

__all__ = [
    "InfinityExpansion",
    "DecayingChange",
    "harmonic_constraint_check",
    "kill_order_m_minus_1",
    "bianchi_constraint_check",
    "reduce_to_weyl",
    "pullback_expansion",
    "fit_expansion",
    "weyl_invariants",
    "compare_weyl_up_to_rotation",
    "CompareResult",
    "gauge_pipeline",
]


@dataclass(frozen=True)
class InfinityExpansion:
    """Leading coefficients of an asymptotically flat end."""

    dim: int
    A3: np.ndarray          # (m, m, m), symmetric in (12); zero when absent
    A4: np.ndarray          # (m, m, m, m), symmetric in (12) and (34)
    remainder_order: float  # tail is O(|x|^-remainder_order) with derivatives
    gauge: str = "unknown"  # harmonic | bianchi | unknown

    def __post_init__(self):
        m = self.dim
        A3 = np.asarray(self.A3, dtype=float)
        A4 = np.asarray(self.A4, dtype=float)
        if A3.shape != (m, m, m) or A4.shape != (m,) * 4:
            raise ValueError("coefficient shapes do not match the dimension")
        tol = 1e-9 * max(1.0, norm(A3), norm(A4))
        if norm(A3 - np.transpose(A3, (1, 0, 2))) > tol:
            raise ValueError("order-(m-1) coefficient must be symmetric in (12)")
        if norm(A4 - np.transpose(A4, (1, 0, 2, 3))) > tol or norm(
            A4 - np.transpose(A4, (0, 1, 3, 2))
        ) > tol:
            raise ValueError("order-m coefficient must be symmetric in (12),(34)")
        if norm(A3) > tol and self.remainder_order <= m - 1:
            raise ValueError("remainder order must exceed m-1 when A3 is tracked")
        if norm(A4) > tol and self.remainder_order <= m:
            raise ValueError("remainder order must exceed m when A4 is tracked")
        object.__setattr__(self, "A3", A3)
        object.__setattr__(self, "A4", A4)

    @classmethod
    def zero(cls, m: int, remainder_order: float = np.inf, gauge: str = "unknown"):
        return cls(m, np.zeros((m, m, m)), np.zeros((m,) * 4), remainder_order, gauge)

    def metric_values(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate delta + tracked terms at points (exactly, no remainder).

        Complex-safe (r via sqrt of the coordinate squares) so the generic
        complex-step derivative path works on expansion-backed models.
        """
        r = np.sqrt(np.sum(pts**2, axis=1))
        m = self.dim
        g = np.zeros((pts.shape[0], m, m), dtype=pts.dtype)
        g[:] = np.eye(m)
        g += np.einsum("ijk,nk->nij", self.A3, pts) / r[:, None, None] ** m
        g += np.einsum("ijkl,nk,nl->nij", self.A4, pts, pts) / r[:, None, None] ** (m + 2)
        return g

    def to_json(self) -> str:
        return json.dumps(
            {
                "m": self.dim,
                "A3": self.A3.reshape(-1).tolist(),
                "A4": self.A4.reshape(-1).tolist(),
                "remainder_order": self.remainder_order,
                "gauge": self.gauge,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "InfinityExpansion":
        d = json.loads(text)
        m = d["m"]
        return cls(
            m,
            np.array(d["A3"]).reshape(m, m, m),
            np.array(d["A4"]).reshape((m,) * 4),
            d["remainder_order"],
            d["gauge"],
        )


@dataclass(frozen=True)
class DecayingChange:
    """Coordinate change y = Q (x + c + B_vec/|x|^(m-2) + B_mat x/|x|^m)."""

    rotation: np.ndarray
    translation: np.ndarray
    B_vec: np.ndarray
    B_mat: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.rotation, dtype=float)
        if norm(Q.T @ Q - np.eye(Q.shape[0])) > 1e-12 * Q.shape[0]:
            raise ValueError("rotation part must be orthogonal")

    @property
    def dim(self) -> int:
        return self.rotation.shape[0]

    @classmethod
    def identity(cls, m: int) -> "DecayingChange":
        return cls(np.eye(m), np.zeros(m), np.zeros(m), np.zeros((m, m)))

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts)
        r = np.sqrt(np.sum(pts**2, axis=-1))
        m = self.dim
        out = pts + self.translation
        out = out + self.B_vec[None, :] / r[:, None] ** (m - 2)
        out = out + (pts @ self.B_mat.T) / r[:, None] ** m
        return out @ self.rotation.T

    def decaying_part(self, pts: np.ndarray) -> np.ndarray:
        """The inverse-power displacement u(x) (before rotation/translation)."""
        r = np.sqrt(np.sum(pts**2, axis=-1))
        m = self.dim
        return self.B_vec[None, :] / r[:, None] ** (m - 2) + (pts @ self.B_mat.T) / r[:, None] ** m


def harmonic_constraint_check(e: InfinityExpansion) -> np.ndarray:
    """Constraint residual on the order-(m-1) coefficient of a harmonic gauge."""
    if e.gauge != "harmonic":
        raise ValueError("expansion is not tagged as harmonic gauge")
    return gm.bianchi_op1(e.A3)


def kill_order_m_minus_1(e: InfinityExpansion, tol: float = 1e-8):
    """Inverse-power change removing the order-(m-1) coefficient.

    Requires the harmonic constraint to hold (the coefficient then lies in
    the image of the vector shift); reports the projection residual
    otherwise.  The order-m coefficient is untouched at the tracked orders;
    the remainder is capped at 2m-2 where the change's quadratic
    contributions enter.
    """
    m = e.dim
    scale = max(1.0, norm(e.A3))
    con = norm(gm.bianchi_op1(e.A3))
    if con > tol * scale * m:
        raise ValueError(f"harmonic constraint fails: |B1(A3)| = {con:.3e}")
    t13 = np.einsum("aka->k", e.A3)
    B = t13 / ((m - 2.0) * (m + 1.0))
    resid = norm(gm.decay_vector_shift(B, m) + e.A3)
    if resid > tol * scale:
        raise ValueError(
            f"order-(m-1) coefficient is not an image of the vector shift: {resid:.3e}"
        )
    change = DecayingChange(np.eye(m), np.zeros(m), B, np.zeros((m, m)))
    rem = e.remainder_order if norm(B) == 0.0 else min(e.remainder_order, 2.0 * m - 2.0)
    out = InfinityExpansion(m, np.zeros((m, m, m)), e.A4, rem, e.gauge)
    return change, out


def bianchi_constraint_check(e: InfinityExpansion):
    """(trace residual, divergence residual) of the order-m coefficient."""
    if e.gauge != "bianchi":
        raise ValueError("expansion is not tagged as Bianchi gauge")
    return np.einsum("ijaa->ij", e.A4), gm.bianchi_op2(e.A4)


def reduce_to_weyl(e: InfinityExpansion, tol: float = 1e-7):
    """Inverse-power matrix change reducing the order-m coefficient to Weyl form.

    Returns (change, expansion, W) with W the Weyl tensor; the transformed
    expansion has order-m coefficient sym_pair(W).
    """
    m = e.dim
    if norm(e.A3) > tol * max(1.0, norm(e.A4)):
        raise ValueError("remove the order-(m-1) coefficient first")
    B, Wt = spaces.weyl_reduce(e.A4, tol=tol)
    change = DecayingChange(np.eye(m), np.zeros(m), np.zeros(m), B)
    W = gm.weyl_from_sym_pair(Wt)
    out = InfinityExpansion(m, e.A3, Wt, e.remainder_order, e.gauge)
    return change, out, W


def _translate_coefficients(e: InfinityExpansion, c: np.ndarray) -> InfinityExpansion:
    """Exact re-expansion of the tracked terms under x -> x + c."""
    m = e.dim
    if not np.any(c):
        return e
    if norm(e.A3) == 0.0:
        return e  # translations first enter at the untracked order m+1
    shift = np.einsum("ijk,k->ij", e.A3, c)
    dA4 = np.einsum("ij,ab->ijab", shift, np.eye(m))
    dA4 -= (m / 2.0) * (
        np.einsum("ija,b->ijab", e.A3, c) + np.einsum("ijb,a->ijab", e.A3, c)
    )
    rem = min(e.remainder_order, m + 1.0)
    return InfinityExpansion(m, e.A3, e.A4 + dA4, rem, e.gauge)


def pullback_expansion(e: InfinityExpansion, change: DecayingChange) -> InfinityExpansion:
    """Coefficient transformation under the decaying change.

    Order of operations matches ``DecayingChange.apply``: the rotation
    conjugates all tensors, the translation re-expands the order-(m-1) term,
    and the two inverse-power parts shift A3 and A4 by their gauge-map
    images.
    """
    m = e.dim
    Q = change.rotation
    out = InfinityExpansion(
        m,
        conjugate(e.A3, Q),
        conjugate(e.A4, Q),
        e.remainder_order,
        e.gauge,
    )
    out = _translate_coefficients(out, change.translation)
    A3 = out.A3 + gm.decay_vector_shift(change.B_vec, m)
    A4 = out.A4 + gm.decay_matrix_shift(change.B_mat)
    rem = out.remainder_order
    if np.any(change.B_vec):
        rem = min(rem, 2.0 * m - 2.0)
    return InfinityExpansion(m, A3, A4, rem, out.gauge)


def fit_expansion(
    model,
    base_radius: float,
    n_annuli: int = 3,
    gauge: str = "unknown",
    angular_degree: int | None = None,
    extra_orders: int = 0,
) -> tuple[InfinityExpansion, dict]:
    """Least-squares fit of the two tracked coefficients from metric samples.

    Samples g - delta on >= 3 dyadic annuli against the basis functions
    x_k/|x|^m and x_k x_l/|x|^(m+2); the per-annulus residual decay rate is
    reported as an empirical remainder order.

    ``extra_orders`` > 0 appends basis columns for the radial orders
    m+1 .. m+extra_orders (both monomial parities); they are discarded from
    the result but absorb structured remainder terms that would otherwise
    contaminate the tracked coefficients at small radii.
    """
    if n_annuli < 3:
        raise ValueError("need at least 3 annuli")
    m = model.dim
    degree = angular_degree or max(12, 2 * m + 2)
    nodes, _ = sphere_quadrature(m, degree)
    radii = base_radius * 2.0 ** np.arange(n_annuli)
    pts = np.concatenate([r * nodes for r in radii], axis=0)
    r = np.repeat(radii, nodes.shape[0])
    dev = model.metric(pts) - np.eye(m)[None, :, :]
    n_per = nodes.shape[0]

    cols = []
    labels = []
    for k in range(m):
        cols.append(pts[:, k] / r**m)
        labels.append(("A3", k))
    for k in range(m):
        for l in range(k, m):
            factor = 1.0 if k == l else 2.0
            cols.append(factor * pts[:, k] * pts[:, l] / r ** (m + 2))
            labels.append(("A4", k, l))
    from itertools import combinations_with_replacement

    for j in range(1, extra_orders + 1):
        for d in (j + 2, j):
            if d == 0:
                cols.append(1.0 / r ** (m + j))
                labels.append(("pad",))
                continue
            for mono in combinations_with_replacement(range(m), d):
                mono_vals = np.prod(pts[:, mono], axis=1)
                cols.append(mono_vals / r ** (m + j + d))
                labels.append(("pad",))
    design = np.stack(cols, axis=1)
    scales = np.max(np.abs(design), axis=0)
    design = design / scales

    def solve_window(row_slice):
        A3w = np.zeros((m, m, m))
        A4w = np.zeros((m,) * 4)
        resid = np.zeros(n_annuli)
        Dw, scw = design[row_slice], scales
        for i in range(m):
            for j in range(i, m):
                y = dev[row_slice, i, j]
                sol, *_ = np.linalg.lstsq(Dw, y, rcond=None)
                sol = sol / scw
                for lab, value in zip(labels, sol):
                    if lab[0] == "A3":
                        A3w[i, j, lab[1]] = value
                        A3w[j, i, lab[1]] = value
                    elif lab[0] == "A4":
                        _, k, l = lab
                        A4w[i, j, k, l] = value
                        A4w[i, j, l, k] = value
                        A4w[j, i, k, l] = value
                        A4w[j, i, l, k] = value
                res_full = dev[:, i, j] - (design * scales) @ sol
                for ann in range(n_annuli):
                    sl = slice(ann * n_per, (ann + 1) * n_per)
                    resid[ann] = max(resid[ann], float(np.sqrt(np.mean(res_full[sl] ** 2))))
        return A3w, A4w, resid

    A3, A4, resid_per_annulus = solve_window(slice(None))

    # empirical remainder order: the tracked coefficients drift across dyadic
    # fitting windows like base^-(tau - m); two drifts give the exponent.
    # (residual slopes are unreliable because least squares partially absorbs
    # the remainder into the tracked columns.)
    remainder = np.inf
    drift_pairs = []
    if n_annuli >= 5:
        fits = []
        for start in range(n_annuli - 2):
            rows = slice(start * n_per, (start + 3) * n_per)
            fits.append(solve_window(rows))
        scale0 = max(norm(A3), norm(A4), 1e-300)
        for (a3a, a4a, _), (a3b, a4b, _) in zip(fits[:-1], fits[1:]):
            drift_pairs.append(max(norm(a4a - a4b), norm(a3a - a3b) * 1.0))
        floor = 1e-12 * scale0
        if len(drift_pairs) >= 2 and drift_pairs[0] > floor and drift_pairs[1] > floor:
            remainder = m + np.log2(drift_pairs[0] / drift_pairs[1])
        elif all(d <= floor for d in drift_pairs):
            remainder = np.inf
    else:
        floor = 1e-13 * max(1.0, float(np.max(np.abs(dev))))
        if not np.all(resid_per_annulus < floor):
            safe = np.maximum(resid_per_annulus, 1e-300)
            slope = np.polyfit(np.log(radii), np.log(safe), 1)[0]
            remainder = -slope
    info = {
        "radii": radii.tolist(),
        "residual_per_annulus": resid_per_annulus.tolist(),
        "coefficient_drifts": [float(d) for d in drift_pairs],
        "remainder_order_estimate": float(remainder),
    }
    rem = remainder if np.isfinite(remainder) else np.inf
    exp = InfinityExpansion(m, A3, A4, max(rem, m + 0.5), gauge)
    return exp, info


# ---------------------------------------------------------------------------
# Weyl comparison up to rotation


def weyl_invariants(W: np.ndarray) -> np.ndarray:
    """Rotation invariants: the spectrum of the induced operator on symmetric
    2-tensors (the symmetric-pair form as an m^2 x m^2 matrix) plus the norm."""
    m = W.shape[0]
    mat = gm.sym_pair(W).reshape(m * m, m * m)
    ev = np.sort(np.linalg.eigvalsh(0.5 * (mat + mat.T)))
    return np.concatenate([ev, [norm(W)]])


@dataclass
class CompareResult:
    matched: bool
    rotation: np.ndarray | None
    residual: float
    status: str  # matched | inconclusive | distinct
    invariant_gap: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "matched": self.matched,
                "rotation": None if self.rotation is None else self.rotation.tolist(),
                "residual": self.residual,
                "status": self.status,
                "invariant_gap": self.invariant_gap,
            }
        )


def _skew_to_rotation(theta, m):
    K = np.zeros((m, m))
    idx = np.triu_indices(m, 1)
    K[idx] = theta
    K = K - K.T
    # expm via eigendecomposition of the skew matrix
    w, V = np.linalg.eigh(1j * K)
    return np.real(V @ np.diag(np.exp(-1j * w)) @ V.conj().T)


def _signed_permutations(m, rng, count):
    mats = [np.eye(m)]
    for _ in range(count):
        perm = rng.permutation(m)
        signs = rng.choice([-1.0, 1.0], size=m)
        P = np.zeros((m, m))
        P[np.arange(m), perm] = signs
        mats.append(P)
    return mats


def compare_weyl_up_to_rotation(
    W1: np.ndarray,
    W2: np.ndarray,
    tol: float = 1e-6,
    n_starts: int = 24,
    seed: int = 0,
) -> CompareResult:
    """Search for an orthogonal Q with conjugate(W2, Q) = W1.

    Spectral invariants are compared first as a necessary filter; a failed
    search with matching invariants reports "inconclusive", never a definite
    mismatch (the search is heuristic, existence is not).
    """
    m = W1.shape[0]
    s1, s2 = norm(W1), norm(W2)
    scale = max(s1, s2, 1e-300)
    inv_gap = float(np.max(np.abs(weyl_invariants(W1) - weyl_invariants(W2)))) / scale
    if inv_gap > 10.0 * tol:
        return CompareResult(False, None, np.inf, "distinct", inv_gap)
    if s1 < tol * scale and s2 < tol * scale:
        return CompareResult(True, np.eye(m), 0.0, "matched", inv_gap)

    rng = np.random.default_rng(seed)
    n_params = m * (m - 1) // 2

    def objective(theta, base):
        Q = base @ _skew_to_rotation(theta, m)
        return norm(conjugate(W2, Q) - W1) ** 2 / scale**2

    best = (np.inf, None)
    seeds = _signed_permutations(m, rng, 8)
    for _ in range(n_starts):
        seeds.append(_skew_to_rotation(rng.standard_normal(n_params), m))
    for base in seeds:
        res = minimize(
            objective,
            np.zeros(n_params),
            args=(base,),
            method="L-BFGS-B",
            options={"maxiter": 200},
        )
        theta = res.x
        Q = base @ _skew_to_rotation(theta, m)
        val = norm(conjugate(W2, Q) - W1) / scale
        if val < best[0]:
            best = (val, Q)
        if val <= tol:
            return CompareResult(True, Q, float(val), "matched", inv_gap)
    return CompareResult(False, best[1], float(best[0]), "inconclusive", inv_gap)


def gauge_pipeline(e: InfinityExpansion, tol: float = 1e-7):
    """Run the order-(m-1) removal and the Weyl reduction; emit a report."""
    steps = []
    ch1, e1 = kill_order_m_minus_1(e, tol=max(tol, 1e-8))
    steps.append({"op": "kill_order_m_minus_1", "B_vec": ch1.B_vec.tolist()})
    tr, b2 = np.einsum("ijaa->ij", e1.A4), gm.bianchi_op2(e1.A4)
    steps.append(
        {"op": "constraint_check", "trace_residual": norm(tr), "b2_residual": norm(b2)}
    )
    ch2, e2, W = reduce_to_weyl(e1, tol=tol)
    steps.append({"op": "reduce_to_weyl", "B_mat": ch2.B_mat.tolist()})
    report = {
        "input_remainder": e.remainder_order,
        "steps": steps,
        "weyl_invariants": weyl_invariants(W).tolist(),
    }
    return e2, W, (ch1, ch2), report
