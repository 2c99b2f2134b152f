"""Order-2 jet normalization of a metric at a point.

A :class:`MetricJet` stores the exact degree-2 Taylor data of a metric,
g_ij(x) = a_ij + b[i,j,k] x_k + c[i,j,k,l] x_k x_l, with no remainder; the
normalization pipeline is purely algebraic on these coefficients.  The
three steps: a linear change making the constant term the identity, a
quadratic change killing the linear term, and a cubic change reducing the
quadratic term to curvature form.  The end state is
g = delta - (1/3) R[i,p,q,j] x_p x_q with R the curvature at the origin in
the package convention (see gauge_maps).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import sqrtm

from . import gauge_maps as gm
from . import spaces
from .tensors import sym, norm

__all__ = [
    "MetricJet",
    "PolynomialChange",
    "pullback_jet",
    "compose_changes",
    "rotate_to_identity",
    "kill_linear",
    "curvature_normalize",
    "normal_form",
    "ricci_at_origin",
]


@dataclass(frozen=True)
class MetricJet:
    """Exact order-2 Taylor data of a metric at a point."""

    a: np.ndarray  # (m, m) symmetric positive definite
    b: np.ndarray  # (m, m, m), symmetric in (12); last slot is the monomial index
    c: np.ndarray  # (m, m, m, m), symmetric in (12) and (34); (34) are monomial indices

    def __post_init__(self):
        a, b, c = map(np.asarray, (self.a, self.b, self.c))
        m = a.shape[0]
        if a.shape != (m, m) or b.shape != (m, m, m) or c.shape != (m, m, m, m):
            raise ValueError("inconsistent coefficient shapes")
        tol = 1e-9 * max(1.0, norm(a), norm(b), norm(c))
        if norm(a - a.T) > tol:
            raise ValueError("constant term must be symmetric")
        if np.min(np.linalg.eigvalsh(a)) <= 0:
            raise ValueError("constant term must be positive definite")
        if norm(b - np.transpose(b, (1, 0, 2))) > tol:
            raise ValueError("linear term must be symmetric in its metric slots")
        if norm(c - np.transpose(c, (1, 0, 2, 3))) > tol or norm(
            c - np.transpose(c, (0, 1, 3, 2))
        ) > tol:
            raise ValueError("quadratic term must be symmetric in (12) and (34)")

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """g_ij at points x, shape (..., m) -> (..., m, m)."""
        x = np.asarray(x, dtype=float)
        g = np.broadcast_to(self.a, x.shape[:-1] + self.a.shape).copy()
        g += np.einsum("ijk,...k->...ij", self.b, x)
        g += np.einsum("ijkl,...k,...l->...ij", self.c, x, x)
        return g

    def to_json(self) -> str:
        return json.dumps(
            {
                "m": self.dim,
                "a": self.a.reshape(-1).tolist(),
                "b": self.b.reshape(-1).tolist(),
                "c": self.c.reshape(-1).tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MetricJet":
        d = json.loads(text)
        m = d["m"]
        return cls(
            np.array(d["a"]).reshape(m, m),
            np.array(d["b"]).reshape(m, m, m),
            np.array(d["c"]).reshape(m, m, m, m),
        )

    @classmethod
    def flat(cls, m: int) -> "MetricJet":
        z3 = np.zeros((m, m, m))
        return cls(np.eye(m), z3, np.zeros((m, m, m, m)))


@dataclass(frozen=True)
class PolynomialChange:
    """Coordinate change phi_i(x) = (L x)_i + Q[j,k,i] x_j x_k + C[j,k,l,i] x_j x_k x_l."""

    linear: np.ndarray  # (m, m) invertible
    quad: np.ndarray    # (m, m, m), symmetric in (12); component index last
    cubic: np.ndarray   # (m, m, m, m), symmetric in (123); component index last

    def __post_init__(self):
        L = np.asarray(self.linear)
        if abs(np.linalg.det(L)) < 1e-12:
            raise ValueError("linear part must be invertible")
        tol = 1e-10 * max(1.0, norm(self.quad), norm(self.cubic))
        if norm(self.quad - np.transpose(self.quad, (1, 0, 2))) > tol:
            raise ValueError("quadratic coefficients must be symmetric in (12)")
        C = self.cubic
        if norm(C - np.transpose(C, (1, 0, 2, 3))) > tol or norm(
            C - np.transpose(C, (0, 2, 1, 3))
        ) > tol:
            raise ValueError("cubic coefficients must be symmetric in (123)")

    @property
    def dim(self) -> int:
        return self.linear.shape[0]

    @classmethod
    def identity(cls, m: int) -> "PolynomialChange":
        return cls(np.eye(m), np.zeros((m, m, m)), np.zeros((m, m, m, m)))

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.einsum("ij,...j->...i", self.linear, x)
        out += np.einsum("jki,...j,...k->...i", self.quad, x, x)
        out += np.einsum("jkli,...j,...k,...l->...i", self.cubic, x, x, x)
        return out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """d phi_i / d x_p, shape (..., i, p)."""
        x = np.asarray(x, dtype=float)
        J = np.broadcast_to(self.linear, x.shape[:-1] + self.linear.shape).copy()
        J += 2.0 * np.einsum("pki,...k->...ip", self.quad, x)
        J += 3.0 * np.einsum("pkli,...k,...l->...ip", self.cubic, x, x)
        return J


def pullback_jet(jet: MetricJet, change: PolynomialChange) -> MetricJet:
    """Exact order-2 jet of the pullback metric; no truncation error.

    Only the order-<=3 jet of the change matters to the order-2 jet of the
    pullback, so composing changes truncated at cubic order commutes with
    sequential pullbacks.
    """
    m = jet.dim
    L, Q, C = change.linear, change.quad, change.cubic
    a, b, c = jet.a, jet.b, jet.c

    aL = a @ L  # a_ij L_jq
    a2 = L.T @ a @ L

    # order 1: (2 Q x)^T a L + L^T a (2 Q x) + L^T (b . Lx) L
    b2 = 2.0 * np.einsum("rpi,iq->pqr", Q, aL)
    b2 += 2.0 * np.einsum("rqj,jp->pqr", Q, aL)
    b2 += np.einsum("ip,jq,ijk,kr->pqr", L, L, b, L)

    # order 2
    c2 = 4.0 * np.einsum("kpi,ij,lqj->pqkl", Q, a, Q)
    c2 += 3.0 * np.einsum("klpi,iq->pqkl", C, aL)
    c2 += 3.0 * np.einsum("klqj,jp->pqkl", C, aL)
    c2 += 2.0 * np.einsum("kpi,jq,ijs,sl->pqkl", Q, L, b, L)
    c2 += 2.0 * np.einsum("kqj,ip,ijs,sl->pqkl", Q, L, b, L)
    c2 += np.einsum("ip,jq,ijs,kls->pqkl", L, L, b, Q)
    c2 += np.einsum("ip,jq,ijuv,uk,vl->pqkl", L, L, c, L, L)
    c2 = sym(c2, (3, 4))
    return MetricJet(a2, b2, c2)


def compose_changes(first: PolynomialChange, second: PolynomialChange) -> PolynomialChange:
    """Cubic-order truncation of first o second (apply second, then first)."""
    L1, Q1, C1 = first.linear, first.quad, first.cubic
    L2, Q2, C2 = second.linear, second.quad, second.cubic
    L = L1 @ L2
    Q = np.einsum("is,jks->jki", L1, Q2) + np.einsum("abi,aj,bk->jki", Q1, L2, L2)
    C = np.einsum("is,jkls->jkli", L1, C2)
    C += 2.0 * sym(np.einsum("abi,aj,klb->jkli", Q1, L2, Q2), (1, 2, 3))
    C += np.einsum("abci,aj,bk,cl->jkli", C1, L2, L2, L2)
    Q = sym(Q, (1, 2))
    C = sym(C, (1, 2, 3))
    return PolynomialChange(L, Q, C)


def rotate_to_identity(jet: MetricJet):
    """Linear change with the inverse symmetric square root; makes a = delta."""
    m = jet.dim
    root = np.real(sqrtm(jet.a))
    change = PolynomialChange(np.linalg.inv(root), np.zeros((m, m, m)), np.zeros((m, m, m, m)))
    return change, pullback_jet(jet, change)


def kill_linear(jet: MetricJet):
    """Quadratic change removing the linear term (requires a = delta).

    The coefficients solve b + 2Q_(312) + 2Q_(321) = 0, i.e. Q inverts the
    linear-shift map on b.
    """
    m = jet.dim
    if norm(jet.a - np.eye(m)) > 1e-10:
        raise ValueError("constant term must already be the identity")
    dom = spaces.space_basis("S2xRm", m)
    M = spaces.map_matrix(gm.linear_shift, dom)
    coords, *_ = np.linalg.lstsq(M, jet.b.reshape(-1), rcond=None)
    Q = dom.from_coords(coords)
    change = PolynomialChange(np.eye(m), Q, np.zeros((m, m, m, m)))
    out = pullback_jet(jet, change)
    return change, out


def curvature_normalize(jet: MetricJet):
    """Cubic change leaving only the curvature-type quadratic term.

    Returns (change, normalized jet, R) with R the curvature at the origin.
    """
    m = jet.dim
    if norm(jet.a - np.eye(m)) > 1e-10 or norm(jet.b) > 1e-10:
        raise ValueError("jet must have a = delta and b = 0")
    Ct, B = spaces.split_curvature(jet.c)
    cubic = np.transpose(B, (1, 2, 3, 0))  # component index moves last
    change = PolynomialChange(np.eye(m), np.zeros((m, m, m)), cubic)
    out = pullback_jet(jet, change)
    R = gm.curvature_of_quadratic(jet.c)
    return change, out, R


def normal_form(jet: MetricJet):
    """Full normalization; returns (composite change, final jet, R)."""
    ch1, j1 = rotate_to_identity(jet)
    ch2, j2 = kill_linear(j1)
    ch3, j3, R = curvature_normalize(j2)
    total = compose_changes(compose_changes(ch1, ch2), ch3)
    return total, j3, R


def ricci_at_origin(jet: MetricJet, tol: float = 1e-8):
    """Ricci tensor of a normalized jet, plus the Christoffel-trace derivative.

    Returns (ric, dgamma_trace); the two satisfy dgamma_trace = (2/3) ric.
    """
    m = jet.dim
    if norm(jet.a - np.eye(m)) > tol or norm(jet.b) > tol:
        raise ValueError("jet is not in normal form")
    Ct = spaces.space_basis("Ctilde", m)
    if not Ct.contains(jet.c, 1e-8):
        raise ValueError("quadratic term is not of curvature type")
    R = gm.curvature_of_quadratic(jet.c)
    ric = gm.ricci_from_curvature(R)
    dgamma = 2.0 * np.einsum("iaal->li", jet.c) - np.einsum("aail->li", jet.c)
    return ric, dgamma
