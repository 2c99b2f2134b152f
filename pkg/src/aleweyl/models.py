"""Metric catalog for the pipelines: flat space and quotients, synthetic
Weyl-leading ends, a gravitational instanton, and pulled-back variants.

Every model exposes ``metric(pts)`` (complex-safe, which is what lets the
generic derivative path use complex-step differentiation to machine
precision) and ``dmetric(pts)`` with layout dg[n, k, i, j] = d_k g_ij.
Volume bookkeeping: models with a closed-form ball volume implement
``exact_ball_volume``; the others are integrated numerically from the
origin (their evaluators are globally smooth by construction).
"""

from __future__ import annotations

import numpy as np

from . import gauge_maps as gm
from .infinity import DecayingChange
from .tensors import norm

__all__ = [
    "MetricModel",
    "FlatModel",
    "SyntheticWeylModel",
    "EguchiHansonModel",
    "PulledBackModel",
    "catalog_build",
    "complex_step_dmetric",
    "smoothstep",
    "smoothstep_derivative",
]

CSTEP = 1e-80


def complex_step_dmetric(metric_fn, pts: np.ndarray, h: float = CSTEP) -> np.ndarray:
    """dg[n, k, i, j] = d_k g_ij by complex-step differentiation."""
    n, m = pts.shape
    out = np.zeros((n, m, m, m))
    for k in range(m):
        z = pts.astype(complex)
        z[:, k] += 1j * h
        out[:, k] = metric_fn(z).imag / h
    return out


def _sigma(t):
    """exp(-1/t) for Re t > 0, else 0; complex-safe."""
    t = np.asarray(t)
    out = np.zeros_like(t, dtype=t.dtype if np.iscomplexobj(t) else float)
    mask = np.real(t) > 0
    out[mask] = np.exp(-1.0 / t[mask])
    return out


def smoothstep(r, r0, r1):
    """C-infinity step: 0 for r <= r0, 1 for r >= r1."""
    t = (np.asarray(r) - r0) / (r1 - r0)
    s, s_bar = _sigma(t), _sigma(1.0 - t)
    return s / (s + s_bar + 1e-300)


def smoothstep_derivative(r, r0, r1):
    t = (np.asarray(r) - r0) / (r1 - r0)
    s, s_bar = _sigma(t), _sigma(1.0 - t)
    ds = np.zeros_like(s)
    mask = np.real(t) > 0
    ds[mask] = s[mask] / t[mask] ** 2
    ds_bar = np.zeros_like(s_bar)
    mask2 = np.real(1.0 - t) > 0
    ds_bar[mask2] = s_bar[mask2] / (1.0 - t[mask2]) ** 2
    denom = (s + s_bar + 1e-300) ** 2
    return (ds * s_bar + s * ds_bar) / denom / (r1 - r0)


class MetricModel:
    """Base class: evaluator on the cover plus quotient bookkeeping."""

    kind = "abstract"

    def __init__(self, dim, group_order=1, inner_radius=0.0, params=None):
        self.dim = dim
        self.group_order = int(group_order)
        self.inner_radius = float(inner_radius)
        self.params = dict(params or {})

    def metric(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dmetric(self, pts: np.ndarray) -> np.ndarray:
        return complex_step_dmetric(self.metric, pts)

    def exact_ball_volume(self, r: float) -> float | None:
        """Closed-form V_g({|x| <= r}) on the quotient manifold, if known."""
        return None

    def validate_positive(self, radii, n_dirs=32, seed=0):
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((n_dirs, self.dim))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        for r in radii:
            g = self.metric(r * dirs)
            if np.min(np.linalg.eigvalsh(g)) <= 0:
                raise ValueError(f"metric not positive definite at radius {r}")
        return True


class FlatModel(MetricModel):
    kind = "flat"

    def __init__(self, dim, group_order=1):
        super().__init__(dim, group_order)
        if group_order > 1:
            self.kind = "flat_quotient"

    def metric(self, pts):
        n = pts.shape[0]
        out = np.zeros((n, self.dim, self.dim), dtype=pts.dtype)
        out[:] = np.eye(self.dim)
        return out

    def dmetric(self, pts):
        n, m = pts.shape
        return np.zeros((n, m, m, m))

    def exact_ball_volume(self, r):
        return ball_volume(self.dim, r) / self.group_order


def ball_volume(m: int, r: float) -> float:
    from math import gamma, pi

    return pi ** (m / 2.0) / gamma(m / 2.0 + 1.0) * r**m


class SyntheticWeylModel(MetricModel):
    """g = delta + chi(|x|) [ sym_pair(W)_{ijab} x_a x_b / |x|^(m+2) + tail ].

    The leading term is the trace-free, divergence-free, radially transverse
    harmonic deviation generated by a Weyl tensor; ``tail`` optionally adds
    a constant symmetric matrix times |x|^(-tail_order) to exercise generic
    remainders.  The cutoff makes the evaluator globally smooth with g =
    delta inside cap_radius.
    """

    kind = "synthetic_weyl"

    def __init__(self, W, cap_radius=1.0, tail=None, tail_order=None, validate=True):
        m = W.shape[0]
        super().__init__(m, 1, 0.0, {"cap_radius": cap_radius})
        self.W = np.asarray(W, dtype=float)
        self.S = gm.sym_pair(self.W)
        self.cap_radius = float(cap_radius)
        self.tail = None if tail is None else np.asarray(tail, dtype=float)
        self.tail_order = float(tail_order if tail_order is not None else m + 1)
        if validate:
            self._validate_leading_term()

    def _validate_leading_term(self):
        m = self.dim
        S = self.S
        scale = max(1.0, norm(S))
        for pair in (("ijaa->ij",), ("aakl->kl",), ("iaal->il",)):
            if norm(np.einsum(pair[0], S)) > 1e-9 * scale:
                raise ValueError("leading term is not totally trace-free")
        rng = np.random.default_rng(1)
        x = rng.standard_normal((8, m))
        radial = np.einsum("ijab,nj,na,nb->ni", S, x, x, x)
        if np.max(np.abs(radial)) > 1e-9 * scale * np.max(np.abs(x)) ** 3:
            raise ValueError("leading term has a radial component")
        # divergence-free and harmonic follow from the trace checks and the
        # identity Delta(x_a x_b r^-(m+2)) = 2 d_ab r^-(m+2); spot-check div:
        pts = 3.1 * self.cap_radius * x / np.linalg.norm(x, axis=1)[:, None]
        dg = complex_step_dmetric(self._deviation_only, pts)
        div = np.einsum("njij->ni", dg)
        if np.max(np.abs(div)) > 1e-9 * scale:
            raise ValueError("leading term is not divergence-free")

    def _deviation_only(self, pts):
        r2 = np.sum(pts**2, axis=1)
        dev = np.einsum("ijab,na,nb->nij", self.S, pts, pts) / r2[:, None, None] ** (
            (self.dim + 2) / 2.0
        )
        return dev

    def metric(self, pts):
        pts = np.asarray(pts)
        m = self.dim
        r2 = np.sum(pts**2, axis=1)
        r = np.sqrt(r2)
        chi = smoothstep(r, self.cap_radius, 2.0 * self.cap_radius)
        dev = np.einsum("ijab,na,nb->nij", self.S, pts, pts) / r2[:, None, None] ** (
            (m + 2) / 2.0
        )
        if self.tail is not None:
            dev = dev + self.tail[None, :, :] / r[:, None, None] ** self.tail_order
        out = np.zeros((pts.shape[0], m, m), dtype=dev.dtype)
        out[:] = np.eye(m)
        return out + chi[:, None, None] * dev


class ExpansionModel(MetricModel):
    """Exact evaluator of a tracked expansion (no remainder term).

    Useful as a planted-coefficient target for the fitting and gauge
    pipelines; only meaningful on the exterior (the expansion blows up at
    the origin), so ``inner_radius`` guards it and there is no volume
    bookkeeping.
    """

    kind = "expansion"

    def __init__(self, expansion, inner_radius=1.0):
        super().__init__(expansion.dim, 1, inner_radius)
        self.expansion = expansion

    def metric(self, pts):
        return self.expansion.metric_values(pts)


class EguchiHansonModel(MetricModel):
    """The standard scale-a gravitational instanton in a Cartesian gauge.

    Radial profile r(s) = s + a^4/(6 s^3) chosen so the order-4 deviation is
    exactly the trace-free, radially transverse leading term; the quotient
    group at infinity has order 2.  The exact quotient ball volume is
    (pi^2/4)(r(s)^4 - a^4).
    """

    kind = "eguchi_hanson"

    # almost complex structure pairing the two C-factors
    J = np.array(
        [
            [0.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, -1.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ]
    )

    def __init__(self, a=1.0, inner_factor=1.5):
        super().__init__(4, 2, inner_factor * a, {"a": a})
        self.a = float(a)

    def _radial(self, s):
        return s + self.a**4 / (6.0 * s**3)

    def metric(self, pts):
        pts = np.asarray(pts)
        s2 = np.sum(pts**2, axis=1)
        s = np.sqrt(s2)
        r = self._radial(s)
        rp = 1.0 - self.a**4 / (2.0 * s**4)
        h = 1.0 - (self.a / r) ** 4
        xhat = pts / s[:, None]
        P = np.eye(4)[None] - np.einsum("ni,nj->nij", xhat, xhat)
        K = pts @ self.J.T
        out = np.zeros((pts.shape[0], 4, 4), dtype=pts.dtype)
        out[:] = np.eye(4)
        out += (rp**2 / h - 1.0)[:, None, None] * np.einsum("ni,nj->nij", xhat, xhat)
        out += ((r**2 - s2) / s2)[:, None, None] * P
        out -= (self.a**4 / (r**2 * s2**2))[:, None, None] * np.einsum(
            "ni,nj->nij", K, K
        )
        return out

    def exact_ball_volume(self, radius):
        r = self._radial(radius)
        return (np.pi**2 / 4.0) * (r**4 - self.a**4)


class PulledBackModel(MetricModel):
    """Pullback of a base model by a gated decaying change.

    The inverse-power and translation parts are multiplied by a smooth gate
    that vanishes inside ``gate_radius`` (so the core region is untouched,
    which keeps exact volume bookkeeping available); the rotation acts
    globally since it preserves the radius.

    The optional extra displacement ``extra_vec/|x|^extra_order`` is NOT a
    harmonic function (for generic order), unlike the inverse-power fields
    of a DecayingChange; it is what breaks the divergence gauge at leading
    order and gives the harmonic-map correction something nontrivial to
    recover.
    """

    kind = "pulled_back"

    def __init__(
        self,
        base: MetricModel,
        change: DecayingChange,
        gate_radius: float,
        extra_vec=None,
        extra_order: float | None = None,
    ):
        super().__init__(
            base.dim, base.group_order, base.inner_radius,
            {"gate_radius": gate_radius},
        )
        self.base = base
        self.change = change
        self.gate_radius = float(gate_radius)
        self.extra_vec = None if extra_vec is None else np.asarray(extra_vec, float)
        self.extra_order = float(extra_order if extra_order is not None else base.dim - 1)
        if gate_radius <= max(base.inner_radius, 0.0):
            raise ValueError("gate radius must sit outside the base inner radius")

    def _displacement(self, pts):
        """w(x) = c + B_vec/|x|^(m-2) + B_mat x/|x|^m [+ extra] and its Jacobian."""
        ch = self.change
        m = self.dim
        r2 = np.sum(pts**2, axis=1)
        r = np.sqrt(r2)
        w = (
            ch.translation[None, :]
            + ch.B_vec[None, :] / r[:, None] ** (m - 2)
            + (pts @ ch.B_mat.T) / r[:, None] ** m
        )
        dw = np.zeros(pts.shape[:1] + (m, m), dtype=pts.dtype)
        dw += -(m - 2.0) * np.einsum(
            "i,np->npi", ch.B_vec, pts
        ) / r[:, None, None] ** m
        dw += ch.B_mat.T[None, :, :] / r[:, None, None] ** m  # dw[n,p,i] += B[i,p]/r^m
        dw += -m * np.einsum("nj,ij,np->npi", pts, ch.B_mat, pts) / r[
            :, None, None
        ] ** (m + 2)
        if self.extra_vec is not None:
            p = self.extra_order
            w = w + self.extra_vec[None, :] / r[:, None] ** p
            dw = dw - p * np.einsum("i,np->npi", self.extra_vec, pts) / r[
                :, None, None
            ] ** (p + 2)
        return w, dw

    def apply_map(self, pts):
        chi = smoothstep(np.sqrt(np.sum(pts**2, axis=1)), self.gate_radius, 2.0 * self.gate_radius)
        w, _ = self._displacement(pts)
        return (pts + chi[:, None] * w) @ self.change.rotation.T

    def metric(self, pts):
        pts = np.asarray(pts)
        m = self.dim
        r = np.sqrt(np.sum(pts**2, axis=1))
        chi = smoothstep(r, self.gate_radius, 2.0 * self.gate_radius)
        dchi = smoothstep_derivative(r, self.gate_radius, 2.0 * self.gate_radius)
        w, dw = self._displacement(pts)
        y = (pts + chi[:, None] * w) @ self.change.rotation.T
        # Dphi[n, i, p] = Q (I + chi dw + dchi (x_p/r) w)
        inner = np.eye(m)[None] + chi[:, None, None] * np.transpose(dw, (0, 2, 1))
        inner += np.einsum("n,ni,np->nip", dchi, w, pts / r[:, None])
        Dphi = np.einsum("ai,nip->nap", self.change.rotation, inner)
        gy = self.base.metric(y)
        return np.einsum("nap,nab,nbq->npq", Dphi, gy, Dphi)

    def exact_ball_volume(self, radius):
        if radius <= self.gate_radius:
            return self.base.exact_ball_volume(radius)
        return None


def catalog_build(kind: str, m: int | None = None, seed: int = 0, **params) -> MetricModel:
    """Build a catalog model by id; random data is drawn deterministically."""
    rng = np.random.default_rng(seed)
    if kind == "flat":
        return FlatModel(m or 4)
    if kind == "flat_quotient":
        return FlatModel(m or 4, group_order=params.get("group_order", 2))
    if kind == "synthetic_weyl":
        m = m or 4
        W = params.get("W")
        if W is None:
            W = _random_weyl_from_basis(m, rng) * params.get("amplitude", 0.05)
        return SyntheticWeylModel(
            W,
            cap_radius=params.get("cap_radius", 1.0),
            tail=params.get("tail"),
            tail_order=params.get("tail_order"),
            validate=params.get("validate", True),
        )
    if kind == "eguchi_hanson":
        if m not in (None, 4):
            raise ValueError("the instanton model is four-dimensional")
        return EguchiHansonModel(a=params.get("a", 1.0))
    if kind == "pulled_back":
        return PulledBackModel(
            params["base"],
            params["change"],
            params["gate_radius"],
            extra_vec=params.get("extra_vec"),
            extra_order=params.get("extra_order"),
        )
    raise ValueError(f"unknown catalog kind {kind!r}")


def _random_weyl_from_basis(m, rng):
    from . import spaces

    W_space = spaces.space_basis("W", m)
    if W_space.dim == 0:
        raise ValueError(f"the Weyl space is trivial in dimension {m}")
    return W_space.from_coords(rng.standard_normal(W_space.dim))
