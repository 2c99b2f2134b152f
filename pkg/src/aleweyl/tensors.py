"""Dense multilinear algebra on R^m.

Tensors are dense numpy arrays of shape (m,)*rank with rank <= 4. Index
slots are 1-based throughout this module: ``perm(T, 2, 1, 3, 4)`` is the
tensor whose (i1,i2,i3,i4) entry is ``T[i2,i1,i3,i4]``, so an expression
like ``perm(A, 2, 4, 1, 3)`` reads off directly against bracketed index
patterns.

The free functions operate on plain ndarrays (the rest of the package
works with ndarrays); the :class:`Tensor` wrapper adds invariant checks,
1-based convenience methods and the JSON wire format.
"""

from __future__ import annotations

import json
from itertools import permutations

import numpy as np

__all__ = [
    "Tensor",
    "perm",
    "sym",
    "trace",
    "delta",
    "inner",
    "norm",
    "outer",
    "conjugate",
    "random_tensor",
    "sym_part",
    "skew_part",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-10


def _check_slots(rank, slots):
    if sorted(slots) != list(range(1, rank + 1)):
        raise ValueError(f"slots {slots} are not a bijection of 1..{rank}")


def perm(T: np.ndarray, *slots: int) -> np.ndarray:
    """Slot permutation: output entry (i1..ik) = input entry (i_s(1)..i_s(k)).

    ``slots`` is the 1-based image tuple s(1..k); ``perm(T, 2, 1)`` is the
    transpose.  Note numpy's transpose takes the inverse permutation: axis
    s(p)-1 of the input becomes axis p-1 of the output.
    """
    T = np.asarray(T)
    _check_slots(T.ndim, slots)
    axes = [0] * T.ndim
    for p, s in enumerate(slots):
        axes[s - 1] = p
    return np.transpose(T, axes)


def compose(sigma, tau):
    """Composition of 1-based slot permutations: (sigma o tau)(i) = sigma(tau(i))."""
    if len(sigma) != len(tau):
        raise ValueError("rank mismatch between permutations")
    return tuple(sigma[t - 1] for t in tau)


def sym(T: np.ndarray, slots) -> np.ndarray:
    """Average over all permutations of the listed 1-based slots."""
    T = np.asarray(T)
    slots = tuple(slots)
    if not slots:
        raise ValueError("empty slot set")
    if len(set(slots)) != len(slots) or any(s < 1 or s > T.ndim for s in slots):
        raise ValueError(f"bad slot set {slots} for rank {T.ndim}")
    out = np.zeros_like(T, dtype=float)
    base = list(range(1, T.ndim + 1))
    for p in permutations(slots):
        image = base.copy()
        for s, t in zip(slots, p):
            image[s - 1] = t
        out += perm(T, *image)
    return out / _fact(len(slots))


def _fact(n):
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def trace(T: np.ndarray, i: int, j: int) -> np.ndarray:
    """Contract 1-based slots i and j with the Kronecker delta; rank drops by 2."""
    T = np.asarray(T)
    if i == j:
        raise ValueError("trace slots must differ")
    if not (1 <= i <= T.ndim and 1 <= j <= T.ndim):
        raise ValueError(f"trace slots ({i},{j}) out of range for rank {T.ndim}")
    return np.trace(T, axis1=i - 1, axis2=j - 1)


def delta(m: int) -> np.ndarray:
    """Kronecker delta on R^m."""
    if m < 3:
        raise ValueError("dimension must be >= 3")
    return np.eye(m)


def inner(A: np.ndarray, B: np.ndarray) -> float:
    """Frobenius pairing sum(A*B); dims and ranks must match."""
    A, B = np.asarray(A), np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return float(np.sum(A * B))


def norm(A: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.asarray(A) ** 2)))


def outer(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.multiply.outer(np.asarray(A), np.asarray(B))


def conjugate(T: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Rotate every slot: T'_{i...} = T_{a...} Q_{a i1} ... Q_{z ik}."""
    T = np.asarray(T, dtype=float)
    for axis in range(T.ndim):
        T = np.tensordot(T, Q, axes=([axis], [0]))
        T = np.moveaxis(T, -1, axis)
    return T


def sym_part(B: np.ndarray) -> np.ndarray:
    return 0.5 * (B + B.T)


def skew_part(B: np.ndarray) -> np.ndarray:
    return 0.5 * (B - B.T)


def random_tensor(m: int, rank: int, rng, scale: float = 1.0) -> np.ndarray:
    return scale * rng.standard_normal((m,) * rank)


class Tensor:
    """Immutable dense tensor with dim/rank metadata and invariant checks."""

    __slots__ = ("dim", "rank", "entries")

    def __init__(self, dim: int, entries):
        entries = np.array(entries, dtype=float)
        if dim < 3:
            raise ValueError("dimension must be >= 3")
        if entries.ndim == 1:
            # accept flat input for deserialization
            rank = _infer_rank(dim, entries.size)
            entries = entries.reshape((dim,) * rank)
        if entries.shape != (dim,) * entries.ndim:
            raise ValueError(f"entries shape {entries.shape} inconsistent with dim {dim}")
        if not 1 <= entries.ndim <= 4:
            raise ValueError("rank must be in 1..4")
        if not np.all(np.isfinite(entries)):
            raise ValueError("entries must be finite")
        entries.flags.writeable = False
        self.dim = dim
        self.rank = entries.ndim
        self.entries = entries

    def permute(self, *slots: int) -> "Tensor":
        return Tensor(self.dim, perm(self.entries, *slots))

    def symmetrize(self, slots) -> "Tensor":
        return Tensor(self.dim, sym(self.entries, slots))

    def trace(self, i: int, j: int):
        out = trace(self.entries, i, j)
        if out.ndim == 0:
            return float(out)
        return Tensor(self.dim, out)

    def inner(self, other: "Tensor") -> float:
        return inner(self.entries, other.entries)

    def norm(self) -> float:
        return norm(self.entries)

    def __add__(self, other):
        return Tensor(self.dim, self.entries + other.entries)

    def __sub__(self, other):
        return Tensor(self.dim, self.entries - other.entries)

    def __mul__(self, c: float):
        return Tensor(self.dim, self.entries * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return Tensor(self.dim, -self.entries)

    def allclose(self, other, tol: float = DEFAULT_TOL) -> bool:
        return bool(np.max(np.abs(self.entries - other.entries)) <= tol)

    def to_json(self) -> str:
        """Flat row-major JSON with a {dim, rank} header; round trips byte-exactly."""
        payload = {
            "dim": self.dim,
            "rank": self.rank,
            "entries": self.entries.reshape(-1).tolist(),
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "Tensor":
        payload = json.loads(text)
        entries = np.array(payload["entries"], dtype=float)
        if entries.size != payload["dim"] ** payload["rank"]:
            raise ValueError("entry count does not match dim**rank")
        return cls(payload["dim"], entries.reshape((payload["dim"],) * payload["rank"]))

    def __repr__(self):
        return f"Tensor(dim={self.dim}, rank={self.rank})"


def _infer_rank(dim, size):
    rank, n = 0, 1
    while n < size:
        n *= dim
        rank += 1
    if n != size or not 1 <= rank <= 4:
        raise ValueError(f"flat size {size} is not dim**rank for dim {dim}")
    return rank
