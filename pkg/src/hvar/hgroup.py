"""Arithmetic on the Heisenberg group H^N = R^N x R^N x R.

Points are stored either as :class:`GroupElement` values or, for vectorized
work, as float arrays whose last axis has length ``2N + 1`` laid out as
``[x_1..x_N, y_1..y_N, t]``.  The array functions (``mul``, ``inv``, ``norm``,
``dil``) broadcast over leading axes; the element functions wrap them.
"""
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

__all__ = [
    "GroupElement", "VectorFieldStencil",
    "mul", "inv", "norm", "dil", "dimension_of",
    "multiply", "inverse", "dilate", "knorm", "theta_weight",
    "apply_vector_field", "commutator", "homogeneous_dimension",
]


def homogeneous_dimension(N):
    return 2 * N + 2


def dimension_of(a):
    """Return N for a coordinate array with last axis 2N+1."""
    d = np.shape(a)[-1]
    if d < 3 or d % 2 == 0:
        raise UsageError(f"coordinate axis has length {d}, expected 2N+1 with N >= 1")
    return (d - 1) // 2


def mul(a, b):
    """Group product on coordinate arrays (broadcasting)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise UsageError("dimension mismatch in group product")
    N = dimension_of(a)
    ax, ay, at = a[..., :N], a[..., N:2 * N], a[..., 2 * N]
    bx, by, bt = b[..., :N], b[..., N:2 * N], b[..., 2 * N]
    twist = np.sum(bx * ay, axis=-1) - np.sum(ax * by, axis=-1)
    t = (at + bt) + 2.0 * twist
    return np.concatenate([ax + bx, ay + by, t[..., None]], axis=-1)


def inv(a):
    return -np.asarray(a, dtype=float)


def norm(a):
    """Koranyi norm (t^2 + (|x|^2 + |y|^2)^2)^(1/4) along the last axis."""
    a = np.asarray(a, dtype=float)
    N = dimension_of(a)
    rho2 = np.sum(a[..., :2 * N] ** 2, axis=-1)
    return (a[..., 2 * N] ** 2 + rho2 ** 2) ** 0.25


def dil(theta, a):
    if not theta > 0:
        raise UsageError(f"dilation factor must be positive, got {theta}")
    a = np.array(a, dtype=float)
    N = dimension_of(a)
    a[..., :2 * N] *= theta
    a[..., 2 * N] *= theta * theta
    return a


@dataclass(frozen=True, eq=False)
class GroupElement:
    """An immutable point (x, y, t) of H^N."""

    x: np.ndarray
    y: np.ndarray
    t: float

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        y = np.array(self.y, dtype=float).reshape(-1)
        t = float(self.t)
        if x.size == 0 or x.size != y.size:
            raise UsageError(f"x and y must be nonempty with equal length, got {x.size} and {y.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.isfinite(t)):
            raise UsageError("group element components must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)

    @property
    def N(self):
        return self.x.size

    @classmethod
    def identity(cls, N=1):
        return cls(np.zeros(N), np.zeros(N), 0.0)

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float).reshape(-1)
        N = dimension_of(a)
        return cls(a[:N], a[N:2 * N], a[2 * N])

    def as_array(self):
        return np.concatenate([self.x, self.y, [self.t]])

    def __mul__(self, other):
        return multiply(self, other)

    def __eq__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return (self.N == other.N and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y) and self.t == other.t)

    def __hash__(self):
        return hash((self.x.tobytes(), self.y.tobytes(), self.t))

    def __repr__(self):
        return f"GroupElement(x={self.x.tolist()}, y={self.y.tolist()}, t={self.t!r})"


def multiply(a, b):
    """(x, y, t).(x', y', t') = (x+x', y+y', t+t' + 2(<x', y> - <x, y'>))."""
    if a.N != b.N:
        raise UsageError(f"cannot multiply elements of H^{a.N} and H^{b.N}")
    return GroupElement.from_array(mul(a.as_array(), b.as_array()))


def inverse(a):
    return GroupElement(-a.x, -a.y, -a.t)


def dilate(theta, a):
    return GroupElement.from_array(dil(theta, a.as_array()))


def knorm(a):
    return float(norm(a.as_array()))


def theta_weight(a):
    """min{1, |a|^2}, the integrability weight for admissible kernels."""
    return min(1.0, knorm(a) ** 2)


@dataclass(frozen=True)
class VectorFieldStencil:
    """Central-difference stencil for a left-invariant field X_j, Y_j or T.

    ``index`` is 1-based and ignored for ``kind == "T"``.
    """

    kind: str
    index: int = 1
    h: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("X", "Y", "T"):
            raise UsageError(f"unknown vector field kind {self.kind!r}")
        if not self.h > 0:
            raise UsageError("stencil step h must be positive")
        if self.kind != "T" and self.index < 1:
            raise UsageError("field index is 1-based")

    def step(self, N):
        """The group element exp(h V); right translation by it moves along V."""
        d = np.zeros(2 * N + 1)
        if self.kind == "T":
            d[2 * N] = self.h
        else:
            if self.index > N:
                raise UsageError(f"field index {self.index} exceeds N={N}")
            offset = 0 if self.kind == "X" else N
            d[offset + self.index - 1] = self.h
        return GroupElement.from_array(d)


def apply_vector_field(stencil, f, p):
    """Approximate (V f)(p) by (f(p.exp(hV)) - f(p.exp(-hV))) / 2h.

    Integral curves of X_j, Y_j and T are straight lines, so p.exp(hV) is the
    exact flow and the stencil is second-order accurate.
    """
    d = stencil.step(p.N)
    fwd = f(multiply(p, d))
    bwd = f(multiply(p, inverse(d)))
    return (fwd - bwd) / (2.0 * stencil.h)


def commutator(u, v, f, p):
    """[U, V] f (p) = U(V f)(p) - V(U f)(p) with nested stencils."""
    uf = lambda q: apply_vector_field(u, f, q)  # noqa: E731
    vf = lambda q: apply_vector_field(v, f, q)  # noqa: E731
    return apply_vector_field(u, vf, p) - apply_vector_field(v, uf, p)
