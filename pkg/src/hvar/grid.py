"""Cell-centred tensor grids on a bounded domain plus a truncated exterior collar."""
import csv
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from . import hgroup
from .errors import ResourceError, UsageError
from .hgroup import GroupElement

__all__ = [
    "DomainSpec", "Grid", "box", "koranyi_ball", "build_grid", "classify",
    "default_truncation", "write_grid_csv", "read_grid_csv",
    "INTERIOR", "EXTERIOR", "OUTSIDE",
]

INTERIOR = "interior"
EXTERIOR = "exterior"
OUTSIDE = "outside_truncation"

DEFAULT_MAX_NODES = 50_000


@dataclass(frozen=True)
class DomainSpec:
    """An open box (axis-aligned in coordinates) or a left-translated Koranyi ball."""

    shape: str
    center: GroupElement
    half_widths: Optional[tuple] = None
    radius: Optional[float] = None

    def __post_init__(self):
        d = 2 * self.center.N + 1
        if self.shape == "box":
            hw = tuple(float(v) for v in np.broadcast_to(self.half_widths, (d,)))
            if not all(v > 0 for v in hw):
                raise UsageError("box half-widths must be positive")
            object.__setattr__(self, "half_widths", hw)
        elif self.shape == "koranyi_ball":
            if self.radius is None or not self.radius > 0:
                raise UsageError("ball radius must be positive")
            object.__setattr__(self, "radius", float(self.radius))
        else:
            raise UsageError(f"unknown domain shape {self.shape!r}")

    @property
    def N(self):
        return self.center.N

    def contains(self, p):
        """Strict membership for coordinate arrays (last axis 2N+1)."""
        p = np.asarray(p, dtype=float)
        c = self.center.as_array()
        if self.shape == "box":
            return np.all(np.abs(p - c) < np.asarray(self.half_widths), axis=-1)
        return hgroup.norm(hgroup.mul(hgroup.inv(c), p)) < self.radius

    def bounding_box(self):
        c = self.center.as_array()
        if self.shape == "box":
            hw = np.asarray(self.half_widths)
            return c - hw, c + hw
        N = self.N
        # B_rho(c) = c.B_rho(0); B_rho(0) lies in |x_i|,|y_i| <= rho, |t| <= rho^2,
        # and left translation shifts t by at most 2 rho (|x_c| + |y_c|).
        rho = self.radius
        lo, hi = c.copy(), c.copy()
        lo[:2 * N] -= rho
        hi[:2 * N] += rho
        shift = rho * rho + 2.0 * rho * (np.linalg.norm(c[:N]) + np.linalg.norm(c[N:2 * N]))
        lo[2 * N] -= shift
        hi[2 * N] += shift
        return lo, hi

    def sup_norm(self):
        """An upper bound for the Koranyi norm over the closure of the domain."""
        if self.shape == "box":
            lo, hi = self.bounding_box()
            corners = np.array(list(product(*zip(lo, hi))))
            return float(np.max(hgroup.norm(corners)))
        return hgroup.knorm(self.center) + self.radius

    def diameter(self):
        """Koranyi diameter; exact for balls, max over corner pairs for boxes."""
        if self.shape == "koranyi_ball":
            return 2.0 * self.radius
        lo, hi = self.bounding_box()
        corners = np.array(list(product(*zip(lo, hi))))
        z = hgroup.mul(hgroup.inv(corners)[:, None, :], corners[None, :, :])
        return float(np.max(hgroup.norm(z)))

    def measure(self):
        if self.shape == "box":
            return float(np.prod(2.0 * np.asarray(self.half_widths)))
        from .kernels import koranyi_ball_volume
        return float(koranyi_ball_volume(self.N) * self.radius ** hgroup.homogeneous_dimension(self.N))

    def dilate(self, theta):
        c = hgroup.dilate(theta, self.center)
        if self.shape == "box":
            N = self.N
            hw = np.asarray(self.half_widths, dtype=float).copy()
            hw[:2 * N] *= theta
            hw[2 * N] *= theta * theta
            return DomainSpec("box", c, half_widths=tuple(hw))
        return DomainSpec("koranyi_ball", c, radius=theta * self.radius)


def box(half_widths, center=None, N=1):
    center = GroupElement.identity(N) if center is None else center
    return DomainSpec("box", center, half_widths=tuple(np.broadcast_to(half_widths, (2 * center.N + 1,))))


def koranyi_ball(radius, center=None, N=1):
    center = GroupElement.identity(N) if center is None else center
    return DomainSpec("koranyi_ball", center, radius=radius)


def default_truncation(domain):
    return 8.0 * domain.diameter()


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes, cell volumes and interior/exterior labels.

    ``nodes`` is an (n, 2N+1) array.  Grids from :func:`build_grid` carry their
    spacing, truncation radius and domain; hand-made grids may leave them unset.
    """

    nodes: np.ndarray
    volumes: np.ndarray
    interior: np.ndarray
    h: Optional[float] = None
    ht: Optional[float] = None
    R_trunc: Optional[float] = None
    domain: Optional[DomainSpec] = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float, ndmin=2)
        vols = np.array(self.volumes, dtype=float).reshape(-1)
        interior = np.array(self.interior, dtype=bool).reshape(-1)
        hgroup.dimension_of(nodes)
        if not (nodes.shape[0] == vols.size == interior.size):
            raise UsageError("nodes, volumes and labels must have equal length")
        if np.any(vols <= 0) or not np.all(np.isfinite(nodes)):
            raise UsageError("volumes must be positive and nodes finite")
        for a in (nodes, vols, interior):
            a.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "volumes", vols)
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "interior_idx", np.flatnonzero(interior))
        object.__setattr__(self, "exterior_idx", np.flatnonzero(~interior))

    @property
    def N(self):
        return hgroup.dimension_of(self.nodes)

    @property
    def Q(self):
        return hgroup.homogeneous_dimension(self.N)

    @property
    def n(self):
        return self.nodes.shape[0]

    @property
    def n_interior(self):
        return self.interior_idx.size

    @property
    def n_exterior(self):
        return self.exterior_idx.size

    @property
    def labels(self):
        return [INTERIOR if b else EXTERIOR for b in self.interior]

    def node(self, i):
        return GroupElement.from_array(self.nodes[i])

    def zero_field(self):
        return np.zeros(self.n)

    def evaluate(self, func):
        """Sample func(coords) -> values at all nodes; func receives the (n, 2N+1) array."""
        return np.broadcast_to(np.asarray(func(self.nodes), dtype=float), (self.n,)).copy()


def _lattice_axis(lo, hi, anchor, step):
    k0 = int(np.floor((lo - anchor) / step + 1e-9))
    k1 = int(np.ceil((hi - anchor) / step - 1e-9))
    return anchor + (np.arange(k0, k1) + 0.5) * step


def build_grid(domain, h, R_trunc=None, *, ht=None, collar=None, collar_width=None,
               max_nodes=DEFAULT_MAX_NODES):
    """Uniform cell-centred grid on the domain plus an exterior collar.

    The lattice is aligned with the box faces (or has the ball centre as a
    vertex).  Without ``collar`` the lattice covers the whole truncation ball;
    with ``collar = k`` it extends k cells past the bounding box of the domain
    in every coordinate; ``collar_width = w`` (or ``(w, wt)``) extends it by the
    physical width w horizontally and wt (default w) in t, which keeps the
    exterior band fixed under refinement.  Cells whose centre has Koranyi norm above ``R_trunc``
    are dropped.  A cell is interior iff its centre lies strictly inside.
    """
    if not h > 0:
        raise UsageError("grid spacing h must be positive")
    ht = h if ht is None else ht
    if not ht > 0:
        raise UsageError("grid spacing ht must be positive")
    R = default_truncation(domain) if R_trunc is None else float(R_trunc)
    if not domain.sup_norm() < R / 2.0:
        raise UsageError(f"domain is not contained in B_(R_trunc/2) with R_trunc={R}")
    N = domain.N
    steps = np.array([h] * (2 * N) + [ht])
    lo, hi = domain.bounding_box()
    if domain.shape == "box":
        cells = (hi - lo) / steps
        if np.any(np.abs(cells - np.round(cells)) > 1e-9 * np.maximum(1.0, cells)):
            raise UsageError("grid spacing must divide the box extents")
        anchor = lo
    else:
        anchor = domain.center.as_array()

    ball_lo = np.array([-R] * (2 * N) + [-R * R])
    ball_hi = -ball_lo
    if collar is not None and collar_width is not None:
        raise UsageError("give either collar or collar_width, not both")
    if collar_width is not None:
        w = np.broadcast_to(np.asarray(collar_width, dtype=float), (2,))
        if np.any(w < 0):
            raise UsageError("collar width must be nonnegative")
        pad = np.array([w[0]] * (2 * N) + [w[1]])
        # round outward to whole cells so the band contains the requested width
        pad = np.ceil(pad / steps - 1e-9) * steps
        ext_lo = np.maximum(lo - pad, ball_lo)
        ext_hi = np.minimum(hi + pad, ball_hi)
    elif collar is None:
        ext_lo, ext_hi = ball_lo, ball_hi
    else:
        if int(collar) != collar or collar < 0:
            raise UsageError("collar must be a nonnegative number of cells")
        ext_lo = np.maximum(lo - collar * steps, ball_lo)
        ext_hi = np.minimum(hi + collar * steps, ball_hi)
    axes = [_lattice_axis(a, b, c, s) for a, b, c, s in zip(ext_lo, ext_hi, anchor, steps)]
    lattice_size = int(np.prod([ax.size for ax in axes], dtype=float))
    if lattice_size > 20 * max_nodes:
        raise ResourceError(f"lattice of {lattice_size} cells exceeds the node cap {max_nodes}")

    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    nodes = nodes[hgroup.norm(nodes) <= R]
    if nodes.shape[0] > max_nodes:
        raise ResourceError(f"{nodes.shape[0]} nodes exceed the node cap {max_nodes}")
    interior = domain.contains(nodes)
    vols = np.full(nodes.shape[0], h ** (2 * N) * ht)
    return Grid(nodes, vols, interior, h=float(h), ht=float(ht), R_trunc=R, domain=domain)


def classify(grid, p):
    """Label of an arbitrary point relative to the grid's domain and truncation."""
    a = p.as_array()
    if grid.R_trunc is not None and hgroup.norm(a) > grid.R_trunc:
        return OUTSIDE
    if grid.domain is None:
        raise UsageError("grid has no domain to classify against")
    return INTERIOR if bool(grid.domain.contains(a)) else EXTERIOR


def _header(N):
    return (["id"] + [f"x{i + 1}" for i in range(N)] + [f"y{i + 1}" for i in range(N)]
            + ["t", "volume", "label"])


def write_grid_csv(grid, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header(grid.N))
        for i in range(grid.n):
            w.writerow([i] + [repr(float(v)) for v in grid.nodes[i]]
                       + [repr(float(grid.volumes[i])), INTERIOR if grid.interior[i] else EXTERIOR])


def read_grid_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = len(header) - 3
    N = hgroup.dimension_of(np.empty(d))
    if header != _header(N):
        raise UsageError(f"unexpected grid CSV header {header}")
    nodes = np.array([[float(v) for v in r[1:1 + d]] for r in body]).reshape(-1, d)
    vols = np.array([float(r[1 + d]) for r in body])
    labels = [r[2 + d] for r in body]
    bad = set(labels) - {INTERIOR, EXTERIOR}
    if bad:
        raise UsageError(f"unknown labels {sorted(bad)}")
    return Grid(nodes, vols, np.array([lab == INTERIOR for lab in labels]))
